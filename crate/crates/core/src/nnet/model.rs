use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::layers::*;
use super::scalar::Scalar;
use super::LabeledExample;
use crate::error::{Error, Result};
use crate::tensor::Tensor3;

/// Shape of the multi-branch classifier: `branches` identical stacks of
/// `conv_layers` x (3x3 conv, ReLU, 2x2 max-pool), concatenated into a ReLU
/// dense layer of `hidden` units and a softmax output of `classes`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CnnArch {
    pub input_size: usize,
    pub in_channels: usize,
    pub branches: usize,
    pub conv_layers: usize,
    pub filters: usize,
    pub hidden: usize,
    pub classes: usize,
}

impl Default for CnnArch {
    fn default() -> Self {
        Self {
            input_size: 128,
            in_channels: 3,
            branches: 3,
            conv_layers: 3,
            filters: 16,
            hidden: 64,
            classes: 9,
        }
    }
}

/// Name, shape and location of one parameter tensor in the flat buffer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TensorSpec {
    pub name: String,
    pub shape: Vec<usize>,
    pub offset: usize,
}

impl TensorSpec {
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.len()
    }
}

impl CnnArch {
    pub fn validate(&self) -> Result<()> {
        let dims = [
            self.input_size,
            self.in_channels,
            self.branches,
            self.conv_layers,
            self.filters,
            self.hidden,
            self.classes,
        ];
        if dims.contains(&0) {
            return Err(Error::invalid(format!("architecture has a zero dimension: {self:?}")));
        }
        if !self.input_size.is_multiple_of(1 << self.conv_layers) {
            return Err(Error::invalid(format!(
                "input size {} is not divisible by 2^{} pooling",
                self.input_size, self.conv_layers
            )));
        }
        Ok(())
    }

    /// Spatial side at the input of conv layer `layer`.
    pub fn size_at(&self, layer: usize) -> usize {
        self.input_size >> layer
    }

    fn channels_at(&self, layer: usize) -> usize {
        if layer == 0 {
            self.in_channels
        } else {
            self.filters
        }
    }

    /// Flattened output length of one branch.
    pub fn branch_features(&self) -> usize {
        let s = self.size_at(self.conv_layers);
        self.filters * s * s
    }

    pub fn concat_len(&self) -> usize {
        self.branches * self.branch_features()
    }

    pub fn layout(&self) -> Vec<TensorSpec> {
        let mut specs = Vec::new();
        let mut offset = 0;
        let mut push = |name: String, shape: Vec<usize>| {
            let spec = TensorSpec { name, shape, offset };
            offset += spec.len();
            specs.push(spec);
        };
        for b in 0..self.branches {
            for l in 0..self.conv_layers {
                push(format!("branch{b}.conv{l}.weight"), vec![self.filters, self.channels_at(l), 3, 3]);
                push(format!("branch{b}.conv{l}.bias"), vec![self.filters]);
            }
        }
        push("dense1.weight".into(), vec![self.hidden, self.concat_len()]);
        push("dense1.bias".into(), vec![self.hidden]);
        push("dense2.weight".into(), vec![self.classes, self.hidden]);
        push("dense2.bias".into(), vec![self.classes]);
        specs
    }

    pub fn param_count(&self) -> usize {
        self.layout().iter().map(TensorSpec::len).sum()
    }
}

/// Classifier parameters in one flat buffer described by `layout`.
#[derive(Debug, Clone, PartialEq)]
pub struct CnnModel<F> {
    pub arch: CnnArch,
    pub layout: Vec<TensorSpec>,
    pub params: Vec<F>,
}

struct BranchCache<F> {
    cols: Vec<Vec<F>>,
    activated: Vec<Vec<F>>,
    argmax: Vec<Vec<u32>>,
}

struct ForwardCache<F> {
    branches: Vec<BranchCache<F>>,
    concat: Vec<F>,
    hidden: Vec<F>,
    logits: Vec<F>,
}

impl<F: Scalar> CnnModel<F> {
    pub fn zeros(arch: CnnArch) -> Result<Self> {
        arch.validate()?;
        Ok(Self {
            arch,
            layout: arch.layout(),
            params: vec![F::zero(); arch.param_count()],
        })
    }

    /// He-uniform weights, `U(-sqrt(6 / fan_in), sqrt(6 / fan_in))`, zero biases.
    pub fn init(arch: CnnArch, seed: u64) -> Result<Self> {
        let mut model = Self::zeros(arch)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for spec in &model.layout {
            if spec.shape.len() < 2 {
                continue;
            }
            let fan_in: usize = spec.shape[1..].iter().product();
            let bound = (6.0 / fan_in as f64).sqrt();
            for p in &mut model.params[spec.range()] {
                *p = F::from_f64(rng.gen_range(-bound..bound));
            }
        }
        Ok(model)
    }

    /// Same parameters in another precision.
    pub fn cast<G: Scalar>(&self) -> CnnModel<G> {
        CnnModel {
            arch: self.arch,
            layout: self.layout.clone(),
            params: self.params.iter().map(|p| G::from_f64(p.as_f64())).collect(),
        }
    }

    pub fn tensor(&self, name: &str) -> Option<&[F]> {
        self.layout.iter().find(|s| s.name == name).map(|s| &self.params[s.range()])
    }

    fn conv_index(&self, branch: usize, layer: usize) -> usize {
        2 * (branch * self.arch.conv_layers + layer)
    }

    fn dense_index(&self) -> usize {
        2 * self.arch.branches * self.arch.conv_layers
    }

    fn slice(&self, index: usize) -> &[F] {
        &self.params[self.layout[index].range()]
    }

    fn convert_inputs(&self, images: &[Tensor3]) -> Result<Vec<Vec<F>>> {
        let a = &self.arch;
        if images.len() != a.branches {
            return Err(Error::invalid(format!(
                "model expects {} input images, got {}",
                a.branches,
                images.len()
            )));
        }
        images
            .iter()
            .map(|img| {
                if img.shape() != (a.in_channels, a.input_size, a.input_size) {
                    return Err(Error::invalid(format!(
                        "input shape {:?} does not match {}x{}x{}",
                        img.shape(),
                        a.in_channels,
                        a.input_size,
                        a.input_size
                    )));
                }
                Ok(img.data.iter().map(|&v| F::from_f64(v)).collect())
            })
            .collect()
    }

    fn forward_cached(&self, inputs: &[Vec<F>]) -> ForwardCache<F> {
        let a = self.arch;
        let mut concat = Vec::with_capacity(a.concat_len());
        let mut branches = Vec::with_capacity(a.branches);
        for (b, input) in inputs.iter().enumerate() {
            let mut cache = BranchCache {
                cols: Vec::with_capacity(a.conv_layers),
                activated: Vec::with_capacity(a.conv_layers),
                argmax: Vec::with_capacity(a.conv_layers),
            };
            let mut x = input.clone();
            for l in 0..a.conv_layers {
                let (c_in, size) = (a.channels_at(l), a.size_at(l));
                let plane = size * size;
                let mut col = Vec::new();
                im2col(&x, c_in, size, &mut col);
                let idx = self.conv_index(b, l);
                let mut act = vec![F::zero(); a.filters * plane];
                conv_forward(&col, self.slice(idx), self.slice(idx + 1), a.filters, plane, &mut act);
                relu_in_place(&mut act);
                let half = size / 2;
                let mut pooled = vec![F::zero(); a.filters * half * half];
                let mut arg = vec![0u32; pooled.len()];
                maxpool_forward(&act, a.filters, size, &mut pooled, &mut arg);
                cache.cols.push(col);
                cache.activated.push(act);
                cache.argmax.push(arg);
                x = pooled;
            }
            concat.extend_from_slice(&x);
            branches.push(cache);
        }
        let d = self.dense_index();
        let mut hidden = vec![F::zero(); a.hidden];
        dense_forward(&concat, self.slice(d), self.slice(d + 1), &mut hidden);
        relu_in_place(&mut hidden);
        let mut logits = vec![F::zero(); a.classes];
        dense_forward(&hidden, self.slice(d + 2), self.slice(d + 3), &mut logits);
        ForwardCache {
            branches,
            concat,
            hidden,
            logits,
        }
    }

    /// Class probabilities for one set of branch images.
    pub fn forward_images(&self, images: &[Tensor3]) -> Result<Vec<f64>> {
        let inputs = self.convert_inputs(images)?;
        Ok(softmax(&self.forward_cached(&inputs).logits))
    }

    pub fn forward(&self, example: &LabeledExample) -> Result<Vec<f64>> {
        self.forward_images(&example.images)
    }

    /// Index of the most probable class.
    pub fn predict(&self, example: &LabeledExample) -> Result<usize> {
        let p = self.forward(example)?;
        Ok(argmax(&p))
    }

    /// Backpropagates one example, adding `scale * dL/dθ` into `grads`.
    fn accumulate_grad(&self, cache: &ForwardCache<F>, target: usize, scale: F, grads: &mut [F]) -> f64 {
        let a = self.arch;
        let (loss, mut g_logits) = softmax_cross_entropy(&cache.logits, target);
        g_logits.iter_mut().for_each(|g| *g = *g * scale);

        let d = self.dense_index();
        let (l_w2, l_b2) = (self.layout[d + 2].range(), self.layout[d + 3].range());
        let mut g_hidden = vec![F::zero(); a.hidden];
        {
            let (gw, gb) = split_two(grads, l_w2, l_b2);
            dense_backward(&cache.hidden, self.slice(d + 2), &g_logits, gw, gb, Some(&mut g_hidden));
        }
        relu_backward(&cache.hidden, &mut g_hidden);
        let mut g_concat = vec![F::zero(); a.concat_len()];
        {
            let (gw, gb) = split_two(grads, self.layout[d].range(), self.layout[d + 1].range());
            dense_backward(&cache.concat, self.slice(d), &g_hidden, gw, gb, Some(&mut g_concat));
        }

        let feat = a.branch_features();
        for (b, bc) in cache.branches.iter().enumerate() {
            let mut g_pooled = g_concat[b * feat..(b + 1) * feat].to_vec();
            for l in (0..a.conv_layers).rev() {
                let size = a.size_at(l);
                let plane = size * size;
                let mut g_act = vec![F::zero(); a.filters * plane];
                maxpool_backward(&g_pooled, &bc.argmax[l], &mut g_act);
                relu_backward(&bc.activated[l], &mut g_act);
                let idx = self.conv_index(b, l);
                let mut g_col = if l > 0 { vec![F::zero(); bc.cols[l].len()] } else { Vec::new() };
                {
                    let (gw, gb) = split_two(grads, self.layout[idx].range(), self.layout[idx + 1].range());
                    conv_backward(
                        &bc.cols[l],
                        self.slice(idx),
                        &g_act,
                        a.filters,
                        plane,
                        gw,
                        gb,
                        if l > 0 { Some(&mut g_col) } else { None },
                    );
                }
                if l > 0 {
                    let mut g_in = vec![F::zero(); a.channels_at(l) * plane];
                    col2im(&g_col, a.channels_at(l), size, &mut g_in);
                    g_pooled = g_in;
                }
            }
        }
        loss
    }

    /// Mean cross-entropy over `batch` and its gradient for every parameter.
    pub fn loss_and_grad(&self, batch: &[&LabeledExample]) -> Result<(f64, Vec<F>)> {
        if batch.is_empty() {
            return Err(Error::invalid("loss over an empty batch"));
        }
        let mut grads = vec![F::zero(); self.params.len()];
        let scale = F::from_f64(1.0 / batch.len() as f64);
        let mut total = 0.0;
        for ex in batch {
            if ex.label.index() >= self.arch.classes {
                return Err(Error::invalid(format!("label {} outside model classes", ex.label)));
            }
            let inputs = self.convert_inputs(&ex.images)?;
            let cache = self.forward_cached(&inputs);
            total += self.accumulate_grad(&cache, ex.label.index(), scale, &mut grads);
        }
        Ok((total / batch.len() as f64, grads))
    }

    /// Mean cross-entropy without gradients.
    pub fn loss(&self, batch: &[&LabeledExample]) -> Result<f64> {
        if batch.is_empty() {
            return Err(Error::invalid("loss over an empty batch"));
        }
        let mut total = 0.0;
        for ex in batch {
            let inputs = self.convert_inputs(&ex.images)?;
            let cache = self.forward_cached(&inputs);
            total += softmax_cross_entropy(&cache.logits, ex.label.index()).0;
        }
        Ok(total / batch.len() as f64)
    }
}

/// Disjoint mutable views of two parameter ranges, `first` before `second`.
fn split_two<F>(
    buf: &mut [F],
    first: std::ops::Range<usize>,
    second: std::ops::Range<usize>,
) -> (&mut [F], &mut [F]) {
    debug_assert!(first.end <= second.start);
    let (head, tail) = buf.split_at_mut(second.start);
    (&mut head[first], &mut tail[..second.len()])
}

pub fn argmax(values: &[f64]) -> usize {
    values
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (i, &v)| if v > best.1 { (i, v) } else { best })
        .0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::activity::ActivityClass;

    fn small_arch() -> CnnArch {
        CnnArch {
            input_size: 8,
            in_channels: 3,
            branches: 3,
            conv_layers: 3,
            filters: 2,
            hidden: 5,
            classes: 9,
        }
    }

    fn example(seed: u64, arch: &CnnArch, label: ActivityClass) -> LabeledExample {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let images = (0..arch.branches)
            .map(|_| {
                let mut t = Tensor3::zeros(arch.in_channels, arch.input_size, arch.input_size);
                t.data.iter_mut().for_each(|v| *v = rng.gen_range(0.0..1.0));
                t
            })
            .collect();
        LabeledExample {
            id: format!("ex{seed}"),
            images,
            label,
        }
    }

    #[test]
    fn full_size_layout() {
        let arch = CnnArch::default();
        assert_eq!(arch.branch_features(), 16 * 16 * 16);
        assert_eq!(arch.concat_len(), 3 * 4096);
        let layout = arch.layout();
        assert_eq!(layout.len(), 3 * 3 * 2 + 4);
        assert_eq!(layout[0].shape, vec![16, 3, 3, 3]);
        assert_eq!(layout[2].shape, vec![16, 16, 3, 3]);
        let last = layout.last().unwrap();
        assert_eq!(last.offset + last.len(), arch.param_count());
    }

    #[test]
    fn zero_model_is_uniform() {
        let arch = small_arch();
        let model = CnnModel::<f64>::zeros(arch).unwrap();
        let ex = example(1, &arch, ActivityClass::SitDown0);
        let p = model.forward(&ex).unwrap();
        assert_eq!(p.len(), 9);
        assert!(p.iter().all(|v| (v - 1.0 / 9.0).abs() < 1e-15));
        let (loss, grads) = model.loss_and_grad(&[&ex]).unwrap();
        assert!((loss - 9.0f64.ln()).abs() < 1e-12);
        assert_eq!(grads.len(), arch.param_count());
    }

    #[test]
    fn output_is_a_distribution() {
        let arch = small_arch();
        let model = CnnModel::<f32>::init(arch, 5).unwrap();
        let p = model.forward(&example(2, &arch, ActivityClass::BendDown0)).unwrap();
        assert!(p.iter().all(|v| *v >= 0.0));
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let arch = small_arch();
        let model = CnnModel::<f64>::zeros(arch).unwrap();
        let mut ex = example(3, &arch, ActivityClass::SitDown0);
        ex.images.pop();
        assert!(model.forward(&ex).is_err());
        let mut ex = example(3, &arch, ActivityClass::SitDown0);
        ex.images[1] = Tensor3::zeros(3, 16, 16);
        assert!(model.forward(&ex).is_err());
        assert!(CnnModel::<f64>::zeros(CnnArch { input_size: 12, ..arch }).is_err());
    }

    #[test]
    fn duplicated_batch_gives_same_loss_and_grads() {
        let arch = small_arch();
        let model = CnnModel::<f64>::init(arch, 9).unwrap();
        let a = example(10, &arch, ActivityClass::WalkBack0);
        let b = example(11, &arch, ActivityClass::StandUp0);
        let (l1, g1) = model.loss_and_grad(&[&a, &b]).unwrap();
        let (l2, g2) = model.loss_and_grad(&[&a, &b, &a, &b]).unwrap();
        assert!((l1 - l2).abs() < 1e-12);
        for (x, y) in g1.iter().zip(&g2) {
            assert!((x - y).abs() <= 1e-12 * (1.0 + x.abs()));
        }
    }
}
