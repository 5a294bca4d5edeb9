//! Layer primitives on flat channel-major buffers.

use super::scalar::{gemm, Mat, Scalar};

/// Unrolls 3x3 "same"-padded patches: row `c * 9 + ky * 3 + kx`, column
/// `y * size + x` holds `input[c, y + ky - 1, x + kx - 1]` (zero outside).
pub fn im2col<F: Scalar>(input: &[F], channels: usize, size: usize, col: &mut Vec<F>) {
    let plane = size * size;
    col.clear();
    col.resize(channels * 9 * plane, F::zero());
    for c in 0..channels {
        let src = &input[c * plane..(c + 1) * plane];
        for ky in 0..3 {
            for kx in 0..3 {
                let row = &mut col[((c * 9) + ky * 3 + kx) * plane..][..plane];
                for y in 0..size {
                    let sy = y as isize + ky as isize - 1;
                    if sy < 0 || sy >= size as isize {
                        continue;
                    }
                    let src_row = &src[sy as usize * size..][..size];
                    let dst = &mut row[y * size..][..size];
                    match kx {
                        0 => dst[1..].copy_from_slice(&src_row[..size - 1]),
                        1 => dst.copy_from_slice(src_row),
                        _ => dst[..size - 1].copy_from_slice(&src_row[1..]),
                    }
                }
            }
        }
    }
}

/// Adjoint of [`im2col`]: scatters column gradients back onto the input.
pub fn col2im<F: Scalar>(col: &[F], channels: usize, size: usize, out: &mut [F]) {
    let plane = size * size;
    out.iter_mut().for_each(|v| *v = F::zero());
    for c in 0..channels {
        let dst = &mut out[c * plane..(c + 1) * plane];
        for ky in 0..3 {
            for kx in 0..3 {
                let row = &col[((c * 9) + ky * 3 + kx) * plane..][..plane];
                for y in 0..size {
                    let sy = y as isize + ky as isize - 1;
                    if sy < 0 || sy >= size as isize {
                        continue;
                    }
                    let dst_row = &mut dst[sy as usize * size..][..size];
                    let src = &row[y * size..][..size];
                    match kx {
                        0 => dst_row[..size - 1].iter_mut().zip(&src[1..]).for_each(|(d, s)| *d = *d + *s),
                        1 => dst_row.iter_mut().zip(src).for_each(|(d, s)| *d = *d + *s),
                        _ => dst_row[1..].iter_mut().zip(&src[..size - 1]).for_each(|(d, s)| *d = *d + *s),
                    }
                }
            }
        }
    }
}

/// 3x3 same convolution: `out[f] = W[f] * col + b[f]`. `weights` is
/// `filters x (channels * 9)`.
pub fn conv_forward<F: Scalar>(col: &[F], weights: &[F], bias: &[F], filters: usize, plane: usize, out: &mut [F]) {
    let k = col.len() / plane;
    gemm(Mat::new(weights, filters, k), Mat::new(col, k, plane), out, false);
    for (f, b) in bias.iter().enumerate() {
        out[f * plane..(f + 1) * plane].iter_mut().for_each(|v| *v = *v + *b);
    }
}

/// Accumulates weight and bias gradients of a convolution; optionally
/// writes the gradient with respect to the unrolled input.
#[allow(clippy::too_many_arguments)]
pub fn conv_backward<F: Scalar>(
    col: &[F],
    weights: &[F],
    grad_out: &[F],
    filters: usize,
    plane: usize,
    grad_w: &mut [F],
    grad_b: &mut [F],
    grad_col: Option<&mut [F]>,
) {
    let k = col.len() / plane;
    gemm(Mat::new(grad_out, filters, plane), Mat::new(col, k, plane).t(), grad_w, true);
    for (f, gb) in grad_b.iter_mut().enumerate() {
        *gb = *gb + grad_out[f * plane..(f + 1) * plane].iter().copied().sum();
    }
    if let Some(grad_col) = grad_col {
        gemm(Mat::new(weights, filters, k).t(), Mat::new(grad_out, filters, plane), grad_col, false);
    }
}

pub fn relu_in_place<F: Scalar>(x: &mut [F]) {
    x.iter_mut().for_each(|v| {
        if *v < F::zero() {
            *v = F::zero()
        }
    });
}

/// Zeroes gradients where the ReLU output was not positive.
pub fn relu_backward<F: Scalar>(activated: &[F], grad: &mut [F]) {
    grad.iter_mut().zip(activated).for_each(|(g, a)| {
        if *a <= F::zero() {
            *g = F::zero()
        }
    });
}

/// 2x2 max-pool with stride 2. `argmax` receives, for each output, the flat
/// index into `input` of the winning element (first maximum in scan order).
pub fn maxpool_forward<F: Scalar>(input: &[F], channels: usize, size: usize, out: &mut [F], argmax: &mut [u32]) {
    let half = size / 2;
    for c in 0..channels {
        let base = c * size * size;
        for i in 0..half {
            for j in 0..half {
                let mut best = base + 2 * i * size + 2 * j;
                for (dy, dx) in [(0, 1), (1, 0), (1, 1)] {
                    let idx = base + (2 * i + dy) * size + 2 * j + dx;
                    if input[idx] > input[best] {
                        best = idx;
                    }
                }
                let o = c * half * half + i * half + j;
                out[o] = input[best];
                argmax[o] = best as u32;
            }
        }
    }
}

/// Routes each output gradient to the input position that won the pool.
pub fn maxpool_backward<F: Scalar>(grad_out: &[F], argmax: &[u32], grad_in: &mut [F]) {
    grad_in.iter_mut().for_each(|v| *v = F::zero());
    for (g, &idx) in grad_out.iter().zip(argmax) {
        grad_in[idx as usize] = grad_in[idx as usize] + *g;
    }
}

/// `out = W x + b`, `W` is `outputs x inputs`.
pub fn dense_forward<F: Scalar>(x: &[F], weights: &[F], bias: &[F], out: &mut [F]) {
    let (outputs, inputs) = (bias.len(), x.len());
    gemm(Mat::new(weights, outputs, inputs), Mat::new(x, inputs, 1), out, false);
    out.iter_mut().zip(bias).for_each(|(o, b)| *o = *o + *b);
}

/// Accumulates `dW += g x^T`, `db += g` and optionally writes `dx = W^T g`.
pub fn dense_backward<F: Scalar>(
    x: &[F],
    weights: &[F],
    grad_out: &[F],
    grad_w: &mut [F],
    grad_b: &mut [F],
    grad_x: Option<&mut [F]>,
) {
    let (outputs, inputs) = (grad_out.len(), x.len());
    gemm(Mat::new(grad_out, outputs, 1), Mat::new(x, 1, inputs), grad_w, true);
    grad_b.iter_mut().zip(grad_out).for_each(|(b, g)| *b = *b + *g);
    if let Some(grad_x) = grad_x {
        gemm(Mat::new(weights, outputs, inputs).t(), Mat::new(grad_out, outputs, 1), grad_x, false);
    }
}

/// Numerically stable softmax (max-subtracted), computed in `f64`.
pub fn softmax<F: Scalar>(logits: &[F]) -> Vec<f64> {
    let max = logits.iter().map(|v| v.as_f64()).fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|v| (v.as_f64() - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Cross-entropy of `softmax(logits)` against class `target`, and the
/// gradient with respect to the logits.
pub fn softmax_cross_entropy<F: Scalar>(logits: &[F], target: usize) -> (f64, Vec<F>) {
    let max = logits.iter().map(|v| v.as_f64()).fold(f64::NEG_INFINITY, f64::max);
    let log_sum = logits.iter().map(|v| (v.as_f64() - max).exp()).sum::<f64>().ln() + max;
    let loss = log_sum - logits[target].as_f64();
    let grad = logits
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let p = (v.as_f64() - log_sum).exp();
            F::from_f64(if i == target { p - 1.0 } else { p })
        })
        .collect();
    (loss, grad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
        (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
    }

    /// Direct nested-loop 3x3 same convolution.
    fn naive_conv(x: &[f64], c_in: usize, s: usize, w: &[f64], b: &[f64]) -> Vec<f64> {
        let filters = b.len();
        let mut out = vec![0.0; filters * s * s];
        for f in 0..filters {
            for y in 0..s {
                for xx in 0..s {
                    let mut acc = b[f];
                    for c in 0..c_in {
                        for ky in 0..3 {
                            for kx in 0..3 {
                                let (sy, sx) = (y as isize + ky - 1, xx as isize + kx - 1);
                                if sy >= 0 && sx >= 0 && (sy as usize) < s && (sx as usize) < s {
                                    acc += w[f * c_in * 9 + c * 9 + (ky * 3 + kx) as usize]
                                        * x[c * s * s + sy as usize * s + sx as usize];
                                }
                            }
                        }
                    }
                    out[f * s * s + y * s + xx] = acc;
                }
            }
        }
        out
    }

    #[test]
    fn conv_matches_nested_loops() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (c_in, s, filters) = (3, 7, 4);
        let x = random(c_in * s * s, &mut rng);
        let w = random(filters * c_in * 9, &mut rng);
        let b = random(filters, &mut rng);
        let mut col = Vec::new();
        im2col(&x, c_in, s, &mut col);
        let mut out = vec![0.0; filters * s * s];
        conv_forward(&col, &w, &b, filters, s * s, &mut out);
        let expected = naive_conv(&x, c_in, s, &w, &b);
        for (a, e) in out.iter().zip(&expected) {
            assert!((a - e).abs() < 1e-12);
        }
    }

    #[test]
    fn identity_kernel_reproduces_input() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let s = 6;
        let x = random(s * s, &mut rng);
        let mut w = vec![0.0; 9];
        w[4] = 1.0;
        let mut col = Vec::new();
        im2col(&x, 1, s, &mut col);
        let mut out = vec![0.0; s * s];
        conv_forward(&col, &w, &[0.0], 1, s * s, &mut out);
        assert_eq!(out, x);
    }

    #[test]
    fn col2im_is_adjoint_of_im2col() {
        // <im2col(x), y> == <x, col2im(y)>
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (c, s) = (2, 5);
        let x = random(c * s * s, &mut rng);
        let y = random(c * 9 * s * s, &mut rng);
        let mut col = Vec::new();
        im2col(&x, c, s, &mut col);
        let lhs: f64 = col.iter().zip(&y).map(|(a, b)| a * b).sum();
        let mut back = vec![0.0; c * s * s];
        col2im(&y, c, s, &mut back);
        let rhs: f64 = x.iter().zip(&back).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn maxpool_routes_to_one_input() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let (c, s) = (3, 8);
        let x = random(c * s * s, &mut rng);
        let mut out = vec![0.0; c * 16];
        let mut arg = vec![0u32; c * 16];
        maxpool_forward(&x, c, s, &mut out, &mut arg);
        let g = random(c * 16, &mut rng);
        let mut gin = vec![0.0; c * s * s];
        maxpool_backward(&g, &arg, &mut gin);
        assert_eq!(gin.iter().filter(|v| **v != 0.0).count(), c * 16);
        let total_in: f64 = gin.iter().sum();
        let total_out: f64 = g.iter().sum();
        assert!((total_in - total_out).abs() < 1e-12);
        for (o, &a) in out.iter().zip(&arg) {
            assert_eq!(*o, x[a as usize]);
        }
    }

    #[test]
    fn maxpool_ties_pick_first() {
        let x = [0.0f64; 4];
        let mut out = [1.0];
        let mut arg = [9u32];
        maxpool_forward(&x, 1, 2, &mut out, &mut arg);
        assert_eq!((out[0], arg[0]), (0.0, 0));
    }

    #[test]
    fn softmax_is_stable_and_normalised() {
        for logits in [vec![1e3, -1e3, 0.0], vec![-1e3; 9], vec![0.0; 9], vec![700.0, 710.0]] {
            let p = softmax(&logits);
            assert!(p.iter().all(|v| v.is_finite() && *v >= 0.0));
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        let (loss, grad) = softmax_cross_entropy(&[0.0f64; 9], 3);
        assert!((loss - 9.0f64.ln()).abs() < 1e-12);
        assert!((grad.iter().sum::<f64>()).abs() < 1e-12);
        let (loss, _) = softmax_cross_entropy(&[1e3f64, -1e3], 1);
        assert!((loss - 2e3).abs() < 1e-9);
    }
}
