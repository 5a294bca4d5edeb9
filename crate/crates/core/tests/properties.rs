use mdchar::beamform::{beamform, steering_vector};
use mdchar::nnet::layers::{maxpool_backward, maxpool_forward, softmax};
use mdchar::nnet::{fit, model_from_bytes, model_to_bytes, CnnArch, CnnModel, LabeledExample, TrainConfig};
use mdchar::scene::RawDataCube;
use mdchar::segment::{crop_pad_resize, envelopes, interval_iou, merge_events, EventInterval};
use mdchar::tensor::Tensor3;
use mdchar::tfproc::{hann, range_map, rectangular, reshape_pulses, spectrogram, ImageMatrix, SlowTimeSignal, Spectrogram};
use mdchar::{ActivityClass, RadarParams};
use num_complex::Complex64;
use proptest::prelude::*;

fn complex() -> impl Strategy<Value = Complex64> {
    (-10.0..10.0f64, -10.0..10.0f64).prop_map(|(re, im)| Complex64::new(re, im))
}

fn small_params() -> RadarParams {
    RadarParams {
        num_pulses: 3,
        ..RadarParams::default().with_samples_per_pulse(8)
    }
}

fn cube(samples: Vec<Complex64>) -> RawDataCube {
    RawDataCube {
        params: small_params(),
        samples,
        ground_truth: vec![],
    }
}

fn close(a: Complex64, b: Complex64, scale: f64) -> bool {
    (a - b).norm() <= 1e-9 * scale.max(1.0)
}

const CUBE_LEN: usize = 8 * 3 * 4;

proptest! {
    #[test]
    fn steering_phase_advances_linearly(angle in 1.0..179.0f64) {
        let a = steering_vector(angle, &RadarParams::default()).unwrap();
        let step = std::f64::consts::PI * angle.to_radians().cos();
        for (m, v) in a.values.iter().enumerate() {
            prop_assert!((v.norm() - 1.0).abs() < 1e-12);
            prop_assert!(close(*v, Complex64::from_polar(1.0, step * m as f64), 1.0));
        }
    }

    #[test]
    fn beamforming_is_linear(
        x in prop::collection::vec(complex(), CUBE_LEN),
        y in prop::collection::vec(complex(), CUBE_LEN),
        a in complex(),
        b in complex(),
        look in 5.0..175.0f64,
    ) {
        let mixed: Vec<Complex64> = x.iter().zip(&y).map(|(p, q)| a * p + b * q).collect();
        let bx = beamform(&cube(x), look).unwrap();
        let by = beamform(&cube(y), look).unwrap();
        let bm = beamform(&cube(mixed), look).unwrap();
        for ((m, p), q) in bm.iter().zip(&bx).zip(&by) {
            let want = a * p + b * q;
            prop_assert!(close(*m, want, want.norm() * 10.0));
        }
    }

    #[test]
    fn range_map_is_linear(
        x in prop::collection::vec(complex(), 64),
        y in prop::collection::vec(complex(), 64),
        a in complex(),
    ) {
        let mixed: Vec<Complex64> = x.iter().zip(&y).map(|(p, q)| a * p + q).collect();
        let rx = range_map(reshape_pulses(x, 16).unwrap());
        let ry = range_map(reshape_pulses(y, 16).unwrap());
        let rm = range_map(reshape_pulses(mixed, 16).unwrap());
        for i in 0..64 {
            let want = a * rx.values[i] + ry.values[i];
            prop_assert!(close(rm.values[i], want, 1e3));
        }
    }

    #[test]
    fn spectrogram_scales_with_squared_magnitude(
        v in prop::collection::vec(complex(), 40..120),
        c in complex(),
        hop in 1usize..12,
    ) {
        let window = hann(32);
        let base = spectrogram(&SlowTimeSignal { values: v.clone(), r_lower: 0, r_upper: 0 }, &window, hop).unwrap();
        let scaled = SlowTimeSignal { values: v.iter().map(|s| s * c).collect(), r_lower: 0, r_upper: 0 };
        let spec = spectrogram(&scaled, &window, hop).unwrap();
        let k = c.norm_sqr();
        let peak = base.power.iter().fold(0.0f64, |a, &b| a.max(b));
        for (s, b) in spec.power.iter().zip(&base.power) {
            prop_assert!((s - k * b).abs() <= 1e-9 * (k * peak).max(1.0));
        }
    }

    #[test]
    fn envelopes_are_ordered_and_scale_free(
        frame in prop::collection::vec(prop_oneof![Just(0.0), 0.0..1e3f64], 64),
        exponent in -20i32..20,
    ) {
        let spec = Spectrogram::from_frames(64, 1, rectangular(64), frame.clone()).unwrap();
        let env = envelopes(&spec);
        prop_assert!(env.lower[0] <= env.central[0] && env.central[0] <= env.upper[0]);
        // powers of two rescale without rounding
        let k = 2f64.powi(exponent);
        let scaled = Spectrogram::from_frames(64, 1, rectangular(64), frame.iter().map(|p| p * k).collect()).unwrap();
        let env_k = envelopes(&scaled);
        prop_assert_eq!((env.lower, env.central, env.upper), (env_k.lower, env_k.central, env_k.upper));
    }

    #[test]
    fn merged_events_are_sorted_and_disjoint(
        raw in prop::collection::vec((0usize..200, 1usize..40), 0..12),
    ) {
        let events: Vec<EventInterval> = raw
            .iter()
            .map(|&(s, l)| EventInterval { start: s, end: s + l, raw_start: s, raw_end: s + l })
            .collect();
        let merged = merge_events(events.clone());
        for w in merged.windows(2) {
            prop_assert!(w[0].end <= w[1].start);
        }
        for ev in &events {
            prop_assert!(merged.iter().any(|m| m.start <= ev.start && ev.end <= m.end));
        }
        prop_assert_eq!(merge_events(merged.clone()), merged);
    }

    #[test]
    fn iou_is_symmetric_and_bounded(a in (0usize..100, 1usize..50), b in (0usize..100, 1usize..50)) {
        let (x, y) = ((a.0, a.0 + a.1), (b.0, b.0 + b.1));
        let iou = interval_iou(x, y);
        prop_assert!((0.0..=1.0).contains(&iou));
        prop_assert_eq!(iou, interval_iou(y, x));
        prop_assert_eq!(interval_iou(x, x), 1.0);
    }

    #[test]
    fn softmax_lies_on_the_simplex(logits in prop::collection::vec(-50.0..50.0f64, 1..12)) {
        let p = softmax(&logits);
        prop_assert!(p.iter().all(|&v| (0.0..=1.0).contains(&v)));
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn maxpool_routes_gradient_to_the_winner(
        input in prop::collection::vec(-5.0..5.0f64, 2 * 6 * 6),
        grad in prop::collection::vec(-1.0..1.0f64, 2 * 3 * 3),
    ) {
        let mut out = vec![0.0; 18];
        let mut arg = vec![0u32; 18];
        maxpool_forward(&input, 2, 6, &mut out, &mut arg);
        let mut grad_in = vec![0.0; input.len()];
        maxpool_backward(&grad, &arg, &mut grad_in);
        for (o, (&v, &idx)) in out.iter().zip(&arg).enumerate() {
            prop_assert_eq!(v, input[idx as usize]);
            prop_assert_eq!(grad_in[idx as usize], grad[o]);
            let (c, i, j) = (o / 9, (o % 9) / 3, o % 3);
            for dy in 0..2 {
                for dx in 0..2 {
                    prop_assert!(input[c * 36 + (2 * i + dy) * 6 + 2 * j + dx] <= v);
                }
            }
        }
        let routed = grad_in.iter().filter(|g| **g != 0.0).count();
        prop_assert!(routed <= 18);
    }

    #[test]
    fn cropped_images_pad_with_zeros(
        rows in 1usize..129,
        start in 0usize..100,
        len in 1usize..28,
        fill in 0.01..1.0f64,
    ) {
        let cols = start + len + 5;
        let mut img = ImageMatrix::zeros(rows, cols);
        img.data.iter_mut().for_each(|v| *v = fill);
        let iv = EventInterval { start, end: start + len, raw_start: start, raw_end: start + len };
        let t = crop_pad_resize(&img, &iv).unwrap();
        prop_assert_eq!(t.shape(), (3, 128, 128));
        let plane = t.plane(0);
        prop_assert_eq!(&t.plane(1), &plane);
        prop_assert_eq!(&t.plane(2), &plane);
        // the crop footprint spans at most a few output pixels around the centre
        for r in 0..128 {
            for c in 0..128 {
                let v = plane.get(r, c);
                prop_assert!((0.0..=fill + 1e-12).contains(&v));
                if (r as i64 - 64).abs() > 20 && (c as i64 - 64).abs() > 20 {
                    prop_assert_eq!(v, 0.0);
                }
            }
        }
    }
}

fn tiny_arch() -> CnnArch {
    CnnArch {
        input_size: 8,
        in_channels: 1,
        branches: 3,
        conv_layers: 1,
        filters: 2,
        hidden: 4,
        classes: 9,
    }
}

fn examples(seed: u64, n: usize) -> Vec<LabeledExample> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| LabeledExample {
            id: format!("ex{i:03}"),
            images: (0..3)
                .map(|_| {
                    let mut t = Tensor3::zeros(1, 8, 8);
                    t.data.iter_mut().for_each(|v| *v = rng.gen_range(0.0..1.0));
                    t
                })
                .collect(),
            label: ActivityClass::ALL[i % 9],
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn full_batch_training_ignores_input_order(perm in Just((0..12usize).collect::<Vec<_>>()).prop_shuffle(), seed in 0u64..1000) {
        let data = examples(seed, 12);
        let cfg = TrainConfig { arch: tiny_arch(), epochs: 3, batch_size: 12, seed, ..TrainConfig::default() };
        let forward: Vec<&LabeledExample> = data.iter().collect();
        let shuffled: Vec<&LabeledExample> = perm.iter().map(|&i| &data[i]).collect();
        let mut a = CnnModel::<f64>::init(tiny_arch(), seed).unwrap();
        let mut b = a.clone();
        let la = fit(&mut a, &forward, &cfg).unwrap();
        let lb = fit(&mut b, &shuffled, &cfg).unwrap();
        prop_assert_eq!(la, lb);
        prop_assert_eq!(a.params, b.params);
    }

    #[test]
    fn checkpoint_round_trips_any_parameters(seed in 0u64..10_000) {
        let model = CnnModel::<f32>::init(tiny_arch(), seed).unwrap();
        let bytes = model_to_bytes(&model);
        let back = model_from_bytes(&bytes).unwrap();
        prop_assert_eq!(back.arch, model.arch);
        prop_assert_eq!(back.params, model.params);
        prop_assert!(model_from_bytes(&bytes[..bytes.len() - 1]).is_err());
    }
}
