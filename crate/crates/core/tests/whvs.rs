use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wavefield::field::{Grid2D, ScalarField, Tensor3};
use wavefield::geometry::{CameraIntrinsics, StereoRig};
use wavefield::synth::{band_limited_texture, synth_stereo_pair};
use wavefield::whvs::gradcheck::operator_gradient_errors;
use wavefield::whvs::*;

fn random_map(rng: &mut ChaCha8Rng, h: usize, w: usize, d: usize) -> FeatureMap {
    let values = (0..h * w * d).map(|_| rng.random_range(-1.0..1.0)).collect();
    FeatureMap::new(Tensor3::from_vec(h, w, d, values).unwrap(), 0).unwrap()
}

#[test]
fn film_matches_elementwise_affine() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let f = random_map(&mut rng, 3, 5, 6);
    let gamma: Vec<f64> = (0..6).map(|_| rng.random_range(-0.5..0.5)).collect();
    let beta: Vec<f64> = (0..6).map(|_| rng.random_range(-0.5..0.5)).collect();
    let out = modulate(&f, &FilmParams { gamma: gamma.clone(), beta: beta.clone() }).unwrap();
    for i in 0..3 {
        for j in 0..5 {
            for c in 0..6 {
                let expect = f.tensor.get(i, j, c) * (1.0 + gamma[c]) + beta[c];
                assert!((out.tensor.get(i, j, c) - expect).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn film_mlp_gradient_matches_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut mlp = FilmMlp::zeros(3);
    let mut fill = |v: &mut Vec<f64>| v.iter_mut().for_each(|x| *x = rng.random_range(-0.4..0.4));
    mlp.w1.iter_mut().for_each(&mut fill);
    mlp.w2.iter_mut().for_each(&mut fill);
    fill(&mut mlp.b1);
    fill(&mut mlp.b2);
    let r = [0.9, -0.1, 0.2, 0.1, 0.95, 0.0, -0.2, 0.0, 0.97];
    let t = [-2.03, 0.01, 0.05];
    let probe = FilmParams { gamma: vec![0.3, -1.0, 0.7], beta: vec![1.1, 0.2, -0.4] };
    let flatten = |m: &FilmMlp| -> Vec<f64> {
        m.w1.iter().flatten().chain(&m.b1).chain(m.w2.iter().flatten()).chain(&m.b2).copied().collect()
    };
    let rebuild = |x: &[f64]| {
        let mut m = mlp.clone();
        let mut it = x.iter().copied();
        m.w1.iter_mut().flatten().chain(m.b1.iter_mut()).chain(m.w2.iter_mut().flatten()).chain(m.b2.iter_mut()).for_each(|v| *v = it.next().unwrap());
        m
    };
    let x = flatten(&mlp);
    let fd = gradcheck::central_difference(&x, 1e-6, |x| {
        let p = rebuild(x).forward(&r, &t);
        p.gamma.iter().zip(&probe.gamma).chain(p.beta.iter().zip(&probe.beta)).map(|(a, b)| a * b).sum()
    });
    let analytic = flatten(&mlp.backward(&r, &t, &probe));
    assert!(gradcheck::relative_error(&analytic, &fd) < 1e-7);
}

#[test]
fn orthogonal_features_correlate_on_the_diagonal() {
    // each row holds three mutually orthogonal unit vectors (a rotated basis)
    let (c, s) = (0.6f64, 0.8f64);
    let basis = [[c, s, 0.0], [-s, c, 0.0], [0.0, 0.0, 1.0]];
    let mut t = Tensor3::zeros(4, 3, 3);
    for i in 0..4 {
        for j in 0..3 {
            t.vector_mut(i, j).copy_from_slice(&basis[(i + j) % 3]);
        }
    }
    let f = FeatureMap::new(t, 0).unwrap();
    let vol = correlate_1d(&f, &f).unwrap();
    for i in 0..4 {
        for j in 0..3 {
            for k in 0..3 {
                let v = vol.get(i, j, k);
                if k > j {
                    assert_eq!(v, f64::NEG_INFINITY);
                } else if k == j {
                    assert!((v - 1.0 / 3f64.sqrt()).abs() < 1e-15);
                } else {
                    assert!(v.abs() < 1e-15);
                }
            }
        }
    }
}

#[test]
fn correlation_is_bilinear_and_zero_for_zero_features() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let a = random_map(&mut rng, 2, 5, 3);
    let b = random_map(&mut rng, 2, 5, 3);
    let zero = FeatureMap::new(Tensor3::zeros(2, 5, 3), 0).unwrap();
    let z = correlate_1d(&zero, &b).unwrap();
    assert!(z.values.iter().all(|v| *v == 0.0 || *v == f64::NEG_INFINITY));
    let base = correlate_1d(&a, &b).unwrap();
    let mut scaled = a.clone();
    scaled.tensor.values.iter_mut().for_each(|v| *v *= 4.0);
    let vol = correlate_1d(&scaled, &b).unwrap();
    for (x, y) in vol.values.iter().zip(&base.values) {
        assert!(*x == 4.0 * y || (*x == f64::NEG_INFINITY && *y == f64::NEG_INFINITY));
    }
    scaled.tensor.values.iter_mut().zip(&a.tensor.values).for_each(|(v, a)| *v = -1.7 * a);
    let vol = correlate_1d(&scaled, &b).unwrap();
    for (x, y) in vol.values.iter().zip(&base.values) {
        if y.is_finite() {
            assert!((x + 1.7 * y).abs() < 1e-12);
        }
    }
}

fn brute_soft(vol: &CorrelationVolume, i: usize, j: usize) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for k in 0..=j {
        let e = vol.get(i, j, k).exp();
        num += e * k as f64;
        den += e;
    }
    j as f64 - num / den
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn soft_disparity_matches_dense_expectation(seed in any::<u64>(), h in 1usize..4, w in 1usize..9) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut values = vec![f64::NEG_INFINITY; h * w * w];
        for i in 0..h {
            for j in 0..w {
                for k in 0..=j {
                    values[(i * w + j) * w + k] = rng.random_range(-5.0..5.0);
                }
            }
        }
        let vol = CorrelationVolume { h, w, values };
        let d = soft_disparity(&vol).unwrap();
        for i in 0..h {
            for j in 0..w {
                let v = d.at(i, j);
                prop_assert!((v - brute_soft(&vol, i, j)).abs() < 1e-10);
                prop_assert!(v >= 0.0 && v <= j as f64);
            }
        }
    }

    #[test]
    fn temporal_fusion_is_convex(seed in any::<u64>(), tp in 0.0f64..0.5, tn in 0.0f64..0.5, sigma in 0.1f64..5.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut map = || DisparityMap::new(3, 4, (0..12).map(|_| rng.random_range(0.0..10.0)).collect()).unwrap();
        let (a, b, c) = (map(), map(), map());
        let cfg = TemporalFusionConfig { sigma_d: sigma, tau_prev: tp, tau_next: tn };
        let out = temporal_fuse(&a, &b, &c, &cfg).unwrap();
        for k in 0..12 {
            let m = |x: f64, y: f64| (-(x - y).abs() / sigma).exp();
            let expect = b.values[k]
                + tp * m(a.values[k], b.values[k]) * (a.values[k] - b.values[k])
                + tn * m(c.values[k], b.values[k]) * (c.values[k] - b.values[k]);
            prop_assert!((out.values[k] - expect).abs() < 1e-12);
            let lo = a.values[k].min(b.values[k]).min(c.values[k]);
            let hi = a.values[k].max(b.values[k]).max(c.values[k]);
            prop_assert!(out.values[k] >= lo - 1e-12 && out.values[k] <= hi + 1e-12);
        }
    }
}

#[test]
fn softmax_rows_sum_to_one() {
    // gradient of the disparity with respect to a constant shift of all logits vanishes
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let w = 7;
    let mut values = vec![f64::NEG_INFINITY; w * w];
    for j in 0..w {
        for k in 0..=j {
            values[j * w + k] = rng.random_range(-3.0..3.0);
        }
    }
    let vol = CorrelationVolume { h: 1, w, values };
    let g = soft_disparity_backward(&vol, &DisparityMap::new(1, w, vec![1.0; w]).unwrap()).unwrap();
    for j in 0..w {
        let s: f64 = g.candidates(0, j)[..=j].iter().sum();
        assert!(s.abs() < 1e-12);
    }
}

#[test]
fn shifting_both_rows_shifts_the_disparity_support() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let (h, w, d, shift) = (2, 12, 5, 3);
    let base = random_map(&mut rng, h, w, d);
    let mut right = base.clone();
    // right feature at k equals left feature at k + 2: true disparity 2
    for i in 0..h {
        for k in 0..w - 2 {
            let v = base.tensor.vector(i, k + 2).to_vec();
            right.tensor.vector_mut(i, k).copy_from_slice(&v);
        }
    }
    let scale = |m: &FeatureMap| {
        let mut m = m.clone();
        m.tensor.values.iter_mut().for_each(|v| *v *= 20.0);
        m
    };
    let shifted = |m: &FeatureMap| {
        let mut out = m.clone();
        out.tensor.values.fill(0.0);
        for i in 0..h {
            for j in shift..w {
                let v = m.tensor.vector(i, j - shift).to_vec();
                out.tensor.vector_mut(i, j).copy_from_slice(&v);
            }
        }
        out
    };
    let (l, r) = (scale(&base), scale(&right));
    let d0 = soft_disparity(&correlate_1d(&l, &r).unwrap()).unwrap();
    let d1 = soft_disparity(&correlate_1d(&shifted(&l), &shifted(&r)).unwrap()).unwrap();
    for i in 0..h {
        for j in 4..w - shift - 2 {
            assert!((d0.at(i, j) - 2.0).abs() < 1e-3, "{}", d0.at(i, j));
            assert!((d1.at(i, j + shift) - d0.at(i, j)).abs() < 1e-3);
        }
    }
}

fn brute_attention(d: &DisparityMap, f: &FeatureMap) -> Vec<f64> {
    let (h, w, dim) = f.dims();
    let n = h * w;
    (0..n)
        .map(|p| {
            let logits: Vec<f64> = (0..n)
                .map(|q| f.tensor.values[p * dim..(p + 1) * dim].iter().zip(&f.tensor.values[q * dim..(q + 1) * dim]).map(|(a, b)| a * b).sum::<f64>() / (dim as f64).sqrt())
                .collect();
            let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let z: f64 = logits.iter().map(|l| (l - m).exp()).sum();
            logits.iter().zip(&d.values).map(|(l, v)| (l - m).exp() / z * v).sum()
        })
        .collect()
}

#[test]
fn attention_matches_dense_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for scale in [0.5, 2.0, 6.0] {
        let mut f = random_map(&mut rng, 5, 7, 4);
        f.tensor.values.iter_mut().for_each(|v| *v *= scale);
        let d = DisparityMap::new(5, 7, (0..35).map(|_| rng.random_range(0.0..9.0)).collect()).unwrap();
        let out = attention_refine(&d, &f).unwrap();
        for (a, b) in out.values.iter().zip(brute_attention(&d, &f)) {
            assert!((a - b).abs() < 1e-10);
        }
    }
}

#[test]
fn saturated_attention_is_nearly_identity() {
    // one-hot features with |f|^2 / sqrt(D) = 40
    let dim = 8;
    let mag = (40.0 * (dim as f64).sqrt()).sqrt();
    let mut t = Tensor3::zeros(2, 4, dim);
    for p in 0..8 {
        t.values[p * dim + p] = mag;
    }
    let f = FeatureMap::new(t, 0).unwrap();
    let d = DisparityMap::new(2, 4, vec![1.0, 7.0, 3.0, 0.5, 8.0, 2.0, 6.0, 4.0]).unwrap();
    let out = attention_refine(&d, &f).unwrap();
    for (a, b) in out.values.iter().zip(&d.values) {
        assert!((a - b).abs() < 1e-6);
    }
}

#[test]
fn temporal_fusion_vanishes_for_tiny_sigma() {
    let a = DisparityMap::new(1, 3, vec![1.0, 2.0, 3.0]).unwrap();
    let b = DisparityMap::new(1, 3, vec![1.5, 2.5, 3.5]).unwrap();
    let c = DisparityMap::new(1, 3, vec![0.0, 4.0, 3.0]).unwrap();
    let cfg = TemporalFusionConfig { sigma_d: 1e-6, ..Default::default() };
    assert_eq!(temporal_fuse(&a, &b, &c, &cfg).unwrap().values, b.values);
}

#[test]
fn loss_is_weighted_mean_absolute_error() {
    let pred = DisparityMap::new(3, 2, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
    let gt = DisparityMap::new(3, 2, vec![0.0, 2.5, 3.0, 3.0, 5.0, 8.0]).unwrap().with_mask(vec![true, true, true, true, true, false]).unwrap();
    let w = LossWeights::new(3.0);
    let (loss, grad) = weighted_l1_loss(&pred, &gt, &w).unwrap();
    let om = |v: f64| 0.3 + 0.7 * (1.0 - v / 3.0).powi(2);
    let expect = (om(0.0) * 1.0 + om(0.0) * 0.5 + om(1.0) * 1.0) / 5.0;
    assert!((loss - expect).abs() < 1e-15);
    assert_eq!(grad.values[2], 0.0);
    assert_eq!(grad.values[5], 0.0);
    assert!((grad.values[1] + om(0.0) / 5.0).abs() < 1e-15);
}

#[test]
fn every_operator_passes_gradient_checks() {
    for (name, err) in operator_gradient_errors(100, 20) {
        assert!(err < 1e-5, "{name}: relative error {err}");
    }
}

fn interior_epe(est: &DisparityMap, truth: &ScalarField, margin: usize) -> (f64, f64) {
    let (mut sum, mut worst, mut n) = (0.0, 0.0f64, 0);
    for i in margin..est.h - margin {
        for j in margin..est.w - margin {
            let k = i * est.w + j;
            if est.is_valid(k) {
                let e = (est.values[k] - truth.values[k]).abs();
                sum += e;
                worst = worst.max(e);
                n += 1;
            }
        }
    }
    assert!(n > (est.h - 2 * margin) * (est.w - 2 * margin) * 9 / 10, "too few valid pixels: {n}");
    (sum / n as f64, worst)
}

#[test]
fn pipeline_recovers_constant_and_zero_shifts() {
    let tex = band_limited_texture(128, 96, 1.0, 4).unwrap();
    let pipe = WhvsPipeline::new(PipelineConfig::default()).unwrap();
    let zero = pipe.estimate(&tex, &tex).unwrap();
    let (_, worst) = interior_epe(&zero, &ScalarField::zeros(tex.grid), 24);
    assert!(worst < 0.1, "identical images: worst |d| {worst}");
    let truth = ScalarField::constant(tex.grid, 4.0);
    let pair = synth_stereo_pair(&tex, &truth).unwrap();
    let (epe, _) = interior_epe(&pipe.estimate(&pair.left, &pair.right).unwrap(), &truth, 24);
    assert!(epe < 0.3, "constant shift EPE {epe}");
}

#[test]
fn pipeline_follows_smooth_disparity() {
    let tex = band_limited_texture(128, 128, 1.0, 8).unwrap();
    let truth = ScalarField::from_fn(tex.grid, |x, y| 5.0 + 3.0 * (x / 20.0).sin() * (y / 30.0).cos());
    let pair = synth_stereo_pair(&tex, &truth).unwrap();
    let pipe = WhvsPipeline::new(PipelineConfig::default()).unwrap();
    let (epe, _) = interior_epe(&pipe.estimate(&pair.left, &pair.right).unwrap(), &truth, 24);
    assert!(epe < 0.5, "smooth EPE {epe}");
}

#[test]
fn pipeline_rejects_bad_inputs_and_configs() {
    let a = band_limited_texture(32, 32, 1.0, 1).unwrap();
    let b = band_limited_texture(40, 32, 1.0, 1).unwrap();
    let pipe = WhvsPipeline::new(PipelineConfig::default()).unwrap();
    assert!(matches!(pipe.estimate(&a, &b), Err(WhvsError::DimMismatch(_))));
    assert!(WhvsPipeline::new(PipelineConfig { scales: 0, ..Default::default() }).is_err());
    assert!(pipe.clone().with_film(FilmMlp::zeros(3)).is_err());
}

#[test]
fn film_conditioning_reaches_the_matcher() {
    let tex = band_limited_texture(64, 48, 1.0, 2).unwrap();
    let truth = ScalarField::constant(tex.grid, 3.0);
    let pair = synth_stereo_pair(&tex, &truth).unwrap();
    let cam = CameraIntrinsics { fx: 100.0, fy: 100.0, cx: 32.0, cy: 24.0, width: 64, height: 48 };
    let rig = StereoRig::rectified(cam, 0.8);
    let base = WhvsPipeline::new(PipelineConfig::default()).unwrap().with_rig(&rig);
    let plain = base.estimate(&pair.left, &pair.right).unwrap();
    // a uniform gain on every channel scales all correlations alike
    let mut mlp = FilmMlp::zeros(75);
    mlp.b2[..75].iter_mut().for_each(|g| *g = -0.5);
    let damped = base.clone().with_film(mlp).unwrap().estimate(&pair.left, &pair.right).unwrap();
    assert_ne!(plain.values, damped.values);
    // translation-dependent modulation: weights on T only
    let mut mlp = FilmMlp::zeros(75);
    mlp.w1[0][9] = 1.0;
    mlp.w2.iter_mut().take(75).for_each(|row| row[0] = 0.2);
    let p = mlp.forward(&rig.r, &rig.t);
    assert!((p.gamma[0] - 0.2 * (-0.8f64).tanh()).abs() < 1e-15);
}

#[test]
fn sequence_estimates_are_temporally_fused() {
    let grid = Grid2D::pixels(64, 48).unwrap();
    let tex = band_limited_texture(64, 48, 1.0, 3).unwrap();
    let pairs: Vec<(ScalarField, ScalarField)> = [2.0, 2.5, 3.0]
        .iter()
        .map(|&d| {
            let p = synth_stereo_pair(&tex, &ScalarField::constant(grid, d)).unwrap();
            (p.left, p.right)
        })
        .collect();
    let pipe = WhvsPipeline::new(PipelineConfig::default()).unwrap();
    let raw: Vec<DisparityMap> = pairs.iter().map(|(l, r)| pipe.estimate(l, r).unwrap()).collect();
    let fused = pipe.estimate_sequence(&pairs).unwrap();
    assert_eq!(fused.len(), 3);
    let cfg = TemporalFusionConfig::default();
    assert_eq!(fused[1], temporal_fuse(&raw[0], &raw[1], &raw[2], &cfg).unwrap());
    assert_eq!(fused[0], temporal_fuse(&raw[0], &raw[0], &raw[1], &cfg).unwrap());
}
