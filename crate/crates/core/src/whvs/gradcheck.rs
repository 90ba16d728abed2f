//! Central finite differences for checking vector-Jacobian products, and
//! ready-made checks of every differentiable operator on random instances.

use rand::Rng;
use rand_distr::StandardNormal;

use super::{
    attention_refine, attention_refine_backward, correlate_1d, correlate_1d_backward, modulate, modulate_backward,
    soft_disparity, soft_disparity_backward, weighted_l1_loss, CorrelationVolume, DisparityMap, FeatureMap,
    FilmParams, LossWeights,
};
use crate::field::Tensor3;
use crate::rng::indexed_substream;

/// Gradient of `f` at `x` by central differences with step `h`.
pub fn central_difference(x: &[f64], h: f64, mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|k| {
            probe[k] = x[k] + h;
            let plus = f(&probe);
            probe[k] = x[k] - h;
            let minus = f(&probe);
            probe[k] = x[k];
            (plus - minus) / (2.0 * h)
        })
        .collect()
}

/// `|a - b| / max(|a|, |b|)` in the Euclidean norm; zero when both vanish.
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let scale = norm(a).max(norm(b));
    if scale == 0.0 {
        0.0
    } else {
        norm(&diff) / scale
    }
}

const STEP: f64 = 1e-6;
const H: usize = 6;
const W: usize = 8;
const D: usize = 4;

fn normals(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

fn features(values: &[f64]) -> FeatureMap {
    FeatureMap::new(Tensor3::from_vec(H, W, D, values.to_vec()).expect("sized"), 0).expect("finite")
}

fn inner(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// FiLM modulation: gradient of `<R, out>` with respect to `(F, gamma, beta)`.
pub fn film_check(seed: u64) -> f64 {
    let mut rng = indexed_substream(seed, "gradcheck-film", 0);
    let n = H * W * D;
    let x = normals(&mut rng, n + 2 * D);
    let probe = normals(&mut rng, n);
    let split = |x: &[f64]| (features(&x[..n]), FilmParams { gamma: x[n..n + D].to_vec(), beta: x[n + D..].to_vec() });
    let objective = |x: &[f64]| {
        let (f, p) = split(x);
        inner(&modulate(&f, &p).expect("dims").tensor.values, &probe)
    };
    let (f, p) = split(&x);
    let grad_out = Tensor3::from_vec(H, W, D, probe.clone()).expect("sized");
    let (df, dp) = modulate_backward(&f, &p, &grad_out).expect("dims");
    let analytic: Vec<f64> = df.values.into_iter().chain(dp.gamma).chain(dp.beta).collect();
    relative_error(&analytic, &central_difference(&x, STEP, objective))
}

/// Row correlation: gradient of `<R, C>` over unmasked entries with respect to both maps.
pub fn correlation_check(seed: u64) -> f64 {
    let mut rng = indexed_substream(seed, "gradcheck-correlation", 0);
    let n = H * W * D;
    let x = normals(&mut rng, 2 * n);
    let probe = normals(&mut rng, H * W * W);
    let objective = |x: &[f64]| {
        let c = correlate_1d(&features(&x[..n]), &features(&x[n..])).expect("dims");
        c.values.iter().zip(&probe).filter(|(c, _)| c.is_finite()).map(|(c, r)| c * r).sum::<f64>()
    };
    let grad = CorrelationVolume { h: H, w: W, values: probe.clone() };
    let (dl, dr) = correlate_1d_backward(&features(&x[..n]), &features(&x[n..]), &grad).expect("dims");
    let analytic: Vec<f64> = dl.values.into_iter().chain(dr.values).collect();
    relative_error(&analytic, &central_difference(&x, STEP, objective))
}

/// Soft disparity: gradient of `<R, d>` with respect to the unmasked correlations.
pub fn soft_disparity_check(seed: u64) -> f64 {
    let mut rng = indexed_substream(seed, "gradcheck-soft", 0);
    let open: Vec<(usize, usize, usize)> =
        (0..H).flat_map(|i| (0..W).flat_map(move |j| (0..=j).map(move |k| (i, j, k)))).collect();
    let x = normals(&mut rng, open.len());
    let probe = normals(&mut rng, H * W);
    let volume = |x: &[f64]| {
        let mut values = vec![f64::NEG_INFINITY; H * W * W];
        for (&(i, j, k), v) in open.iter().zip(x) {
            values[(i * W + j) * W + k] = *v;
        }
        CorrelationVolume { h: H, w: W, values }
    };
    let objective = |x: &[f64]| inner(&soft_disparity(&volume(x)).expect("candidates").values, &probe);
    let grad = DisparityMap::new(H, W, probe.clone()).expect("sized");
    let dc = soft_disparity_backward(&volume(&x), &grad).expect("dims");
    let analytic: Vec<f64> = open.iter().map(|&(i, j, k)| dc.values[(i * W + j) * W + k]).collect();
    relative_error(&analytic, &central_difference(&x, STEP, objective))
}

/// Self-attention: gradient of `<R, out>` with respect to `(d, F)`.
pub fn attention_check(seed: u64) -> f64 {
    let mut rng = indexed_substream(seed, "gradcheck-attention", 0);
    let n = H * W;
    let x = normals(&mut rng, n + n * D);
    let probe = normals(&mut rng, n);
    let split = |x: &[f64]| (DisparityMap::new(H, W, x[..n].to_vec()).expect("sized"), features(&x[n..]));
    let objective = |x: &[f64]| {
        let (d, f) = split(x);
        inner(&attention_refine(&d, &f).expect("dims").values, &probe)
    };
    let (d, f) = split(&x);
    let grad = DisparityMap::new(H, W, probe.clone()).expect("sized");
    let (dd, df) = attention_refine_backward(&d, &f, &grad).expect("dims");
    let analytic: Vec<f64> = dd.values.into_iter().chain(df.values).collect();
    relative_error(&analytic, &central_difference(&x, STEP, objective))
}

/// Weighted L1 loss with respect to the prediction, kept away from ties.
pub fn loss_check(seed: u64) -> f64 {
    let mut rng = indexed_substream(seed, "gradcheck-loss", 0);
    let n = H * W;
    let truth = normals(&mut rng, n);
    let pred: Vec<f64> = truth
        .iter()
        .map(|t| {
            let offset: f64 = rng.random_range(0.1..2.0);
            if rng.random::<bool>() {
                t + offset
            } else {
                t - offset
            }
        })
        .collect();
    let gt = DisparityMap::new(H, W, truth).expect("sized");
    let weights = LossWeights::new(H as f64);
    let objective = |x: &[f64]| weighted_l1_loss(&DisparityMap::new(H, W, x.to_vec()).expect("sized"), &gt, &weights).expect("mask").0;
    let (_, grad) = weighted_l1_loss(&DisparityMap::new(H, W, pred.clone()).expect("sized"), &gt, &weights).expect("mask");
    relative_error(&grad.values, &central_difference(&pred, STEP, objective))
}

/// Largest relative error of each operator over `instances` random
/// 6x8x4 problems: film, correlation, soft disparity, attention, loss.
pub fn operator_gradient_errors(seed: u64, instances: usize) -> [(&'static str, f64); 5] {
    let worst = |check: fn(u64) -> f64| (0..instances as u64).map(|k| check(seed.wrapping_add(k))).fold(0.0, f64::max);
    [
        ("film_modulate", worst(film_check)),
        ("correlate_1d", worst(correlation_check)),
        ("soft_disparity", worst(soft_disparity_check)),
        ("attention_refine", worst(attention_check)),
        ("weighted_l1_loss", worst(loss_check)),
    ]
}
