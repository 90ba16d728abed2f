use rayon::prelude::*;

use super::correlation::dot;
use super::{check_same_dims, DisparityMap, FeatureMap, WhvsError};
use crate::field::Tensor3;

/// Keys whose logit falls this far below the running maximum carry a weight
/// under `exp(-40)` and are skipped.
const LOGIT_CUTOFF: f64 = 40.0;
const LEAF_SIZE: usize = 8;

/// Global self-attention on the disparity values: location `p` becomes
/// `sum_q softmax_q(f_p . f_q / sqrt(D)) d_q` over locations `q` with a valid
/// disparity and an unmasked feature. A masked query attends uniformly. The
/// output is valid where `d` is.
pub fn attention_refine(d: &DisparityMap, features: &FeatureMap) -> Result<DisparityMap, WhvsError> {
    let (h, w, dim) = features.dims();
    check_same_dims((d.h, d.w, dim), (h, w, dim), "disparity vs reference features")?;
    let keys = key_indices(d, features);
    if keys.is_empty() {
        return Ok(d.clone());
    }
    let scale = 1.0 / (dim as f64).sqrt();
    let uniform = keys.iter().map(|&q| d.values[q]).sum::<f64>() / keys.len() as f64;
    let tree = KeyTree::build(&features.tensor.values, dim, keys);
    let values = (0..h * w)
        .into_par_iter()
        .map(|p| {
            if !d.is_valid(p) {
                return d.values[p];
            }
            if !features.is_valid(p / w, p % w) {
                return uniform;
            }
            let fp = &features.tensor.values[p * dim..(p + 1) * dim];
            let mut kept = Vec::new();
            let max = tree.query(fp, scale, &mut kept);
            let (mut num, mut den) = (0.0, 0.0);
            for (q, logit) in kept {
                if logit - max >= -LOGIT_CUTOFF {
                    let e = (logit - max).exp();
                    num += e * d.values[q];
                    den += e;
                }
            }
            num / den
        })
        .collect();
    Ok(DisparityMap { h: d.h, w: d.w, values, mask: d.mask.clone() })
}

fn key_indices(d: &DisparityMap, features: &FeatureMap) -> Vec<usize> {
    let w = features.tensor.w;
    (0..d.values.len()).filter(|&q| d.is_valid(q) && features.is_valid(q / w, q % w)).collect()
}

/// Dense attention weights of query `p` over `keys`.
fn dense_weights(features: &FeatureMap, keys: &[usize], p: usize) -> Vec<f64> {
    let (.., w, dim) = features.dims();
    if !features.is_valid(p / w, p % w) {
        return vec![1.0 / keys.len() as f64; keys.len()];
    }
    let scale = 1.0 / (dim as f64).sqrt();
    let fp = &features.tensor.values[p * dim..(p + 1) * dim];
    let logits: Vec<f64> = keys
        .iter()
        .map(|&q| scale * dot(fp, &features.tensor.values[q * dim..(q + 1) * dim]))
        .collect();
    super::soft::softmax(&logits).expect("finite logits")
}

/// Vector-Jacobian product of [`attention_refine`]: returns `(dd, dF)`.
pub fn attention_refine_backward(
    d: &DisparityMap,
    features: &FeatureMap,
    grad: &DisparityMap,
) -> Result<(DisparityMap, Tensor3), WhvsError> {
    let (h, w, dim) = features.dims();
    check_same_dims((d.h, d.w, dim), (h, w, dim), "disparity vs reference features")?;
    if !grad.same_shape(d) {
        return Err(WhvsError::DimMismatch("gradient map differs from disparity map".into()));
    }
    let mut dd = DisparityMap::zeros(h, w);
    let mut df = Tensor3::zeros(h, w, dim);
    let keys = key_indices(d, features);
    if keys.is_empty() {
        dd.values.copy_from_slice(&grad.values);
        return Ok((dd, df));
    }
    let scale = 1.0 / (dim as f64).sqrt();
    let f = &features.tensor.values;
    for p in 0..h * w {
        if !d.is_valid(p) {
            continue;
        }
        let g = grad.values[p];
        let a = dense_weights(features, &keys, p);
        let out: f64 = a.iter().zip(&keys).map(|(a, &q)| a * d.values[q]).sum();
        let query_valid = features.is_valid(p / w, p % w);
        for (&q, &apq) in keys.iter().zip(&a) {
            dd.values[q] += g * apq;
            if !query_valid {
                continue;
            }
            let dl = g * apq * (d.values[q] - out) * scale;
            for c in 0..dim {
                df.values[p * dim + c] += dl * f[q * dim + c];
                df.values[q * dim + c] += dl * f[p * dim + c];
            }
        }
    }
    Ok((dd, df))
}

struct Node {
    start: usize,
    end: usize,
    children: Option<(usize, usize)>,
}

/// k-d tree over key features, searched branch-and-bound for large inner products.
struct KeyTree {
    dim: usize,
    ids: Vec<usize>,
    feats: Vec<f64>,
    nodes: Vec<Node>,
    /// Per node, `[lo; dim]` then `[hi; dim]`.
    bounds: Vec<f64>,
    /// Per node, the largest squared key norm.
    max_norm2: Vec<f64>,
}

impl KeyTree {
    fn build(all: &[f64], dim: usize, mut ids: Vec<usize>) -> Self {
        let mut tree = Self { dim, ids: Vec::new(), feats: Vec::new(), nodes: Vec::new(), bounds: Vec::new(), max_norm2: Vec::new() };
        let n = ids.len();
        tree.split(all, &mut ids, 0, n);
        tree.feats = ids.iter().flat_map(|&q| all[q * dim..(q + 1) * dim].iter().copied()).collect();
        tree.ids = ids;
        tree
    }

    fn split(&mut self, all: &[f64], ids: &mut [usize], start: usize, end: usize) -> usize {
        let dim = self.dim;
        let mut lo = vec![f64::INFINITY; dim];
        let mut hi = vec![f64::NEG_INFINITY; dim];
        let mut max_norm2 = 0.0f64;
        for &q in &ids[start..end] {
            let f = &all[q * dim..(q + 1) * dim];
            for c in 0..dim {
                lo[c] = lo[c].min(f[c]);
                hi[c] = hi[c].max(f[c]);
            }
            max_norm2 = max_norm2.max(dot(f, f));
        }
        let node = self.nodes.len();
        self.nodes.push(Node { start, end, children: None });
        self.bounds.extend_from_slice(&lo);
        self.bounds.extend_from_slice(&hi);
        self.max_norm2.push(max_norm2);
        if end - start <= LEAF_SIZE {
            return node;
        }
        let axis = (0..dim).max_by(|&a, &b| (hi[a] - lo[a]).total_cmp(&(hi[b] - lo[b]))).unwrap_or(0);
        if hi[axis] <= lo[axis] {
            return node;
        }
        let mid = (end - start) / 2;
        ids[start..end].select_nth_unstable_by(mid, |&a, &b| all[a * dim + axis].total_cmp(&all[b * dim + axis]));
        let left = self.split(all, ids, start, start + mid);
        let right = self.split(all, ids, start + mid, end);
        self.nodes[node].children = Some((left, right));
        node
    }

    /// Bound on `f_p . f_q` over the node: the smaller of the best box corner
    /// and `(|f_p|^2 + max |f_q|^2 - dist(f_p, box)^2) / 2`.
    fn upper_bound(&self, node: usize, fp: &[f64], fp_norm2: f64, scale: f64) -> f64 {
        let b = &self.bounds[2 * self.dim * node..2 * self.dim * (node + 1)];
        let (lo, hi) = b.split_at(self.dim);
        let (mut corner, mut dist2) = (0.0, 0.0);
        for (x, (l, h)) in fp.iter().zip(lo.iter().zip(hi)) {
            corner += (x * l).max(x * h);
            let gap = (l - x).max(x - h).max(0.0);
            dist2 += gap * gap;
        }
        scale * corner.min(0.5 * (fp_norm2 + self.max_norm2[node] - dist2))
    }

    /// Collects `(key, logit)` for every key that can lie within the cutoff of
    /// the maximum logit, and returns that maximum.
    fn query(&self, fp: &[f64], scale: f64, kept: &mut Vec<(usize, f64)>) -> f64 {
        let mut max = f64::NEG_INFINITY;
        let fp_norm2 = dot(fp, fp);
        let mut stack = vec![(0usize, self.upper_bound(0, fp, fp_norm2, scale))];
        while let Some((node, bound)) = stack.pop() {
            if bound < max - LOGIT_CUTOFF {
                continue;
            }
            let n = &self.nodes[node];
            match n.children {
                Some((a, b)) => {
                    let (ba, bb) = (self.upper_bound(a, fp, fp_norm2, scale), self.upper_bound(b, fp, fp_norm2, scale));
                    // most promising child is popped first
                    if ba > bb {
                        stack.push((b, bb));
                        stack.push((a, ba));
                    } else {
                        stack.push((a, ba));
                        stack.push((b, bb));
                    }
                }
                None => {
                    for k in n.start..n.end {
                        let logit = scale * dot(fp, &self.feats[k * self.dim..(k + 1) * self.dim]);
                        if logit >= max - LOGIT_CUTOFF {
                            kept.push((self.ids[k], logit));
                            max = max.max(logit);
                        }
                    }
                }
            }
        }
        max
    }
}
