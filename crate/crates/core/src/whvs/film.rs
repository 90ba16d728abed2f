use serde::{Deserialize, Serialize};

use super::{FeatureMap, WhvsError};
use crate::field::Tensor3;

/// Length of the conditioning vector `[vec(R), T]`.
pub const FILM_INPUT: usize = 12;
const HIDDEN: usize = 32;

/// Channel-wise scale and shift.
#[derive(Clone, Debug, PartialEq)]
pub struct FilmParams {
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
}

/// Two dense layers `12 -> 32 (tanh) -> 2D`; output is `[gamma, beta]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilmMlp {
    pub w1: Vec<Vec<f64>>,
    pub b1: Vec<f64>,
    pub w2: Vec<Vec<f64>>,
    pub b2: Vec<f64>,
}

impl FilmMlp {
    /// All-zero weights: gamma = beta = 0, the identity modulation.
    pub fn zeros(channels: usize) -> Self {
        Self {
            w1: vec![vec![0.0; FILM_INPUT]; HIDDEN],
            b1: vec![0.0; HIDDEN],
            w2: vec![vec![0.0; HIDDEN]; 2 * channels],
            b2: vec![0.0; 2 * channels],
        }
    }

    pub fn channels(&self) -> usize {
        self.b2.len() / 2
    }

    pub fn validate(&self) -> Result<(), WhvsError> {
        let bad = |m: String| Err(WhvsError::InvalidParameter(m));
        if self.b2.is_empty() || self.b2.len() % 2 != 0 {
            return bad(format!("output bias length {} is not 2D with D >= 1", self.b2.len()));
        }
        let h = self.b1.len();
        if self.w1.len() != h || self.w1.iter().any(|r| r.len() != FILM_INPUT) {
            return bad(format!("first layer must be {h}x{FILM_INPUT}"));
        }
        if self.w2.len() != self.b2.len() || self.w2.iter().any(|r| r.len() != h) {
            return bad(format!("second layer must be {}x{h}", self.b2.len()));
        }
        let all = self.w1.iter().chain(&self.w2).flatten().chain(&self.b1).chain(&self.b2);
        if all.clone().any(|v| !v.is_finite()) {
            return bad("non-finite FiLM weight".into());
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self, WhvsError> {
        let mlp: Self = serde_json::from_str(text).map_err(|e| WhvsError::InvalidParameter(format!("FiLM weights: {e}")))?;
        mlp.validate()?;
        Ok(mlp)
    }

    fn hidden(&self, input: &[f64; FILM_INPUT]) -> Vec<f64> {
        self.w1
            .iter()
            .zip(&self.b1)
            .map(|(row, b)| (b + row.iter().zip(input).map(|(w, x)| w * x).sum::<f64>()).tanh())
            .collect()
    }

    pub fn forward(&self, r: &[f64; 9], t: &[f64; 3]) -> FilmParams {
        let input = conditioning(r, t);
        let hidden = self.hidden(&input);
        let out: Vec<f64> = self
            .w2
            .iter()
            .zip(&self.b2)
            .map(|(row, b)| b + row.iter().zip(&hidden).map(|(w, h)| w * h).sum::<f64>())
            .collect();
        let d = self.channels();
        FilmParams { gamma: out[..d].to_vec(), beta: out[d..].to_vec() }
    }

    /// Gradient of `<grad.gamma, gamma> + <grad.beta, beta>` with respect to
    /// every weight, laid out like `self`.
    pub fn backward(&self, r: &[f64; 9], t: &[f64; 3], grad: &FilmParams) -> FilmMlp {
        let input = conditioning(r, t);
        let hidden = self.hidden(&input);
        let g_out: Vec<f64> = grad.gamma.iter().chain(&grad.beta).copied().collect();
        let w2: Vec<Vec<f64>> = g_out.iter().map(|g| hidden.iter().map(|h| g * h).collect()).collect();
        let g_hidden: Vec<f64> = (0..hidden.len())
            .map(|k| {
                let back: f64 = self.w2.iter().zip(&g_out).map(|(row, g)| row[k] * g).sum();
                back * (1.0 - hidden[k] * hidden[k])
            })
            .collect();
        let w1 = g_hidden.iter().map(|g| input.iter().map(|x| g * x).collect()).collect();
        FilmMlp { w1, b1: g_hidden, w2, b2: g_out }
    }
}

fn conditioning(r: &[f64; 9], t: &[f64; 3]) -> [f64; FILM_INPUT] {
    let mut x = [0.0; FILM_INPUT];
    x[..9].copy_from_slice(r);
    x[9..].copy_from_slice(t);
    x
}

/// `F * (1 + gamma) + beta`, channel-wise.
pub fn modulate(features: &FeatureMap, params: &FilmParams) -> Result<FeatureMap, WhvsError> {
    let d = features.tensor.d;
    if params.gamma.len() != d || params.beta.len() != d {
        return Err(WhvsError::DimMismatch(format!(
            "FiLM has {}/{} channels, features have {d}",
            params.gamma.len(),
            params.beta.len()
        )));
    }
    let mut out = features.clone();
    for v in out.tensor.values.chunks_mut(d) {
        for c in 0..d {
            v[c] = v[c] * (1.0 + params.gamma[c]) + params.beta[c];
        }
    }
    Ok(out)
}

/// Vector-Jacobian product of [`modulate`]: returns `(dF, d(gamma, beta))`.
pub fn modulate_backward(
    features: &FeatureMap,
    params: &FilmParams,
    grad_out: &Tensor3,
) -> Result<(Tensor3, FilmParams), WhvsError> {
    super::check_same_dims(features.dims(), grad_out.dims(), "FiLM gradient")?;
    let d = features.tensor.d;
    let mut df = grad_out.clone();
    let mut dgamma = vec![0.0; d];
    let mut dbeta = vec![0.0; d];
    for (g, f) in df.values.chunks_mut(d).zip(features.tensor.values.chunks(d)) {
        for c in 0..d {
            dgamma[c] += g[c] * f[c];
            dbeta[c] += g[c];
            g[c] *= 1.0 + params.gamma[c];
        }
    }
    Ok((df, FilmParams { gamma: dgamma, beta: dbeta }))
}

/// Modulates `features` with the parameters the MLP predicts for pose `(R, T)`.
pub fn film_modulate(features: &FeatureMap, r: &[f64; 9], t: &[f64; 3], mlp: &FilmMlp) -> Result<FeatureMap, WhvsError> {
    modulate(features, &mlp.forward(r, t))
}
