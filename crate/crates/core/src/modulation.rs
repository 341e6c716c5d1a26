//! Trajectory-aware adapter kernel: three zero-initialized per-channel
//! scaling vectors gate FFN outputs by segment membership,
//! `h_mod = h_ffn * (1 + sum_i M_i * gamma_i)`, plus parameter accounting
//! and a finite-difference gradient check.
//!
//! Attention is outside the kernel; `layer_forward` takes its output as input.

use ndarray::{Array1, Array3, Axis, Zip};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::react::{SegmentMask, CHANNELS};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModulationError {
    #[error("shape mismatch: expected {expected:?}, got {got:?}")]
    DimensionMismatch {
        expected: Vec<usize>,
        got: Vec<usize>,
    },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// Scaling vectors for the Thought, Action and Action Input channels.
#[derive(Debug, Clone, PartialEq)]
pub struct AdapterParams {
    gammas: [Array1<f64>; CHANNELS],
}

impl AdapterParams {
    /// Fresh parameters: exactly zero.
    pub fn zeros(d: usize) -> Self {
        Self {
            gammas: std::array::from_fn(|_| Array1::zeros(d)),
        }
    }

    pub fn from_vectors(
        thought: Array1<f64>,
        action: Array1<f64>,
        input: Array1<f64>,
    ) -> Result<Self, ModulationError> {
        let d = thought.len();
        for g in [&action, &input] {
            if g.len() != d {
                return Err(ModulationError::DimensionMismatch {
                    expected: vec![d],
                    got: vec![g.len()],
                });
            }
        }
        if d == 0 {
            return Err(ModulationError::InvalidArgument(
                "hidden dimension must be at least 1".into(),
            ));
        }
        Ok(Self {
            gammas: [thought, action, input],
        })
    }

    pub fn dim(&self) -> usize {
        self.gammas[0].len()
    }

    pub fn gamma(&self, channel: usize) -> &Array1<f64> {
        &self.gammas[channel]
    }

    pub fn gamma_mut(&mut self, channel: usize) -> &mut Array1<f64> {
        &mut self.gammas[channel]
    }

    pub fn param_count(&self) -> usize {
        CHANNELS * self.dim()
    }
}

fn shape_of(a: &Array3<f64>) -> Vec<usize> {
    a.shape().to_vec()
}

/// `delta[b, t, :] = sum_i M[b, t, i] * gamma_i`.
pub fn modulation_delta(mask: &SegmentMask, params: &AdapterParams) -> Array3<f64> {
    let (b, l) = (mask.batch(), mask.seq_len());
    let d = params.dim();
    let mut delta = Array3::zeros((b, l, d));
    let m = mask.entries();
    for bi in 0..b {
        for t in 0..l {
            let mut row = delta.index_axis_mut(Axis(0), bi);
            let mut row = row.index_axis_mut(Axis(0), t);
            for (i, gamma) in params.gammas.iter().enumerate() {
                if m[[bi, t, i]] != 0 {
                    row += gamma;
                }
            }
        }
    }
    delta
}

/// `h_ffn * (1 + delta)`, element-wise.
pub fn apply_modulation(
    h_ffn: &Array3<f64>,
    delta: &Array3<f64>,
) -> Result<Array3<f64>, ModulationError> {
    if h_ffn.shape() != delta.shape() {
        return Err(ModulationError::DimensionMismatch {
            expected: shape_of(h_ffn),
            got: shape_of(delta),
        });
    }
    let mut out = h_ffn.clone();
    Zip::from(&mut out)
        .and(delta)
        .for_each(|h, &dl| *h *= 1.0 + dl);
    Ok(out)
}

fn check_mask(
    h: &Array3<f64>,
    mask: &SegmentMask,
    params: &AdapterParams,
) -> Result<(), ModulationError> {
    let expected = vec![mask.batch(), mask.seq_len(), params.dim()];
    if shape_of(h) != expected {
        return Err(ModulationError::DimensionMismatch {
            expected,
            got: shape_of(h),
        });
    }
    Ok(())
}

/// `h_attn + modulate(ffn(norm(h_attn)))`.
pub fn layer_forward<F, N>(
    h_attn: &Array3<f64>,
    ffn: F,
    norm: N,
    params: &AdapterParams,
    mask: &SegmentMask,
) -> Result<Array3<f64>, ModulationError>
where
    F: Fn(&Array3<f64>) -> Array3<f64>,
    N: Fn(&Array3<f64>) -> Array3<f64>,
{
    if h_attn.iter().any(|v| !v.is_finite()) {
        return Err(ModulationError::NonFinite("h_attn"));
    }
    check_mask(h_attn, mask, params)?;
    let h_ffn = ffn(&norm(h_attn));
    if h_ffn.shape() != h_attn.shape() {
        return Err(ModulationError::DimensionMismatch {
            expected: shape_of(h_attn),
            got: shape_of(&h_ffn),
        });
    }
    let modulated = apply_modulation(&h_ffn, &modulation_delta(mask, params))?;
    Ok(h_attn + &modulated)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamStats {
    pub layers: usize,
    pub d: usize,
    pub adapter_per_layer: u64,
    pub adapter_params: u64,
    pub ffn_per_layer: u64,
    pub ffn_params: u64,
    /// Adapter parameters relative to FFN parameters.
    pub rho: f64,
    pub lora_rank: usize,
    pub lora_per_layer: u64,
    pub lora_params: u64,
}

/// Adapter vs FFN vs LoRA parameter counts, assuming an adapter in every layer.
pub fn parameter_stats(
    layers: usize,
    d: usize,
    ffn_mult: usize,
    lora_rank: usize,
) -> Result<ParamStats, ModulationError> {
    if layers == 0 || d == 0 || ffn_mult == 0 || lora_rank == 0 {
        return Err(ModulationError::InvalidArgument(
            "all arguments must be positive".into(),
        ));
    }
    let (l, d64) = (layers as u64, d as u64);
    let adapter_per_layer = 3 * d64;
    let ffn_per_layer = 3 * ffn_mult as u64 * d64 * d64;
    let lora_per_layer = 2 * lora_rank as u64 * d64;
    Ok(ParamStats {
        layers,
        d,
        adapter_per_layer,
        adapter_params: adapter_per_layer * l,
        ffn_per_layer,
        ffn_params: ffn_per_layer * l,
        rho: adapter_per_layer as f64 / ffn_per_layer as f64,
        lora_rank,
        lora_per_layer,
        lora_params: lora_per_layer * l,
    })
}

/// Relative FLOP overhead of modulation over the FFN.
pub fn overhead_estimate(
    batch: usize,
    l_seq: usize,
    l_t: usize,
    d: usize,
) -> Result<f64, ModulationError> {
    if batch == 0 || l_seq == 0 || d == 0 {
        return Err(ModulationError::InvalidArgument(
            "batch, l_seq and d must be positive".into(),
        ));
    }
    let (b, ls, lt, d) = (batch as f64, l_seq as f64, l_t as f64, d as f64);
    Ok((b * ls * d + b * lt) / (b * ls * d * d))
}

/// Scalar loss over the modulated output with its gradient.
pub trait Loss {
    fn value(&self, out: &Array3<f64>) -> f64;
    fn gradient(&self, out: &Array3<f64>) -> Array3<f64>;
}

/// `sum(out^2)`.
pub struct SumOfSquares;

impl Loss for SumOfSquares {
    fn value(&self, out: &Array3<f64>) -> f64 {
        out.iter().map(|v| v * v).sum()
    }

    fn gradient(&self, out: &Array3<f64>) -> Array3<f64> {
        out.mapv(|v| 2.0 * v)
    }
}

/// `sum(w * out)`.
pub struct Linear(pub Array3<f64>);

impl Loss for Linear {
    fn value(&self, out: &Array3<f64>) -> f64 {
        (&self.0 * out).sum()
    }

    fn gradient(&self, _out: &Array3<f64>) -> Array3<f64> {
        self.0.clone()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheck {
    pub analytic: [Array1<f64>; CHANNELS],
    pub numeric: [Array1<f64>; CHANNELS],
    pub max_rel_error: f64,
    pub max_abs_error: f64,
}

/// Analytic gradient of `loss(h_ffn * (1 + delta))` with respect to each gamma.
pub fn analytic_gradient(
    loss: &dyn Loss,
    h_ffn: &Array3<f64>,
    mask: &SegmentMask,
    params: &AdapterParams,
) -> Result<[Array1<f64>; CHANNELS], ModulationError> {
    check_mask(h_ffn, mask, params)?;
    let out = apply_modulation(h_ffn, &modulation_delta(mask, params))?;
    let g = loss.gradient(&out);
    if g.iter().any(|v| !v.is_finite()) {
        return Err(ModulationError::NonFinite("loss gradient"));
    }
    let m = mask.entries();
    let d = params.dim();
    let mut grads: [Array1<f64>; CHANNELS] = std::array::from_fn(|_| Array1::zeros(d));
    for ((b, t, c), &h) in h_ffn.indexed_iter() {
        let gh = g[[b, t, c]] * h;
        for (i, grad) in grads.iter_mut().enumerate() {
            if m[[b, t, i]] != 0 {
                grad[c] += gh;
            }
        }
    }
    Ok(grads)
}

/// Compares the analytic gradient with central finite differences.
pub fn gradient_check(
    loss: &dyn Loss,
    h_ffn: &Array3<f64>,
    mask: &SegmentMask,
    params: &AdapterParams,
    epsilon: f64,
) -> Result<GradCheck, ModulationError> {
    if !(epsilon.is_finite() && epsilon > 0.0) {
        return Err(ModulationError::InvalidArgument(
            "epsilon must be positive".into(),
        ));
    }
    if h_ffn.iter().any(|v| !v.is_finite()) {
        return Err(ModulationError::NonFinite("h_ffn"));
    }
    let analytic = analytic_gradient(loss, h_ffn, mask, params)?;
    let d = params.dim();
    let eval = |p: &AdapterParams| -> Result<f64, ModulationError> {
        let v = loss.value(&apply_modulation(h_ffn, &modulation_delta(mask, p))?);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(ModulationError::NonFinite("loss"))
        }
    };
    let mut numeric: [Array1<f64>; CHANNELS] = std::array::from_fn(|_| Array1::zeros(d));
    let mut probe = params.clone();
    let (mut max_rel, mut max_abs) = (0.0f64, 0.0f64);
    for i in 0..CHANNELS {
        for c in 0..d {
            let base = params.gammas[i][c];
            probe.gammas[i][c] = base + epsilon;
            let plus = eval(&probe)?;
            probe.gammas[i][c] = base - epsilon;
            let minus = eval(&probe)?;
            probe.gammas[i][c] = base;
            let fd = (plus - minus) / (2.0 * epsilon);
            numeric[i][c] = fd;
            let a = analytic[i][c];
            let abs = (a - fd).abs();
            // Floor of 1 keeps cancellation noise in near-zero components from
            // reading as large relative error.
            let rel = abs / a.abs().max(fd.abs()).max(1.0);
            max_rel = max_rel.max(rel);
            max_abs = max_abs.max(abs);
        }
    }
    Ok(GradCheck {
        analytic,
        numeric,
        max_rel_error: max_rel,
        max_abs_error: max_abs,
    })
}
