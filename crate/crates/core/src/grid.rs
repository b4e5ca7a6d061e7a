//! Grid-side measurements, droop laws and the LV voltage prediction.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("maximum deviation must be positive and finite, got {0}")]
    NonPositiveDeviation(f64),
    #[error("need at least 2 samples, got {0}")]
    InsufficientData(usize),
    #[error("invalid droop configuration: {0}")]
    InvalidDroop(String),
    #[error("invalid transformer parameters: {0}")]
    InvalidTransformer(String),
    #[error("sample at t={timestamp}: {reason}")]
    InvalidSample { timestamp: f64, reason: String },
}

/// One measurement at the MV point of common coupling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSample {
    /// Seconds.
    pub timestamp: f64,
    /// Hz.
    pub freq: f64,
    /// Direct-sequence phase-to-phase voltage magnitude, kV.
    pub v_mv: f64,
}

impl GridSample {
    pub fn validate(&self) -> Result<(), GridError> {
        let bad = |reason: &str| Err(GridError::InvalidSample { timestamp: self.timestamp, reason: reason.into() });
        if !(self.freq > 45.0 && self.freq < 55.0) {
            return bad("frequency outside (45, 55) Hz");
        }
        if !(self.v_mv > 0.0) || !self.v_mv.is_finite() {
            return bad("MV voltage must be positive");
        }
        if !self.timestamp.is_finite() {
            return bad("timestamp must be finite");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DroopConfig {
    /// kW/Hz
    pub alpha0: f64,
    /// kvar/V, applied to the MV voltage deviation in volts.
    pub beta0: f64,
    /// Hz
    pub f_ref: f64,
    /// kV, MV side.
    pub v_ref: f64,
    pub lambda_p: f64,
    pub lambda_q: f64,
}

impl DroopConfig {
    pub fn validate(&self) -> Result<(), GridError> {
        let bad = |m: &str| Err(GridError::InvalidDroop(m.into()));
        if !(self.alpha0 > 0.0) || !(self.beta0 > 0.0) {
            return bad("droop gains must be positive");
        }
        if !(self.lambda_p >= 0.0 && self.lambda_q >= 0.0) || self.lambda_p + self.lambda_q == 0.0 {
            return bad("weights must be non-negative and not both zero");
        }
        if !(self.f_ref > 0.0) || !(self.v_ref > 0.0) {
            return bad("references must be positive");
        }
        Ok(())
    }

    /// Frequency deviation `f_ref - f`, Hz.
    pub fn freq_deviation(&self, sample: &GridSample) -> f64 {
        self.f_ref - sample.freq
    }

    /// MV voltage deviation `v_ref - v`, in volts.
    pub fn voltage_deviation(&self, sample: &GridSample) -> f64 {
        (self.v_ref - sample.v_mv) * 1000.0
    }
}

/// Step-up transformer, with the reactance referred to the LV side.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransformerParams {
    /// Ratio MV/LV.
    pub n: f64,
    /// Ohms, LV side.
    pub x_t: f64,
    /// kVA
    pub s_rated: f64,
    /// Short-circuit voltage, per unit.
    pub u_k: f64,
}

impl TransformerParams {
    /// Builds the parameters from nameplate data; `X = u_k V_lv^2 / S`.
    pub fn from_rating(v_mv_kv: f64, v_lv_kv: f64, s_rated_kva: f64, u_k: f64) -> Result<Self, GridError> {
        if !(v_mv_kv > 0.0 && v_lv_kv > 0.0 && s_rated_kva > 0.0 && u_k >= 0.0) {
            return Err(GridError::InvalidTransformer("ratings must be positive".into()));
        }
        let v_lv = v_lv_kv * 1000.0;
        Ok(TransformerParams {
            n: v_mv_kv / v_lv_kv,
            x_t: u_k * v_lv * v_lv / (s_rated_kva * 1000.0),
            s_rated: s_rated_kva,
            u_k,
        })
    }

    pub fn validate(&self) -> Result<(), GridError> {
        if !(self.n > 0.0) || !(self.x_t >= 0.0) {
            return Err(GridError::InvalidTransformer("need n > 0 and x_t >= 0".into()));
        }
        Ok(())
    }
}

/// Droop set-points. Over-frequency gives a negative (charging) P target
/// and over-voltage a negative (inductive) Q target.
pub fn droop_targets(sample: &GridSample, cfg: &DroopConfig) -> (f64, f64) {
    let p0 = cfg.alpha0 * cfg.freq_deviation(sample);
    let q0 = cfg.beta0 * cfg.voltage_deviation(sample);
    (p0, q0)
}

/// Gains that deliver `p_max` / `q_max` at the largest expected deviations.
/// `dmax_f` in Hz, `dmax_v` in volts.
pub fn initial_droops(p_max: f64, q_max: f64, dmax_f: f64, dmax_v: f64) -> Result<(f64, f64), GridError> {
    for d in [dmax_f, dmax_v] {
        if !(d > 0.0) || !d.is_finite() {
            return Err(GridError::NonPositiveDeviation(d));
        }
    }
    Ok((p_max / dmax_f, q_max / dmax_v))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeviationStats {
    /// Hz
    pub dmax_f: f64,
    /// kV
    pub dmax_v: f64,
    pub mu_f: f64,
    pub mu_v: f64,
    pub sigma_f: f64,
    pub sigma_v: f64,
}

/// Sample statistics of a historical trace; the maximum deviations are
/// `k_f` and `k_v` standard deviations.
pub fn max_deviations(samples: &[GridSample], k_f: f64, k_v: f64) -> Result<DeviationStats, GridError> {
    let n = samples.len();
    if n < 2 {
        return Err(GridError::InsufficientData(n));
    }
    let mean_std = |values: &mut dyn Iterator<Item = f64>| {
        let v: Vec<f64> = values.collect();
        let mean = v.iter().sum::<f64>() / n as f64;
        let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        (mean, var.sqrt())
    };
    let (mu_f, sigma_f) = mean_std(&mut samples.iter().map(|s| s.freq));
    let (mu_v, sigma_v) = mean_std(&mut samples.iter().map(|s| s.v_mv));
    Ok(DeviationStats { dmax_f: k_f * sigma_f, dmax_v: k_v * sigma_v, mu_f, mu_v, sigma_f, sigma_v })
}

/// LV-side voltage magnitude expected once `(p0, q0)` flows through the
/// transformer reactance, volts.
pub fn predict_vac(sample: &GridSample, p0: f64, q0: f64, xf: &TransformerParams) -> f64 {
    let v = sample.v_mv * 1000.0 / xf.n;
    let s2 = (p0 * p0 + q0 * q0) * 1e6;
    (v * v + xf.x_t * xf.x_t * s2 / (3.0 * v * v)).sqrt()
}

/// Effective droop gains implied by the delivered set-points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EffectiveDroops {
    /// kW/Hz; `None` when the frequency deviation is too small to divide by.
    pub alpha: Option<f64>,
    /// kvar/V
    pub beta: Option<f64>,
}

/// `dfreq` in Hz and `dvac` in volts, both as `reference - measurement`.
pub fn optimal_droops(p_star: f64, q_star: f64, dfreq: f64, dvac: f64) -> EffectiveDroops {
    EffectiveDroops {
        alpha: (dfreq.abs() > 1e-6).then(|| p_star / dfreq),
        beta: (dvac.abs() > 1e-3).then(|| q_star / dvac),
    }
}
