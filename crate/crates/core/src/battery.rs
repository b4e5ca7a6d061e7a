//! Three-time-constant (TTC) equivalent circuit of the battery pack.
//!
//! The pack is a voltage source `E(SOC) = a + b SOC` in series with `Rs` and
//! three parallel RC branches. Sign convention throughout: positive DC power
//! and current mean discharge, which lowers SOC.

use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::text::{parse_number, significant_lines};

/// Slack applied when checking SOC limits, absorbing rounding when a step is
/// sized to land exactly on a limit.
pub const SOC_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BatteryError {
    #[error("SOC {soc} outside parameter band [{lo}, {hi}]")]
    WrongBand { soc: f64, lo: f64, hi: f64 },
    #[error("no parameter band covers SOC {0}")]
    NoBand(f64),
    #[error("DC bus voltage must be positive, got {0} V")]
    NonPositiveVdc(f64),
    #[error("DC power {p_dc} kW exceeds the maximum deliverable {p_max} kW")]
    InfeasiblePower { p_dc: f64, p_max: f64 },
    #[error("SOC {soc} violates limits [{min}, {max}]")]
    SocLimit { soc: f64, min: f64, max: f64 },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid battery parameters: {0}")]
    InvalidParams(String),
    #[error("invalid battery configuration: {0}")]
    InvalidConfig(String),
}

/// SOC interval `[lo, hi)`; closed at the right when `hi` is 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SocBand {
    pub lo: f64,
    pub hi: f64,
}

impl SocBand {
    pub fn contains(&self, soc: f64) -> bool {
        soc >= self.lo && (soc < self.hi || (self.hi >= 1.0 && soc <= self.hi))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TtcParams {
    /// Open-circuit voltage intercept, V.
    pub a: f64,
    /// Open-circuit voltage slope, V per unit SOC.
    pub b: f64,
    pub rs: f64,
    pub r: [f64; 3],
    pub c: [f64; 3],
    pub band: SocBand,
}

impl TtcParams {
    pub fn time_constants(&self) -> [f64; 3] {
        [self.r[0] * self.c[0], self.r[1] * self.c[1], self.r[2] * self.c[2]]
    }

    fn validate(&self) -> Result<(), BatteryError> {
        let bad = |m: String| Err(BatteryError::InvalidParams(m));
        if !(self.rs > 0.0) || self.r.iter().any(|r| !(*r > 0.0)) {
            return bad(format!("resistances must be positive (band starting {})", self.band.lo));
        }
        if self.c.iter().any(|c| !(*c > 0.0)) {
            return bad(format!("capacitances must be positive (band starting {})", self.band.lo));
        }
        if !(0.0..=1.0).contains(&self.band.lo) || !(0.0..=1.0).contains(&self.band.hi) || self.band.lo >= self.band.hi {
            return bad(format!("band [{}, {}] is not a sub-interval of [0, 1]", self.band.lo, self.band.hi));
        }
        Ok(())
    }
}

/// SOC-banded parameter sets covering [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct TtcParamTable {
    bands: Vec<TtcParams>,
}

impl TtcParamTable {
    pub fn new(mut bands: Vec<TtcParams>) -> Result<Self, BatteryError> {
        bands.sort_by(|x, y| x.band.lo.total_cmp(&y.band.lo));
        for p in &bands {
            p.validate()?;
        }
        let partition = !bands.is_empty()
            && bands[0].band.lo == 0.0
            && bands.last().map(|p| p.band.hi) == Some(1.0)
            && bands.windows(2).all(|w| w[0].band.hi == w[1].band.lo);
        if !partition {
            return Err(BatteryError::InvalidParams("SOC bands must partition [0, 1] without gaps".into()));
        }
        Ok(TtcParamTable { bands })
    }

    /// The parameter file shipped in `data/ttc_params.txt`.
    pub fn builtin() -> Self {
        BUILTIN_PARAMS.parse().expect("shipped parameter file is valid")
    }

    pub fn select(&self, soc: f64) -> Result<&TtcParams, BatteryError> {
        self.bands.iter().find(|p| p.band.contains(soc)).ok_or(BatteryError::NoBand(soc))
    }

    pub fn bands(&self) -> &[TtcParams] {
        &self.bands
    }
}

const BUILTIN_PARAMS: &str = include_str!("../data/ttc_params.txt");

impl FromStr for TtcParamTable {
    type Err = BatteryError;

    fn from_str(source: &str) -> Result<Self, Self::Err> {
        const KEYS: [&str; 9] = ["a", "b", "rs", "r1", "c1", "r2", "c2", "r3", "c3"];
        let mut bands = Vec::new();
        let mut open: Option<(usize, SocBand, [Option<f64>; 9])> = None;

        for (line, tokens) in significant_lines(source) {
            let err = |message: String| BatteryError::Parse { line, message };
            let num = |t: &str| parse_number(t).map_err(|e| err(e.to_string()));
            match tokens[0] {
                "band" => {
                    if open.is_some() {
                        return Err(err("`band` before previous band's `end`".into()));
                    }
                    if tokens.len() != 3 {
                        return Err(err("expected `band <soc_lo> <soc_hi>`".into()));
                    }
                    open = Some((line, SocBand { lo: num(tokens[1])?, hi: num(tokens[2])? }, [None; 9]));
                }
                "end" => {
                    let (_, band, values) = open.take().ok_or_else(|| err("`end` without `band`".into()))?;
                    let mut v = [0.0; 9];
                    for (i, slot) in values.iter().enumerate() {
                        v[i] = slot.ok_or_else(|| err(format!("band missing `{}`", KEYS[i])))?;
                    }
                    bands.push(TtcParams {
                        a: v[0],
                        b: v[1],
                        rs: v[2],
                        r: [v[3], v[5], v[7]],
                        c: [v[4], v[6], v[8]],
                        band,
                    });
                }
                key => {
                    let (_, _, values) = open.as_mut().ok_or_else(|| err(format!("`{key}` outside a band block")))?;
                    let idx = KEYS.iter().position(|k| *k == key).ok_or_else(|| err(format!("unknown key `{key}`")))?;
                    if tokens.len() != 2 {
                        return Err(err(format!("`{key}` expects one value")));
                    }
                    values[idx] = Some(num(tokens[1])?);
                }
            }
        }
        if let Some((line, _, _)) = open {
            return Err(BatteryError::Parse { line, message: "band is missing `end`".into() });
        }
        TtcParamTable::new(bands)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TtcState {
    /// RC branch voltages, V.
    pub vc: [f64; 3],
    pub soc: f64,
}

impl TtcState {
    /// A rested pack: relaxed branches at the given SOC.
    pub fn rested(soc: f64) -> Self {
        TtcState { vc: [0.0; 3], soc }
    }

    pub fn branch_sum(&self) -> f64 {
        self.vc.iter().sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BatteryConfig {
    /// Available capacity, Ah.
    pub c_max_ah: f64,
    /// Converter efficiency.
    pub eta: f64,
    pub soc_min: f64,
    pub soc_max: f64,
    pub vdc_min: f64,
    pub vdc_max: f64,
    /// Control period, s.
    pub delta_t: f64,
}

impl BatteryConfig {
    pub fn validate(&self) -> Result<(), BatteryError> {
        let bad = |m: &str| Err(BatteryError::InvalidConfig(m.to_string()));
        if !(self.c_max_ah > 0.0) {
            return bad("c_max must be positive");
        }
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            return bad("eta must lie in (0, 1]");
        }
        if !(0.0 <= self.soc_min && self.soc_min < self.soc_max && self.soc_max <= 1.0) {
            return bad("SOC limits must satisfy 0 <= soc_min < soc_max <= 1");
        }
        if !(0.0 < self.vdc_min && self.vdc_min < self.vdc_max) {
            return bad("DC voltage limits must satisfy 0 < vdc_min < vdc_max");
        }
        if !(self.delta_t > 0.0) {
            return bad("delta_t must be positive");
        }
        Ok(())
    }

    fn capacity_as(&self) -> f64 {
        self.c_max_ah * 3600.0
    }
}

pub fn open_circuit_voltage(soc: f64, params: &TtcParams) -> Result<f64, BatteryError> {
    if !params.band.contains(soc) {
        return Err(BatteryError::WrongBand { soc, lo: params.band.lo, hi: params.band.hi });
    }
    Ok(params.a + params.b * soc)
}

/// DC-side power for an AC-side set-point under the converter efficiency.
pub fn dc_from_ac(p_ac: f64, eta: f64) -> f64 {
    if p_ac < 0.0 {
        eta * p_ac
    } else {
        p_ac / eta
    }
}

/// Inverse of [`dc_from_ac`].
pub fn ac_from_dc(p_dc: f64, eta: f64) -> f64 {
    if p_dc < 0.0 {
        p_dc / eta
    } else {
        p_dc * eta
    }
}

fn soc_after(soc: f64, p_dc: f64, vdc: f64, c_max_as: f64, dt: f64) -> f64 {
    soc - (p_dc * 1000.0 / (vdc * c_max_as)) * dt
}

/// Advances the RC branches and SOC over `dt` with the DC current held at
/// `p_dc / vdc`. The branch update is the exact zero-order-hold solution.
/// SOC limits are not checked here; see [`soc_update`].
pub fn ttc_step(
    state: &TtcState,
    p_dc: f64,
    vdc: f64,
    params: &TtcParams,
    cfg: &BatteryConfig,
    dt: f64,
) -> Result<TtcState, BatteryError> {
    if !(vdc > 0.0) {
        return Err(BatteryError::NonPositiveVdc(vdc));
    }
    let current = p_dc * 1000.0 / vdc;
    let mut vc = state.vc;
    for (i, v) in vc.iter_mut().enumerate() {
        let decay = (-dt / (params.r[i] * params.c[i])).exp();
        *v = *v * decay + params.r[i] * current * (1.0 - decay);
    }
    Ok(TtcState { vc, soc: soc_after(state.soc, p_dc, vdc, cfg.capacity_as(), dt) })
}

/// Coulomb-counting SOC update over one control period, rejecting results
/// outside the configured limits.
pub fn soc_update(soc: f64, p_dc: f64, vdc: f64, cfg: &BatteryConfig) -> Result<f64, BatteryError> {
    if !(vdc > 0.0) {
        return Err(BatteryError::NonPositiveVdc(vdc));
    }
    let next = soc_after(soc, p_dc, vdc, cfg.capacity_as(), cfg.delta_t);
    if next < cfg.soc_min - SOC_TOL || next > cfg.soc_max + SOC_TOL {
        return Err(BatteryError::SocLimit { soc: next, min: cfg.soc_min, max: cfg.soc_max });
    }
    Ok(next)
}

/// Source voltage minus the branch voltages: the driving term of the bus
/// voltage quadratic `v^2 - d v + p Rs = 0`.
fn driving_voltage(state: &TtcState, params: &TtcParams) -> Result<f64, BatteryError> {
    Ok(open_circuit_voltage(state.soc, params)? - state.branch_sum())
}

/// Largest DC power (kW) the circuit can deliver: the double-root point of
/// the bus voltage quadratic.
pub fn max_power_point(state: &TtcState, params: &TtcParams) -> Result<f64, BatteryError> {
    let d = driving_voltage(state, params)?;
    Ok(if d > 0.0 { d * d / (4.0 * params.rs) / 1000.0 } else { 0.0 })
}

/// DC-bus voltage for a DC power, the larger root of
/// `v^2 + (sum(vc) - E) v + p_dc Rs = 0`.
pub fn solve_vdc(p_dc: f64, state: &TtcState, params: &TtcParams) -> Result<f64, BatteryError> {
    let d = driving_voltage(state, params)?;
    let d2 = d * d;
    let mut disc = d2 - 4.0 * p_dc * 1000.0 * params.rs;
    if disc < 0.0 {
        // Rounding at the double root.
        if disc >= -1e-12 * d2 {
            disc = 0.0;
        } else {
            return Err(BatteryError::InfeasiblePower { p_dc, p_max: max_power_point(state, params)? });
        }
    }
    Ok((d + disc.sqrt()) / 2.0)
}

/// Residual of the bus voltage quadratic relative to `max(1, vdc^2)`.
pub fn vdc_residual(vdc: f64, p_dc: f64, state: &TtcState, params: &TtcParams) -> Result<f64, BatteryError> {
    let d = driving_voltage(state, params)?;
    Ok((vdc * vdc - d * vdc + p_dc * 1000.0 * params.rs).abs() / (vdc * vdc).max(1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DcPowerBounds {
    /// Most negative (charging) DC power, kW. Always <= 0.
    pub min: f64,
    /// Largest discharging DC power, kW. Always >= 0.
    pub max: f64,
}

/// DC power interval admissible for the next control period.
///
/// Combines the maximum-power point of the bus quadratic, the SOC limits
/// reached after one period, and the DC voltage window. For a DC current `i`
/// the bus settles at `v = d - i Rs`, so every limit has a closed form.
pub fn dc_power_bounds(state: &TtcState, params: &TtcParams, cfg: &BatteryConfig) -> Result<DcPowerBounds, BatteryError> {
    let d = driving_voltage(state, params)?;
    let rs = params.rs;
    let mpp = max_power_point(state, params)?;
    let amp_seconds = cfg.capacity_as() / cfg.delta_t;

    // Discharge: SOC floor.
    let i_dis = (state.soc - cfg.soc_min).max(0.0) * amp_seconds;
    let p_soc_max = if i_dis < d / (2.0 * rs) { i_dis * (d - i_dis * rs) / 1000.0 } else { mpp };
    // Discharge: bus voltage floor, only active on the upper root branch.
    let p_v_max = if cfg.vdc_min >= d {
        0.0
    } else if cfg.vdc_min > d / 2.0 {
        cfg.vdc_min * (d - cfg.vdc_min) / (rs * 1000.0)
    } else {
        mpp
    };
    let max = mpp.min(p_soc_max).min(p_v_max).max(0.0);

    // Charge: SOC ceiling.
    let i_ch = (cfg.soc_max - state.soc).max(0.0) * amp_seconds;
    let p_soc_min = -i_ch * (d + i_ch * rs) / 1000.0;
    // Charge: bus voltage ceiling.
    let p_v_min = if cfg.vdc_max > d { -cfg.vdc_max * (cfg.vdc_max - d) / (rs * 1000.0) } else { 0.0 };
    let min = p_soc_min.max(p_v_min).min(0.0);

    Ok(DcPowerBounds { min, max })
}
