//! One control period: droop targets, curve-assumption loop, projection and
//! battery state update.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::battery::{
    ac_from_dc, dc_from_ac, dc_power_bounds, soc_update, solve_vdc, ttc_step, BatteryConfig, BatteryError,
    TtcParamTable, TtcState,
};
use crate::capability::{AcRange, CurveError, CurveSelection, CurveSet, DcRange, FeasibleRegion};
use crate::grid::{droop_targets, optimal_droops, predict_vac, DroopConfig, GridError, GridSample, TransformerParams};
use crate::optimizer::projection::{project, Projection, ProjectionProblem};

/// Upper bound on (DC range, AC range) assumptions tried per step.
pub const MAX_ASSUMPTIONS: usize = DcRange::ALL.len() * AcRange::ALL.len();

#[derive(Debug, Error)]
pub enum StepError {
    #[error(transparent)]
    Battery(#[from] BatteryError),
    #[error(transparent)]
    Curve(#[from] CurveError),
    #[error(transparent)]
    Grid(#[from] GridError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControllerConfig {
    pub droop: DroopConfig,
    pub battery: BatteryConfig,
    pub transformer: TransformerParams,
    /// Capability scaling for the strings in service, in (0, 1].
    pub shrink: f64,
}

impl ControllerConfig {
    pub fn validate(&self) -> Result<(), StepError> {
        self.droop.validate()?;
        self.battery.validate()?;
        self.transformer.validate()?;
        if !(self.shrink > 0.0 && self.shrink <= 1.0) {
            return Err(CurveError::BadShrink(self.shrink).into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepStatus {
    FeasibleUnchanged,
    ClippedToBoundary,
    ConservativeClamp,
    ConvergedAfterSwitches(u32),
    Fallback,
}

impl fmt::Display for StepStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StepStatus::FeasibleUnchanged => f.write_str("feasible-unchanged"),
            StepStatus::ClippedToBoundary => f.write_str("clipped-to-boundary"),
            StepStatus::ConservativeClamp => f.write_str("conservative-clamp"),
            StepStatus::ConvergedAfterSwitches(k) => write!(f, "converged-after-{k}-switches"),
            StepStatus::Fallback => f.write_str("fallback"),
        }
    }
}

impl FromStr for StepStatus {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "feasible-unchanged" => StepStatus::FeasibleUnchanged,
            "clipped-to-boundary" => StepStatus::ClippedToBoundary,
            "conservative-clamp" => StepStatus::ConservativeClamp,
            "fallback" => StepStatus::Fallback,
            other => {
                let k = other
                    .strip_prefix("converged-after-")
                    .and_then(|r| r.strip_suffix("-switches"))
                    .and_then(|k| k.parse().ok())
                    .ok_or_else(|| format!("unknown status `{other}`"))?;
                StepStatus::ConvergedAfterSwitches(k)
            }
        })
    }
}

impl Serialize for StepStatus {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for StepStatus {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Audit trail of one control step. Flat so it maps onto one CSV row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlRecord {
    pub timestamp_s: f64,
    pub freq_hz: f64,
    pub v_mv_kv: f64,
    /// f_ref - f, Hz.
    pub dfreq_hz: f64,
    /// v_ref - v on the MV side, V.
    pub dvac_v: f64,
    pub p0_kw: f64,
    pub q0_kvar: f64,
    pub p_opt_kw: f64,
    pub q_opt_kvar: f64,
    pub p_dc_kw: f64,
    pub vdc_pred_v: f64,
    pub vac_pred_v: f64,
    pub p_ac_min_kw: f64,
    pub p_ac_max_kw: f64,
    pub curves: String,
    pub status: StepStatus,
    /// The set-point differs from the droop target.
    pub clipped: bool,
    pub switches: u32,
    /// Projection solves spent on this step.
    pub solves: u32,
    /// Active power a controller without the projection would deliver:
    /// the target if feasible, else 0.
    pub p_naive_kw: f64,
    /// |p*| exceeds |p0|; kept for energy-accounting audits.
    pub exceeds_target: bool,
    pub alpha_star: Option<f64>,
    pub beta_star: Option<f64>,
    /// SOC after the step.
    pub soc: f64,
}

/// True when the predicted voltages fall in the assumed ranges.
pub fn verify_consistency(vdc: f64, vac: f64, dc: DcRange, ac: AcRange) -> bool {
    dc.contains(vdc) && ac.contains(vac)
}

/// Assumption order: the ranges predicted at the droop target first, then
/// the remaining combinations with DC outermost.
fn assumption_order(start: Option<(DcRange, AcRange)>) -> Vec<(DcRange, AcRange)> {
    let mut order: Vec<_> = start.into_iter().collect();
    for dc in DcRange::ALL {
        for ac in AcRange::ALL {
            if start != Some((dc, ac)) {
                order.push((dc, ac));
            }
        }
    }
    order
}

struct Attempt {
    region: FeasibleRegion,
    selection: CurveSelection,
    projection: Projection,
    p_dc: f64,
    vdc: f64,
    vac: f64,
}

/// Runs one control period and returns the record together with the
/// advanced battery state.
pub fn solve_step(
    sample: &GridSample,
    state: &TtcState,
    cfg: &ControllerConfig,
    curves: &CurveSet,
    params: &TtcParamTable,
) -> Result<(ControlRecord, TtcState), StepError> {
    sample.validate()?;
    let eta = cfg.battery.eta;
    let (p0, q0) = droop_targets(sample, &cfg.droop);
    let band = params.select(state.soc)?;

    let dc_bounds = dc_power_bounds(state, band, &cfg.battery)?;
    let p_bounds = (ac_from_dc(dc_bounds.min, eta), ac_from_dc(dc_bounds.max, eta));

    let attempt = |dc: DcRange, ac: AcRange| -> Result<Attempt, StepError> {
        let selection = CurveSelection::for_ranges(dc, ac);
        let region = curves.region(&selection, cfg.shrink)?;
        let projection = project(&ProjectionProblem {
            target: (p0, q0),
            weights: (cfg.droop.lambda_p, cfg.droop.lambda_q),
            region: &region,
            p_bounds,
        });
        let p_dc = dc_from_ac(projection.p, eta);
        let vdc = solve_vdc(p_dc, state, band)?;
        let vac = predict_vac(sample, projection.p, projection.q, &cfg.transformer);
        Ok(Attempt { region, selection, projection, p_dc, vdc, vac })
    };

    let guess_vdc = solve_vdc(dc_from_ac(p0.clamp(p_bounds.0, p_bounds.1), eta), state, band)?;
    let guess_vac = predict_vac(sample, p0, q0, &cfg.transformer);
    let start = DcRange::classify(guess_vdc).zip(AcRange::classify(guess_vac));

    let mut accepted = None;
    let mut last_vac = guess_vac;
    let mut solves = 0u32;
    for (dc, ac) in assumption_order(start) {
        let a = attempt(dc, ac)?;
        solves += 1;
        last_vac = a.vac;
        if verify_consistency(a.vdc, a.vac, dc, ac) {
            accepted = Some((a, solves - 1));
            break;
        }
    }

    let (a, status) = match accepted {
        Some((a, switches)) => {
            let status = if a.selection.clamped {
                StepStatus::ConservativeClamp
            } else if switches > 0 {
                StepStatus::ConvergedAfterSwitches(switches)
            } else if a.projection.moved {
                StepStatus::ClippedToBoundary
            } else {
                StepStatus::FeasibleUnchanged
            };
            (a, status)
        }
        None => {
            let ac = AcRange::classify(last_vac).unwrap_or(AcRange::Low);
            solves += 1;
            (attempt(DcRange::Low, ac)?, StepStatus::Fallback)
        }
    };
    let switches = solves - 1;

    let (p_opt, q_opt) = (a.projection.p, a.projection.q);
    let soc = soc_update(state.soc, a.p_dc, a.vdc, &cfg.battery)?;
    let mut next = ttc_step(state, a.p_dc, a.vdc, band, &cfg.battery, cfg.battery.delta_t)?;
    next.soc = soc;

    let target_ok = p0 >= p_bounds.0 && p0 <= p_bounds.1 && a.region.contains(p0, q0);
    let dfreq = cfg.droop.freq_deviation(sample);
    let dvac = cfg.droop.voltage_deviation(sample);
    let droops = optimal_droops(p_opt, q_opt, dfreq, dvac);

    let record = ControlRecord {
        timestamp_s: sample.timestamp,
        freq_hz: sample.freq,
        v_mv_kv: sample.v_mv,
        dfreq_hz: dfreq,
        dvac_v: dvac,
        p0_kw: p0,
        q0_kvar: q0,
        p_opt_kw: p_opt,
        q_opt_kvar: q_opt,
        p_dc_kw: a.p_dc,
        vdc_pred_v: a.vdc,
        vac_pred_v: a.vac,
        p_ac_min_kw: p_bounds.0,
        p_ac_max_kw: p_bounds.1,
        curves: a.region.label(),
        status,
        clipped: a.projection.moved,
        switches,
        solves,
        p_naive_kw: if target_ok { p0 } else { 0.0 },
        exceeds_target: p_opt.abs() > p0.abs() + 1e-9,
        alpha_star: droops.alpha,
        beta_star: droops.beta,
        soc,
    };
    Ok((record, next))
}

/// A controller instance owning its battery state between steps.
#[derive(Debug, Clone)]
pub struct Controller {
    cfg: ControllerConfig,
    curves: CurveSet,
    params: TtcParamTable,
    state: TtcState,
}

impl Controller {
    pub fn new(cfg: ControllerConfig, curves: CurveSet, params: TtcParamTable, soc_init: f64) -> Result<Self, StepError> {
        cfg.validate()?;
        if !(soc_init >= cfg.battery.soc_min && soc_init <= cfg.battery.soc_max) {
            return Err(BatteryError::SocLimit { soc: soc_init, min: cfg.battery.soc_min, max: cfg.battery.soc_max }.into());
        }
        Ok(Controller { cfg, curves, params, state: TtcState::rested(soc_init) })
    }

    pub fn step(&mut self, sample: &GridSample) -> Result<ControlRecord, StepError> {
        let (record, next) = solve_step(sample, &self.state, &self.cfg, &self.curves, &self.params)?;
        self.state = next;
        Ok(record)
    }

    pub fn state(&self) -> &TtcState {
        &self.state
    }

    pub fn config(&self) -> &ControllerConfig {
        &self.cfg
    }

    pub fn curves(&self) -> &CurveSet {
        &self.curves
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> ControllerConfig {
        ControllerConfig {
            droop: DroopConfig { alpha0: 9003.0, beta0: 8.39, f_ref: 50.0, v_ref: 21.192, lambda_p: 1.0, lambda_q: 1.0 },
            battery: BatteryConfig {
                c_max_ah: 580.0,
                eta: 0.97,
                soc_min: 0.1,
                soc_max: 0.9,
                vdc_min: 500.0,
                vdc_max: 800.0,
                delta_t: 1.0,
            },
            transformer: TransformerParams::from_rating(21.0, 0.3, 630.0, 0.0628).unwrap(),
            shrink: 7.0 / 9.0,
        }
    }

    fn run(sample: GridSample, state: TtcState, cfg: &ControllerConfig) -> (ControlRecord, TtcState) {
        solve_step(&sample, &state, cfg, &CurveSet::builtin(), &TtcParamTable::builtin()).unwrap()
    }

    #[test]
    fn idle_at_references() {
        let (rec, next) = run(GridSample { timestamp: 0.0, freq: 50.0, v_mv: 21.192 }, TtcState::rested(0.5), &cfg());
        assert_eq!((rec.p0_kw, rec.q0_kvar), (0.0, 0.0));
        assert_eq!((rec.p_opt_kw, rec.q_opt_kvar), (0.0, 0.0));
        assert_eq!(rec.status, StepStatus::FeasibleUnchanged);
        assert_eq!(next.soc, 0.5);
        assert!((rec.vdc_pred_v - 664.05).abs() < 1e-9);
    }

    #[test]
    fn large_under_voltage_clips_q_only() {
        // Small frequency deviation, deep under-voltage: Q beyond the cap.
        let sample = GridSample { timestamp: 3.0, freq: 49.995, v_mv: 21.05 };
        let (rec, _) = run(sample, TtcState::rested(0.5), &cfg());
        assert!(rec.q0_kvar > 1000.0);
        assert_eq!(rec.status, StepStatus::ClippedToBoundary);
        assert!(rec.clipped);
        assert!((rec.p_opt_kw - rec.p0_kw).abs() < 1e-6, "{rec:?}");
        assert!(rec.q_opt_kvar < rec.q0_kvar);
        assert_eq!(rec.p_naive_kw, 0.0);
        let region = CurveSet::builtin().region(&CurveSelection::for_ranges(DcRange::High, AcRange::Nominal), 7.0 / 9.0).unwrap();
        assert!(region.contains(rec.p_opt_kw, rec.q_opt_kvar));
        assert!(!region.contains(rec.p_opt_kw, rec.q_opt_kvar + 1e-3));
    }

    #[test]
    fn consistency_intervals() {
        assert!(verify_consistency(600.0, 300.0, DcRange::Mid, AcRange::Nominal));
        assert!(!verify_consistency(600.0, 300.0, DcRange::High, AcRange::Nominal));
        assert!(verify_consistency(650.0, 330.0, DcRange::High, AcRange::Nominal));
        assert!(!verify_consistency(650.0, 330.0, DcRange::High, AcRange::High));
        assert!(!verify_consistency(500.0, 300.0, DcRange::Low, AcRange::Nominal));
    }

    #[test]
    fn assumption_order_visits_everything_once() {
        let order = assumption_order(Some((DcRange::High, AcRange::Nominal)));
        assert_eq!(order.len(), MAX_ASSUMPTIONS);
        assert_eq!(order[0], (DcRange::High, AcRange::Nominal));
        let mut dedup = order.clone();
        dedup.dedup();
        assert_eq!(dedup.len(), order.len());
        assert_eq!(assumption_order(None).len(), MAX_ASSUMPTIONS);
    }

    #[test]
    fn low_ac_voltage_is_clamped() {
        // 18.5 kV on the MV side is about 264 V on the LV side.
        let sample = GridSample { timestamp: 0.0, freq: 50.01, v_mv: 18.5 };
        let (rec, _) = run(sample, TtcState::rested(0.5), &cfg());
        assert_eq!(rec.status, StepStatus::ConservativeClamp);
        assert!(rec.curves.contains("dc500_ac270"));
    }

    #[test]
    fn high_ac_voltage_adds_curve() {
        let sample = GridSample { timestamp: 0.0, freq: 50.0, v_mv: 23.5 };
        let (rec, _) = run(sample, TtcState::rested(0.5), &cfg());
        assert!(rec.curves.contains("dc500_ac330"), "{}", rec.curves);
        assert!(rec.vac_pred_v > 330.0);
    }

    #[test]
    fn soc_floor_blocks_discharge() {
        let c = cfg();
        let sample = GridSample { timestamp: 0.0, freq: 49.95, v_mv: 21.192 };
        let (rec, next) = run(sample, TtcState::rested(c.battery.soc_min), &c);
        assert!(rec.p0_kw > 0.0);
        assert_eq!(rec.p_opt_kw, 0.0);
        assert!(next.soc >= c.battery.soc_min - 1e-12);
    }

    #[test]
    fn status_round_trips_through_text() {
        for s in [
            StepStatus::FeasibleUnchanged,
            StepStatus::ClippedToBoundary,
            StepStatus::ConservativeClamp,
            StepStatus::ConvergedAfterSwitches(3),
            StepStatus::Fallback,
        ] {
            assert_eq!(s.to_string().parse::<StepStatus>().unwrap(), s);
        }
        assert!("nope".parse::<StepStatus>().is_err());
    }

    #[test]
    fn controller_rejects_bad_start() {
        assert!(Controller::new(cfg(), CurveSet::builtin(), TtcParamTable::builtin(), 0.95).is_err());
        let mut bad = cfg();
        bad.shrink = 0.0;
        assert!(Controller::new(bad, CurveSet::builtin(), TtcParamTable::builtin(), 0.5).is_err());
    }
}
