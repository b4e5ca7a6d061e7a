use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::battery::TtcParamTable;
use crate::capability::CurveSet;
use crate::grid::GridSample;
use crate::optimizer::{ControlRecord, Controller};
use crate::simctl::{ScenarioConfig, ScenarioSpec, SimError};

/// Regulating energy over a run, kWh.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    /// Energy the droop law asks for: sum of dt |alpha0 df|.
    pub e_exp_kwh: f64,
    /// Energy delivered by the optimal set-points.
    pub e_star_kwh: f64,
    /// Energy a controller that drops infeasible set-points to 0 delivers.
    pub e_0_kwh: f64,
    /// `None` when nothing was expected.
    pub star_ratio: Option<f64>,
    pub naive_ratio: Option<f64>,
    pub steps: usize,
    pub clipped_steps: usize,
    /// Steps where |p*| > |p0|.
    pub exceeds_target_steps: usize,
}

/// Discrete regulating-energy sums over the records; `delta_t` in seconds.
pub fn energy_metrics(records: &[ControlRecord], alpha0: f64, delta_t: f64) -> Result<EnergyReport, SimError> {
    if records.is_empty() {
        return Err(SimError::NoRecords);
    }
    let kwh = |f: &dyn Fn(&ControlRecord) -> f64| records.iter().map(|r| delta_t * f(r).abs()).sum::<f64>() / 3600.0;
    let e_exp = kwh(&|r| alpha0 * r.dfreq_hz);
    let e_star = kwh(&|r| r.p_opt_kw);
    let e_0 = kwh(&|r| r.p_naive_kw);
    let ratio = |e: f64| (e_exp > 0.0).then(|| e / e_exp);
    Ok(EnergyReport {
        e_exp_kwh: e_exp,
        e_star_kwh: e_star,
        e_0_kwh: e_0,
        star_ratio: ratio(e_star),
        naive_ratio: ratio(e_0),
        steps: records.len(),
        clipped_steps: records.iter().filter(|r| r.clipped).count(),
        exceeds_target_steps: records.iter().filter(|r| r.exceeds_target).count(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioRun {
    pub records: Vec<ControlRecord>,
    pub report: EnergyReport,
}

/// JSON summary written next to the record CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub scenario: ScenarioSpec,
    pub report: EnergyReport,
    pub final_soc: f64,
}

/// Runs the control loop over the scenario horizon using the first
/// `cfg.steps()` samples of `trace`.
pub fn run_scenario(
    cfg: &ScenarioConfig,
    trace: &[GridSample],
    curves: &CurveSet,
    params: &TtcParamTable,
) -> Result<ScenarioRun, SimError> {
    let steps = cfg.steps();
    if trace.len() < steps {
        return Err(SimError::ShortTrace { needed: steps, got: trace.len() });
    }
    let mut controller = Controller::new(cfg.controller, curves.clone(), params.clone(), cfg.spec.soc_init)?;
    let records = trace[..steps]
        .iter()
        .map(|s| controller.step(s))
        .collect::<Result<Vec<_>, _>>()?;
    let report = energy_metrics(&records, cfg.spec.alpha0, cfg.controller.battery.delta_t)?;
    Ok(ScenarioRun { records, report })
}

pub fn write_records<W: Write>(writer: W, records: &[ControlRecord]) -> Result<(), SimError> {
    let mut wtr = csv::Writer::from_writer(writer);
    for r in records {
        wtr.serialize(r)?;
    }
    wtr.flush().map_err(|e| SimError::Io { path: "<records>".into(), source: e })?;
    Ok(())
}

pub fn read_records<R: Read>(reader: R) -> Result<Vec<ControlRecord>, SimError> {
    let mut rdr = csv::Reader::from_reader(reader);
    Ok(rdr.deserialize().collect::<Result<Vec<ControlRecord>, _>>()?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optimizer::StepStatus;
    use crate::simctl::generate_trace;

    fn record(dfreq: f64, p0: f64, p_opt: f64, p_naive: f64) -> ControlRecord {
        ControlRecord {
            timestamp_s: 0.0,
            freq_hz: 50.0 - dfreq,
            v_mv_kv: 21.192,
            dfreq_hz: dfreq,
            dvac_v: 0.0,
            p0_kw: p0,
            q0_kvar: 0.0,
            p_opt_kw: p_opt,
            q_opt_kvar: 0.0,
            p_dc_kw: p_opt,
            vdc_pred_v: 660.0,
            vac_pred_v: 302.7,
            p_ac_min_kw: -1000.0,
            p_ac_max_kw: 1000.0,
            curves: "dc600_ac300".into(),
            status: StepStatus::FeasibleUnchanged,
            clipped: p_opt != p0,
            switches: 0,
            solves: 1,
            p_naive_kw: p_naive,
            exceeds_target: false,
            alpha_star: None,
            beta_star: None,
            soc: 0.5,
        }
    }

    #[test]
    fn single_record_expected_energy() {
        let r = record(0.0588, 9003.0 * 0.0588, 9003.0 * 0.0588, 9003.0 * 0.0588);
        let rep = energy_metrics(&[r], 9003.0, 1.0).unwrap();
        assert!((rep.e_exp_kwh - 9003.0 * 0.0588 / 3600.0).abs() < 1e-12);
        assert!((rep.e_exp_kwh - 0.14705).abs() < 1e-5);
        assert_eq!(rep.e_star_kwh, rep.e_exp_kwh);
        assert_eq!(rep.star_ratio, Some(1.0));
    }

    #[test]
    fn zero_targets_zero_energy() {
        let rep = energy_metrics(&vec![record(0.0, 0.0, 0.0, 0.0); 4], 9003.0, 1.0).unwrap();
        assert_eq!((rep.e_exp_kwh, rep.e_star_kwh, rep.e_0_kwh), (0.0, 0.0, 0.0));
        assert_eq!(rep.star_ratio, None);
    }

    #[test]
    fn empty_records_error() {
        assert!(matches!(energy_metrics(&[], 1.0, 1.0), Err(SimError::NoRecords)));
    }

    #[test]
    fn constant_reference_trace_is_idle() {
        let cfg = ScenarioConfig::with_gains(9003.0, 8.39);
        let trace = generate_trace(0.0, 0.0, 50.0, 21.192, 300, 0);
        let run = run_scenario(&cfg, &trace, &CurveSet::builtin(), &TtcParamTable::builtin()).unwrap();
        assert_eq!((run.report.e_exp_kwh, run.report.e_star_kwh, run.report.e_0_kwh), (0.0, 0.0, 0.0));
    }

    #[test]
    fn short_trace_rejected() {
        let cfg = ScenarioConfig::with_gains(9003.0, 8.39);
        let trace = generate_trace(0.0, 0.0, 50.0, 21.192, 10, 0);
        let err = run_scenario(&cfg, &trace, &CurveSet::builtin(), &TtcParamTable::builtin()).unwrap_err();
        assert!(matches!(err, SimError::ShortTrace { needed: 300, got: 10 }));
    }

    #[test]
    fn all_feasible_energies_equal() {
        // Small deviations: every target sits inside the region.
        let cfg = ScenarioConfig::with_gains(9003.0, 8.39);
        let trace = generate_trace(0.01, 0.01, 50.0, 21.192, 300, 2);
        let run = run_scenario(&cfg, &trace, &CurveSet::builtin(), &TtcParamTable::builtin()).unwrap();
        assert_eq!(run.report.clipped_steps, 0);
        assert_eq!(run.report.e_exp_kwh, run.report.e_star_kwh);
        assert_eq!(run.report.e_star_kwh, run.report.e_0_kwh);
    }

    #[test]
    fn records_csv_round_trip() {
        let cfg = ScenarioConfig::with_gains(19810.0, 8.39);
        let trace = generate_trace(0.0178, 0.0672, 50.0, 21.192, 300, 7);
        let run = run_scenario(&cfg, &trace, &CurveSet::builtin(), &TtcParamTable::builtin()).unwrap();
        let mut buf = Vec::new();
        write_records(&mut buf, &run.records).unwrap();
        assert_eq!(read_records(buf.as_slice()).unwrap(), run.records);
    }
}
