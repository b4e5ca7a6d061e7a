//! Scenario files: `key = value` lines, `#` comments.
//!
//! | key | unit | default |
//! |-----|------|---------|
//! | `name` | text | `scenario` |
//! | `alpha0` | kW/Hz | required |
//! | `beta0` | kvar/V | required |
//! | `duration` | s | 300 |
//! | `trace` | CSV path or `gen:...` | `gen:` (PMU statistics, seed 0) |
//! | `lambda_p`, `lambda_q` | - | 1, 1 |
//! | `c_shrink` | - | 7/9 |
//! | `soc_init` | - | 0.5 |
//! | `f_ref` | Hz | 50 |
//! | `v_ref` | kV (MV) | 21.192 |
//! | `c_max_ah` | Ah | 580 |
//! | `eta` | - | 0.97 |
//! | `soc_min`, `soc_max` | - | 0.1, 0.9 |
//! | `vdc_min`, `vdc_max` | V | 500, 800 |
//! | `delta_t` | s | 1 |
//! | `xfmr_v_mv_kv`, `xfmr_v_lv_kv` | kV | 21, 0.3 |
//! | `xfmr_s_kva` | kVA | 630 |
//! | `xfmr_u_k` | p.u. | 0.0628 |

use std::collections::HashSet;
use std::fs::File;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::battery::BatteryConfig;
use crate::grid::{DroopConfig, GridSample, TransformerParams};
use crate::optimizer::ControllerConfig;
use crate::simctl::trace::{read_trace, GeneratorSpec};
use crate::simctl::SimError;
use crate::text::parse_number;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TraceSource {
    File(PathBuf),
    Generator(GeneratorSpec),
}

impl TraceSource {
    /// Loads the file or generates `n` samples. Relative file paths resolve
    /// against `base`.
    pub fn load(&self, base: &Path, n: usize) -> Result<Vec<GridSample>, SimError> {
        match self {
            TraceSource::Generator(g) => Ok(g.generate(n)),
            TraceSource::File(path) => {
                let path = base.join(path);
                let file = File::open(&path).map_err(|source| SimError::Io { path: path.clone(), source })?;
                read_trace(file)
            }
        }
    }
}

impl FromStr for TraceSource {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.starts_with("gen:") {
            Ok(TraceSource::Generator(s.parse()?))
        } else if s.is_empty() {
            Err(SimError::Trace("empty trace source".into()))
        } else {
            Ok(TraceSource::File(PathBuf::from(s)))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub name: String,
    pub alpha0: f64,
    pub beta0: f64,
    /// s
    pub duration: f64,
    pub trace: TraceSource,
    pub lambda_p: f64,
    pub lambda_q: f64,
    pub c_shrink: f64,
    pub soc_init: f64,
}

/// A scenario with the full plant configuration it runs against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub spec: ScenarioSpec,
    pub controller: ControllerConfig,
}

impl ScenarioConfig {
    /// Number of control steps in the horizon.
    pub fn steps(&self) -> usize {
        (self.spec.duration / self.controller.battery.delta_t).round() as usize
    }

    /// Default plant, the given gains and a generated trace.
    pub fn with_gains(alpha0: f64, beta0: f64) -> Self {
        let src = format!("alpha0 = {alpha0}\nbeta0 = {beta0}\n");
        src.parse().expect("default configuration is valid")
    }
}

const KEYS: &[&str] = &[
    "name",
    "alpha0",
    "beta0",
    "duration",
    "trace",
    "lambda_p",
    "lambda_q",
    "c_shrink",
    "soc_init",
    "f_ref",
    "v_ref",
    "c_max_ah",
    "eta",
    "soc_min",
    "soc_max",
    "vdc_min",
    "vdc_max",
    "delta_t",
    "xfmr_v_mv_kv",
    "xfmr_v_lv_kv",
    "xfmr_s_kva",
    "xfmr_u_k",
];

impl FromStr for ScenarioConfig {
    type Err = SimError;

    fn from_str(source: &str) -> Result<Self, Self::Err> {
        let mut values: Vec<(&str, String, usize)> = Vec::new();
        let mut seen = HashSet::new();
        for (line, raw) in source.lines().enumerate() {
            let line = line + 1;
            let text = raw.split('#').next().unwrap_or("").trim();
            if text.is_empty() {
                continue;
            }
            let (key, value) = text
                .split_once('=')
                .ok_or_else(|| SimError::Config { line, message: format!("expected `key = value`, got `{text}`") })?;
            let key = key.trim();
            let key = *KEYS
                .iter()
                .find(|k| **k == key)
                .ok_or_else(|| SimError::Config { line, message: format!("unknown key `{key}`") })?;
            if !seen.insert(key) {
                return Err(SimError::Config { line, message: format!("duplicate key `{key}`") });
            }
            values.push((key, value.trim().to_string(), line));
        }

        let lookup = |key: &str| values.iter().find(|(k, _, _)| *k == key);
        let num = |key: &str, default: Option<f64>| -> Result<f64, SimError> {
            match lookup(key) {
                Some((_, v, line)) => parse_number(v).map_err(|e| SimError::Config { line: *line, message: e.to_string() }),
                None => default.ok_or_else(|| SimError::Config { line: 0, message: format!("missing required key `{key}`") }),
            }
        };

        let trace = match lookup("trace") {
            Some((_, v, line)) => v.parse().map_err(|e: SimError| SimError::Config { line: *line, message: e.to_string() })?,
            None => TraceSource::Generator(GeneratorSpec::default()),
        };
        let spec = ScenarioSpec {
            name: lookup("name").map(|(_, v, _)| v.clone()).unwrap_or_else(|| "scenario".into()),
            alpha0: num("alpha0", None)?,
            beta0: num("beta0", None)?,
            duration: num("duration", Some(300.0))?,
            trace,
            lambda_p: num("lambda_p", Some(1.0))?,
            lambda_q: num("lambda_q", Some(1.0))?,
            c_shrink: num("c_shrink", Some(7.0 / 9.0))?,
            soc_init: num("soc_init", Some(0.5))?,
        };
        let controller = ControllerConfig {
            droop: DroopConfig {
                alpha0: spec.alpha0,
                beta0: spec.beta0,
                f_ref: num("f_ref", Some(50.0))?,
                v_ref: num("v_ref", Some(21.192))?,
                lambda_p: spec.lambda_p,
                lambda_q: spec.lambda_q,
            },
            battery: BatteryConfig {
                c_max_ah: num("c_max_ah", Some(580.0))?,
                eta: num("eta", Some(0.97))?,
                soc_min: num("soc_min", Some(0.1))?,
                soc_max: num("soc_max", Some(0.9))?,
                vdc_min: num("vdc_min", Some(500.0))?,
                vdc_max: num("vdc_max", Some(800.0))?,
                delta_t: num("delta_t", Some(1.0))?,
            },
            transformer: TransformerParams::from_rating(
                num("xfmr_v_mv_kv", Some(21.0))?,
                num("xfmr_v_lv_kv", Some(0.3))?,
                num("xfmr_s_kva", Some(630.0))?,
                num("xfmr_u_k", Some(0.0628))?,
            )?,
            shrink: spec.c_shrink,
        };
        controller.validate()?;
        if !(spec.duration > 0.0) {
            return Err(SimError::Config { line: 0, message: "duration must be positive".into() });
        }
        if !(spec.soc_init >= controller.battery.soc_min && spec.soc_init <= controller.battery.soc_max) {
            return Err(SimError::Config { line: 0, message: "soc_init outside [soc_min, soc_max]".into() });
        }
        Ok(ScenarioConfig { spec, controller })
    }
}
