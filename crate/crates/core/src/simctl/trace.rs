//! Measurement traces: CSV ingestion and synthetic generation.

use std::io::{Read, Write};
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::grid::GridSample;
use crate::simctl::SimError;
use crate::text::parse_number;

pub const TRACE_HEADER: [&str; 3] = ["timestamp_s", "freq_hz", "v_mv_kv"];

#[derive(Debug, Serialize, Deserialize)]
struct TraceRow {
    timestamp_s: f64,
    freq_hz: f64,
    v_mv_kv: f64,
}

/// Reads a `timestamp_s,freq_hz,v_mv_kv` trace, checking the header, sample
/// ranges and that timestamps increase.
pub fn read_trace<R: Read>(reader: R) -> Result<Vec<GridSample>, SimError> {
    let mut rdr = csv::Reader::from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if header != TRACE_HEADER {
        return Err(SimError::Trace(format!("expected header `{}`, found `{}`", TRACE_HEADER.join(","), header.join(","))));
    }
    let mut samples: Vec<GridSample> = Vec::new();
    for row in rdr.deserialize::<TraceRow>() {
        let row = row?;
        let sample = GridSample { timestamp: row.timestamp_s, freq: row.freq_hz, v_mv: row.v_mv_kv };
        sample.validate()?;
        if let Some(prev) = samples.last() {
            if !(sample.timestamp > prev.timestamp) {
                return Err(SimError::Trace(format!(
                    "timestamps must increase: {} follows {}",
                    sample.timestamp, prev.timestamp
                )));
            }
        }
        samples.push(sample);
    }
    Ok(samples)
}

pub fn write_trace<W: Write>(writer: W, samples: &[GridSample]) -> Result<(), SimError> {
    let mut wtr = csv::Writer::from_writer(writer);
    for s in samples {
        wtr.serialize(TraceRow { timestamp_s: s.timestamp, freq_hz: s.freq, v_mv_kv: s.v_mv })?;
    }
    if samples.is_empty() {
        wtr.write_record(TRACE_HEADER)?;
    }
    wtr.flush().map_err(|e| SimError::Io { path: "<trace>".into(), source: e })?;
    Ok(())
}

/// Independent Gaussian frequency and voltage samples, one per second.
/// Deterministic for a given seed.
pub fn generate_trace(sigma_f: f64, sigma_v: f64, mu_f: f64, mu_v: f64, n: usize, seed: u64) -> Vec<GridSample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let freq = Normal::new(mu_f, sigma_f).expect("sigma_f must be finite and non-negative");
    let volt = Normal::new(mu_v, sigma_v).expect("sigma_v must be finite and non-negative");
    (0..n)
        .map(|i| {
            let f = freq.sample(&mut rng);
            let v = volt.sample(&mut rng);
            GridSample { timestamp: i as f64, freq: f, v_mv: v }
        })
        .collect()
}

/// Parameters of the synthetic trace generator, written on the command line
/// or in scenario files as `gen:sigma_f=0.0178,sigma_v=0.0672,seed=3`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub sigma_f: f64,
    pub sigma_v: f64,
    pub mu_f: f64,
    pub mu_v: f64,
    pub seed: u64,
}

impl Default for GeneratorSpec {
    /// Statistics of the one-month PMU record used for droop sizing:
    /// 3.3 sigma_f = 58.8 mHz, sigma_V = 67.2 V, mu_V = 21.192 kV.
    fn default() -> Self {
        GeneratorSpec { sigma_f: 0.0588 / 3.3, sigma_v: 0.0672, mu_f: 50.0, mu_v: 21.192, seed: 0 }
    }
}

impl GeneratorSpec {
    pub fn generate(&self, n: usize) -> Vec<GridSample> {
        generate_trace(self.sigma_f, self.sigma_v, self.mu_f, self.mu_v, n, self.seed)
    }
}

impl FromStr for GeneratorSpec {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let body = s
            .strip_prefix("gen:")
            .ok_or_else(|| SimError::Trace(format!("generator spec must start with `gen:`, got `{s}`")))?;
        let mut spec = GeneratorSpec::default();
        for pair in body.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (key, value) = pair
                .split_once('=')
                .ok_or_else(|| SimError::Trace(format!("expected key=value in generator spec, got `{pair}`")))?;
            let num = || parse_number(value).map_err(|e| SimError::Trace(e.to_string()));
            match key.trim() {
                "sigma_f" => spec.sigma_f = num()?,
                "sigma_v" => spec.sigma_v = num()?,
                "mu_f" => spec.mu_f = num()?,
                "mu_v" => spec.mu_v = num()?,
                "seed" => {
                    spec.seed = value.trim().parse().map_err(|_| SimError::Trace(format!("invalid seed `{value}`")))?
                }
                other => return Err(SimError::Trace(format!("unknown generator key `{other}`"))),
            }
        }
        if !(spec.sigma_f >= 0.0 && spec.sigma_v >= 0.0) {
            return Err(SimError::Trace("generator sigmas must be non-negative".into()));
        }
        Ok(spec)
    }
}
