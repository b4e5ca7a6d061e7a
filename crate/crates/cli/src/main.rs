use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use bess_ctrl::battery::TtcParamTable;
use bess_ctrl::capability::CurveSet;
use bess_ctrl::simctl::{
    energy_metrics, read_records, run_scenario, write_records, write_trace, EnergyReport, GeneratorSpec, RunSummary,
    ScenarioConfig, TraceSource,
};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "bess-simctl", version, about = "Closed-loop simulation of the BESS set-point controller")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write records.csv and summary.json.
    Run {
        #[arg(long)]
        scenario: PathBuf,
        /// Overrides the scenario trace: a CSV path or `gen:key=val,...`.
        #[arg(long)]
        trace: Option<String>,
        /// Overrides the seed of a generated trace.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        curves: Option<PathBuf>,
        #[arg(long)]
        params: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write a synthetic Gaussian measurement trace.
    GenTrace {
        #[arg(long, default_value_t = GeneratorSpec::default().sigma_f)]
        sigma_f: f64,
        #[arg(long, default_value_t = GeneratorSpec::default().sigma_v)]
        sigma_v: f64,
        #[arg(long, default_value_t = 50.0)]
        mu_f: f64,
        #[arg(long, default_value_t = 21.192)]
        mu_v: f64,
        #[arg(long, default_value_t = 300)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Recompute regulating-energy metrics from a records CSV.
    Metrics {
        #[arg(long)]
        records: PathBuf,
        /// kW/Hz; inferred from the records when omitted.
        #[arg(long)]
        alpha0: Option<f64>,
        #[arg(long, default_value_t = 1.0)]
        delta_t: f64,
    },
}

fn main() {
    if let Err(e) = dispatch(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { scenario, trace, seed, curves, params, out } => {
            run(&scenario, trace.as_deref(), seed, curves.as_deref(), params.as_deref(), &out)
        }
        Command::GenTrace { sigma_f, sigma_v, mu_f, mu_v, n, seed, out } => {
            let spec = format!("gen:sigma_f={sigma_f},sigma_v={sigma_v},mu_f={mu_f},mu_v={mu_v},seed={seed}");
            let samples = spec.parse::<GeneratorSpec>()?.generate(n);
            match out {
                Some(path) => {
                    let file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
                    write_trace(BufWriter::new(file), &samples)?;
                }
                None => write_trace(io::stdout().lock(), &samples)?,
            }
            Ok(())
        }
        Command::Metrics { records, alpha0, delta_t } => {
            let file = File::open(&records).with_context(|| format!("opening {}", records.display()))?;
            let recs = read_records(file)?;
            let alpha0 = match alpha0 {
                Some(a) => a,
                None => infer_alpha0(&recs)?,
            };
            let report = energy_metrics(&recs, alpha0, delta_t)?;
            print_report(&report);
            Ok(())
        }
    }
}

fn infer_alpha0(records: &[bess_ctrl::optimizer::ControlRecord]) -> Result<f64> {
    match records.iter().find(|r| r.dfreq_hz.abs() > 1e-6) {
        Some(r) => Ok(r.p0_kw / r.dfreq_hz),
        None => bail!("no frequency deviation in the records; pass --alpha0"),
    }
}

fn load_or<T>(path: Option<&Path>, builtin: impl FnOnce() -> T, parse: impl FnOnce(&str) -> Result<T>) -> Result<T> {
    match path {
        None => Ok(builtin()),
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            parse(&text).with_context(|| format!("parsing {}", p.display()))
        }
    }
}

fn run(
    scenario: &Path,
    trace: Option<&str>,
    seed: Option<u64>,
    curves: Option<&Path>,
    params: Option<&Path>,
    out: &Path,
) -> Result<()> {
    let text = fs::read_to_string(scenario).with_context(|| format!("reading {}", scenario.display()))?;
    let mut cfg: ScenarioConfig = text.parse().with_context(|| format!("parsing {}", scenario.display()))?;
    let base = scenario.parent().unwrap_or(Path::new("."));
    let mut trace_base = base.to_path_buf();
    if let Some(t) = trace {
        cfg.spec.trace = t.parse()?;
        trace_base = PathBuf::from(".");
    }
    if let Some(seed) = seed {
        match &mut cfg.spec.trace {
            TraceSource::Generator(g) => g.seed = seed,
            TraceSource::File(_) => bail!("--seed only applies to generated traces"),
        }
    }
    let curves = load_or(curves, CurveSet::builtin, |s| Ok(s.parse::<CurveSet>()?))?;
    let params = load_or(params, TtcParamTable::builtin, |s| Ok(s.parse::<TtcParamTable>()?))?;
    let samples = cfg.spec.trace.load(&trace_base, cfg.steps())?;

    let started = Instant::now();
    let result = run_scenario(&cfg, &samples, &curves, &params)?;
    let elapsed = started.elapsed();

    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let records_path = out.join("records.csv");
    let file = File::create(&records_path).with_context(|| format!("creating {}", records_path.display()))?;
    write_records(BufWriter::new(file), &result.records)?;

    let summary = RunSummary {
        scenario: cfg.spec.clone(),
        report: result.report,
        final_soc: result.records.last().map_or(cfg.spec.soc_init, |r| r.soc),
    };
    let summary_path = out.join("summary.json");
    let mut file = BufWriter::new(File::create(&summary_path)?);
    serde_json::to_writer_pretty(&mut file, &summary)?;
    writeln!(file)?;
    file.flush()?;

    print_report(&result.report);
    let steps = result.records.len().max(1) as f64;
    eprintln!(
        "{} steps in {:.3} s ({:.3} ms/step)",
        result.records.len(),
        elapsed.as_secs_f64(),
        elapsed.as_secs_f64() * 1e3 / steps
    );
    Ok(())
}

fn print_report(r: &EnergyReport) {
    let pct = |x: Option<f64>| x.map_or("n/a".to_string(), |v| format!("{:.1}%", 100.0 * v));
    println!("steps          {}", r.steps);
    println!("clipped steps  {}", r.clipped_steps);
    println!("E_exp          {:.4} kWh", r.e_exp_kwh);
    println!("E*             {:.4} kWh ({})", r.e_star_kwh, pct(r.star_ratio));
    println!("E_0            {:.4} kWh ({})", r.e_0_kwh, pct(r.naive_ratio));
}
