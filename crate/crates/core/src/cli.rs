//! Command-line front end for the `gecs` binary.
//!
//! Exit codes: 0 success, 1 invalid input or configuration, 2 an
//! enumeration cap was exceeded, 3 I/O failure.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use rayon::prelude::*;
use serde_json::json;

use crate::capacity::count_feasible_allocations;
use crate::capacity::DEFAULT_ALLOCATION_CAP;
use crate::error::{Error, Result};
use crate::lpf::{lpf, round9};
use crate::netmodel::LinkId;
use crate::scenario::Model;
use crate::schedulers::PolicyKind;
use crate::sim::{run, stability_verdict_with, RunMetrics, MIN_VERDICT_HORIZON};

#[derive(Debug, Parser)]
#[command(name = "gecs", version, about = "Energy-constrained link scheduling: analysis and simulation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a scenario file and report what it describes.
    Validate { scenario: PathBuf },
    /// Local pooling factor of the scenario's conflict network (JSON).
    Lpf {
        scenario: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Capacity-region queries (JSON). Without --lambda or --direction,
    /// reports each link's largest admissible rate.
    Capacity {
        scenario: PathBuf,
        /// Membership test for this arrival vector.
        #[arg(long, value_delimiter = ',', conflicts_with = "direction")]
        lambda: Option<Vec<f64>>,
        /// Largest scale of this direction inside the region.
        #[arg(long, value_delimiter = ',')]
        direction: Option<Vec<f64>>,
        /// Require `lambda + margin` to be inside.
        #[arg(long, default_value_t = 0.0, requires = "lambda")]
        margin: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// One run; prints a single CSV row.
    Simulate {
        scenario: PathBuf,
        #[arg(long)]
        policy: Option<PolicyKind>,
        #[arg(long)]
        rho: f64,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        horizon: Option<u64>,
        /// Write a per-slot, per-link trace CSV here.
        #[arg(long)]
        trace: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Every (policy, load, seed) of the experiment grid; one CSV row each.
    Sweep {
        scenario: PathBuf,
        #[arg(long)]
        jobs: Option<usize>,
        #[arg(long)]
        horizon: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Seed-averaged GECS and GMW backlogs per load, with their ratio.
    Compare {
        scenario: PathBuf,
        #[arg(long)]
        jobs: Option<usize>,
        #[arg(long)]
        horizon: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

pub fn exit_code(err: &Error) -> i32 {
    if err.is_enumeration_limit() {
        return 2;
    }
    match err {
        Error::Io(_) => 3,
        Error::AtSlot { source, .. } => exit_code(source),
        _ => 1,
    }
}

/// Parses `args` (including the program name), runs the command and
/// returns the process exit code.
pub fn main_with<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 {
                stdout.write_all(text.as_bytes())
            } else {
                stderr.write_all(text.as_bytes())
            };
            return code;
        }
    };
    match execute(&cli.command, stdout, stderr) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            exit_code(&e)
        }
    }
}

fn emit(out: Option<&Path>, text: &str, stdout: &mut dyn Write) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, text)?,
        None => stdout.write_all(text.as_bytes())?,
    }
    Ok(())
}

fn execute(cmd: &Command, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<i32> {
    match cmd {
        Command::Validate { scenario } => validate(scenario, stdout, stderr),
        Command::Lpf { scenario, out } => {
            let model = Model::load(scenario)?;
            emit(out.as_deref(), &lpf_json(&model)?, stdout)?;
            Ok(0)
        }
        Command::Capacity {
            scenario,
            lambda,
            direction,
            margin,
            out,
        } => {
            let model = Model::load(scenario)?;
            let text = capacity_json(&model, lambda.as_deref(), direction.as_deref(), *margin)?;
            emit(out.as_deref(), &text, stdout)?;
            Ok(0)
        }
        Command::Simulate {
            scenario,
            policy,
            rho,
            seed,
            horizon,
            trace,
            out,
        } => {
            let model = Model::load(scenario)?;
            let policy = policy.unwrap_or(model.policies[0]);
            let seed = seed.unwrap_or(model.seeds[0]);
            let horizon = horizon.unwrap_or(model.horizon);
            let unit = model.unit_load_means()?;
            let mut s = model.scenario(&unit, policy, *rho, seed, horizon)?;
            s.log_slots = trace.is_some();
            let metrics = run(&s)?;
            if let Some(path) = trace {
                std::fs::write(path, slot_trace_csv(&metrics)?)?;
            }
            let row = SweepRow::new(&model, *rho, metrics)?;
            emit(out.as_deref(), &rows_csv(model.net.num_links(), &[row])?, stdout)?;
            Ok(0)
        }
        Command::Sweep {
            scenario,
            jobs,
            horizon,
            out,
        } => {
            let model = Model::load(scenario)?;
            let rows = sweep(&model, &model.policies, horizon.unwrap_or(model.horizon), jobs.or(model.jobs))?;
            emit(out.as_deref().or(model.out.as_deref()), &rows_csv(model.net.num_links(), &rows)?, stdout)?;
            Ok(0)
        }
        Command::Compare {
            scenario,
            jobs,
            horizon,
            out,
        } => {
            let model = Model::load(scenario)?;
            let rows = sweep(
                &model,
                &[PolicyKind::Gecs, PolicyKind::Gmw],
                horizon.unwrap_or(model.horizon),
                jobs.or(model.jobs),
            )?;
            emit(out.as_deref().or(model.out.as_deref()), &compare_csv(&model, &rows)?, stdout)?;
            Ok(0)
        }
    }
}

fn validate(path: &Path, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<i32> {
    let model = Model::load(path)?;
    let n = model.net.num_links();
    let all: Vec<LinkId> = model.net.links().collect();
    let mas = model.net.enumerate_maximal_activations(&all)?;
    writeln!(stdout, "ok: {} ({n} links, {} maximal activation vectors)", model.name, mas.len())?;
    match count_feasible_allocations(&model.net, &model.radios, DEFAULT_ALLOCATION_CAP) {
        Ok(count) => writeln!(stdout, "feasible power allocations: {count}")?,
        Err(e) if e.is_enumeration_limit() => writeln!(
            stderr,
            "warning: {e}; capacity queries and maxweight are unavailable for this scenario"
        )?,
        Err(e) => return Err(e),
    }
    for w in &model.warnings {
        writeln!(stderr, "warning: {w}")?;
    }
    Ok(0)
}

fn to_json(value: &serde_json::Value) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| Error::InvalidInput(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

fn indices(links: &[LinkId]) -> Vec<usize> {
    links.iter().map(|l| l.0).collect()
}

pub fn lpf_json(model: &Model) -> Result<String> {
    let r = lpf(&model.net)?;
    let w = &r.witness;
    to_json(&json!({
        "scenario": model.name,
        "links": model.net.num_links(),
        "sigma_star": r.sigma_star_rounded(),
        "argmin_subset": indices(&w.subset),
        "subgraphs_evaluated": r.subgraphs.len(),
        "activations": w.activations.iter().map(|a| indices(&a.active_links())).collect::<Vec<_>>(),
        "mu_weights": w.mu_weights.iter().copied().map(round9).collect::<Vec<_>>(),
        "nu_weights": w.nu_weights.iter().copied().map(round9).collect::<Vec<_>>(),
        "mu": w.mu.iter().copied().map(round9).collect::<Vec<_>>(),
        "nu": w.nu.iter().copied().map(round9).collect::<Vec<_>>(),
    }))
}

pub fn capacity_json(model: &Model, lambda: Option<&[f64]>, direction: Option<&[f64]>, margin: f64) -> Result<String> {
    let region = model.region()?;
    let value = match (lambda, direction) {
        (Some(lambda), _) => {
            let r = region.membership_with_margin(lambda, margin)?;
            json!({
                "scenario": model.name,
                "query": "membership",
                "lambda": lambda,
                "margin": margin,
                "verdict": r.verdict,
                "certificate": r.certificate,
            })
        }
        (None, Some(d)) => {
            let b = region.boundary_scale(d)?;
            json!({
                "scenario": model.name,
                "query": "boundary",
                "direction": d,
                "rho_star": b.rho,
                "boundary_point": d.iter().map(|x| x * b.rho).collect::<Vec<_>>(),
                "certificate": b.certificate,
            })
        }
        (None, None) => {
            let rates = model
                .net
                .links()
                .map(|l| region.max_admissible_rate(l))
                .collect::<Result<Vec<_>>>()?;
            json!({
                "scenario": model.name,
                "query": "max_admissible_rate",
                "rates": rates,
            })
        }
    };
    to_json(&value)
}

/// One simulated run, as written to CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub scenario: String,
    pub policy: PolicyKind,
    pub rho: f64,
    pub seed: u64,
    pub horizon: u64,
    pub avg_sum_q: f64,
    pub max_u: f64,
    /// `None` when the horizon is too short for a verdict.
    pub verdict: Option<crate::sim::Stability>,
    pub avg_power: Vec<f64>,
}

impl SweepRow {
    pub fn new(model: &Model, rho: f64, m: RunMetrics) -> Result<Self> {
        let verdict = if m.horizon >= MIN_VERDICT_HORIZON {
            Some(stability_verdict_with(&m, model.window, model.thresholds)?.verdict)
        } else {
            None
        };
        Ok(Self {
            scenario: model.name.clone(),
            policy: m.policy,
            rho,
            seed: m.seed,
            horizon: m.horizon,
            avg_sum_q: m.avg_sum_q,
            max_u: m.max_u_overall(),
            verdict,
            avg_power: m.avg_power,
        })
    }

    pub fn verdict_name(&self) -> &'static str {
        self.verdict.map_or("n/a", |v| v.name())
    }
}

/// Runs every (policy, load, seed) in that nesting order. Rows come back in
/// the same order whatever the number of jobs.
pub fn sweep(model: &Model, policies: &[PolicyKind], horizon: u64, jobs: Option<usize>) -> Result<Vec<SweepRow>> {
    let unit = model.unit_load_means()?;
    let mut grid = Vec::new();
    for &policy in policies {
        for &rho in &model.loads {
            for &seed in &model.seeds {
                grid.push((policy, rho, seed));
            }
        }
    }
    let task = |&(policy, rho, seed): &(PolicyKind, f64, u64)| -> Result<SweepRow> {
        let s = model.scenario(&unit, policy, rho, seed, horizon)?;
        SweepRow::new(model, rho, run(&s)?)
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(0))
        .build()
        .map_err(|e| Error::InvalidInput(e.to_string()))?;
    pool.install(|| grid.par_iter().map(task).collect())
}

fn csv_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::InvalidInput(format!("{other:?}")),
    }
}

fn finish_csv(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| Error::InvalidInput(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::InvalidInput(e.to_string()))
}

pub fn rows_csv(num_links: usize, rows: &[SweepRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<String> = ["scenario", "policy", "rho", "seed", "T", "avg_sum_q", "max_u", "verdict"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    header.extend((0..num_links).map(|l| format!("avg_p_{l}")));
    w.write_record(&header).map_err(csv_error)?;
    for r in rows {
        let mut rec = vec![
            r.scenario.clone(),
            r.policy.name().to_string(),
            r.rho.to_string(),
            r.seed.to_string(),
            r.horizon.to_string(),
            r.avg_sum_q.to_string(),
            r.max_u.to_string(),
            r.verdict_name().to_string(),
        ];
        rec.extend(r.avg_power.iter().map(f64::to_string));
        w.write_record(&rec).map_err(csv_error)?;
    }
    finish_csv(w)
}

/// Per-load seed means of `avg_sum_q` for GECS and GMW, and their ratio.
pub fn compare_csv(model: &Model, rows: &[SweepRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "scenario",
        "rho",
        "seeds",
        "gecs_avg_sum_q",
        "gmw_avg_sum_q",
        "ratio",
        "gecs_stable",
        "gmw_stable",
    ])
    .map_err(csv_error)?;
    for &rho in &model.loads {
        let pick = |p: PolicyKind| rows.iter().filter(move |r| r.policy == p && r.rho == rho);
        let mean = |p: PolicyKind| {
            let v: Vec<f64> = pick(p).map(|r| r.avg_sum_q).collect();
            v.iter().sum::<f64>() / v.len() as f64
        };
        let stable = |p: PolicyKind| {
            pick(p)
                .filter(|r| r.verdict == Some(crate::sim::Stability::Stable))
                .count()
        };
        let (g, m) = (mean(PolicyKind::Gecs), mean(PolicyKind::Gmw));
        w.write_record([
            model.name.clone(),
            rho.to_string(),
            model.seeds.len().to_string(),
            g.to_string(),
            m.to_string(),
            (g / m).to_string(),
            stable(PolicyKind::Gecs).to_string(),
            stable(PolicyKind::Gmw).to_string(),
        ])
        .map_err(csv_error)?;
    }
    finish_csv(w)
}

/// Long-format per-slot trace: one row per (slot, link).
pub fn slot_trace_csv(m: &RunMetrics) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["slot", "link", "q", "u", "arrival", "power", "rate", "served"])
        .map_err(csv_error)?;
    for rec in m.slots.iter().flatten() {
        for l in 0..rec.q.len() {
            w.write_record([
                rec.slot.to_string(),
                l.to_string(),
                rec.q[l].to_string(),
                rec.u[l].to_string(),
                rec.arrivals[l].to_string(),
                rec.power[l].to_string(),
                rec.rate[l].to_string(),
                rec.served[l].to_string(),
            ])
            .map_err(csv_error)?;
        }
    }
    finish_csv(w)
}
