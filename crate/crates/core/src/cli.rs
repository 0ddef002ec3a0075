//! Command-line driver: single runs, α sweeps and the loss comparison.
//!
//! Settings come from flags, optionally layered over a flat `key = value`
//! file given with `--config`; flags win. All CSV output is deterministic:
//! numbers use 12 significant digits, rows follow grid order, and lines end
//! in LF.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use thiserror::Error;

use crate::analytics::{default_alpha_grid, linear_grid, per_round_closed_form};
use crate::ecp::{
    apply_loss_model, max_entangled_noon, run_protocol, BranchKind, Protocol, ProtocolConfig,
    Schedule, DEFAULT_ROUNDS,
};
use crate::optics::DEFAULT_THETA;

pub const EXIT_USAGE: i32 = 2;
pub const EXIT_IO: i32 = 3;

pub const SWEEP_HEADER: &str = "alpha,alpha_sq,k_max,p_total,p_total_oracle,delta";
pub const COMPARE_HEADER: &str = "alpha,eta,p_total_ecp1,p_total_ecp2,advantage";
pub const RUN_HEADER: &str =
    "round,t_k,p_conditional,p_unconditional,p_oracle,delta,p_unconditional_lossy,fidelity_min";

const DEFAULT_N: u32 = 2;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("i/o: {0}")]
    Io(String),
    #[error(transparent)]
    Model(#[from] crate::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Model(crate::Error::Parameter(_)) => EXIT_USAGE,
            CliError::Io(_) => EXIT_IO,
            CliError::Model(_) => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "noon-ecp", version, about = "Single-photon-assisted NOON-state concentration simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate one multi-round schedule and check it against the closed form.
    Run(Flags),
    /// Total success probability over a grid of α (CSV).
    Sweep(Flags),
    /// ECP1 vs ECP2 totals under transmission loss (CSV).
    CompareLoss(Flags),
}

#[derive(Debug, Clone, Default, Args)]
pub struct Flags {
    /// ecp1 or ecp2
    #[arg(long)]
    pub protocol: Option<String>,
    /// Initial |α|², strictly between 0 and 1
    #[arg(long = "alpha-sq")]
    pub alpha_sq: Option<f64>,
    /// Photons in the NOON state
    #[arg(long)]
    pub n: Option<u32>,
    /// Number of concentration rounds K
    #[arg(long)]
    pub rounds: Option<u32>,
    /// Per-photon cross-Kerr phase in radians
    #[arg(long)]
    pub theta: Option<f64>,
    /// Survival probability of one nonlocal transmission
    #[arg(long)]
    pub eta: Option<f64>,
    /// α grid as start:stop:steps (steps + 1 points, empty string for none)
    #[arg(long)]
    pub grid: Option<String>,
    /// CSV destination (stdout when absent)
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Flat key = value file with the same keys as the flags
    #[arg(long)]
    pub config: Option<PathBuf>,
}

const KEYS: [&str; 8] = ["protocol", "alpha-sq", "n", "rounds", "theta", "eta", "grid", "out"];

/// Parses a flat key-value config file. Keys may use `-` or `_` and an
/// optional leading `--`; `#` starts a comment.
pub fn parse_config_file(text: &str) -> Result<BTreeMap<String, String>, CliError> {
    let mut map = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .or_else(|| line.split_once(':'))
            .ok_or_else(|| CliError::Usage(format!("config line {}: expected key = value", lineno + 1)))?;
        let key = key.trim().trim_start_matches("--").replace('_', "-");
        if !KEYS.contains(&key.as_str()) {
            return Err(CliError::Usage(format!("config line {}: unknown key `{key}`", lineno + 1)));
        }
        map.insert(key, value.trim().trim_matches('"').to_owned());
    }
    Ok(map)
}

fn parse_value<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, CliError> {
    value
        .parse()
        .map_err(|_| CliError::Usage(format!("invalid value `{value}` for {key}")))
}

impl Flags {
    /// Fills unset flags from the `--config` file.
    pub fn merged(&self) -> Result<Flags, CliError> {
        let Some(path) = &self.config else {
            return Ok(self.clone());
        };
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("cannot read config {}: {e}", path.display())))?;
        let file = parse_config_file(&text)?;
        let get = |k: &str| file.get(k).map(String::as_str);
        let mut f = self.clone();
        if f.protocol.is_none() {
            f.protocol = get("protocol").map(str::to_owned);
        }
        if f.alpha_sq.is_none() {
            f.alpha_sq = get("alpha-sq").map(|v| parse_value("alpha-sq", v)).transpose()?;
        }
        if f.n.is_none() {
            f.n = get("n").map(|v| parse_value("n", v)).transpose()?;
        }
        if f.rounds.is_none() {
            f.rounds = get("rounds").map(|v| parse_value("rounds", v)).transpose()?;
        }
        if f.theta.is_none() {
            f.theta = get("theta").map(|v| parse_value("theta", v)).transpose()?;
        }
        if f.eta.is_none() {
            f.eta = get("eta").map(|v| parse_value("eta", v)).transpose()?;
        }
        if f.grid.is_none() {
            f.grid = get("grid").map(str::to_owned);
        }
        if f.out.is_none() {
            f.out = get("out").map(PathBuf::from);
        }
        Ok(f)
    }

    fn protocol(&self) -> Result<Protocol, CliError> {
        match &self.protocol {
            None => Ok(Protocol::Ecp2),
            Some(p) => p.parse().map_err(|_| CliError::Usage(format!("unknown protocol `{p}`"))),
        }
    }

    fn grid(&self) -> Result<Vec<f64>, CliError> {
        match &self.grid {
            None => Ok(default_alpha_grid()),
            Some(spec) => parse_grid(spec),
        }
    }

    fn config_at(&self, protocol: Protocol, alpha: f64) -> Result<ProtocolConfig, CliError> {
        ProtocolConfig::new(
            protocol,
            alpha,
            self.n.unwrap_or(DEFAULT_N),
            self.rounds.unwrap_or(DEFAULT_ROUNDS),
            self.theta.unwrap_or(DEFAULT_THETA),
            self.eta.unwrap_or(1.0),
        )
        .map_err(|e| CliError::Usage(e.to_string()))
    }
}

/// `start:stop:count` with `count` evenly spaced α values, both ends
/// included. Every value must lie strictly inside (0, 1).
pub fn parse_grid(spec: &str) -> Result<Vec<f64>, CliError> {
    if spec.trim().is_empty() {
        return Ok(Vec::new());
    }
    let parts: Vec<&str> = spec.split(':').collect();
    let [start, stop, steps] = parts.as_slice() else {
        return Err(CliError::Usage(format!("grid `{spec}` is not start:stop:steps")));
    };
    let start: f64 = parse_value("grid start", start.trim())?;
    let stop: f64 = parse_value("grid stop", stop.trim())?;
    let steps: usize = parse_value("grid steps", steps.trim())?;
    if steps == 0 && start != stop {
        return Err(CliError::Usage(format!("grid `{spec}` has zero steps between distinct endpoints")));
    }
    let grid = linear_grid(start, stop, steps + 1);
    if let Some(bad) = grid.iter().find(|a| !(**a > 0.0 && **a < 1.0)) {
        return Err(CliError::Usage(format!("grid value α = {bad} outside (0, 1)")));
    }
    Ok(grid)
}

/// `printf("%.12g")`.
pub fn format_sig(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{x:.11e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..12).contains(&exp) {
        let mantissa = trim_fraction(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", exp.abs())
    } else {
        trim_fraction(&format!("{x:.*}", (11 - exp) as usize)).to_owned()
    }
}

fn trim_fraction(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn reject(flag_set: bool, flag: &str, command: &str) -> Result<(), CliError> {
    if flag_set {
        Err(CliError::Usage(format!("{flag} is not accepted by `{command}`")))
    } else {
        Ok(())
    }
}

/// Per-round line of a [`RunRecord`].
#[derive(Debug, Clone, PartialEq)]
pub struct RoundReport {
    pub round: u32,
    pub t_k: Option<f64>,
    pub p_conditional: f64,
    pub p_unconditional: f64,
    pub p_oracle: f64,
    pub p_unconditional_lossy: f64,
    /// Worst success-branch fidelity over detector outcomes.
    pub fidelity_min: Option<f64>,
}

impl RoundReport {
    pub fn delta(&self) -> f64 {
        (self.p_unconditional - self.p_oracle).abs()
    }
}

/// Everything `run` reports for one configuration.
#[derive(Debug, Clone)]
pub struct RunRecord {
    pub config: ProtocolConfig,
    pub schedule: Schedule,
    pub lossy: Schedule,
    pub rounds: Vec<RoundReport>,
    pub p_total_oracle: f64,
    pub wall_time: Duration,
}

impl RunRecord {
    pub fn compute(config: &ProtocolConfig) -> Result<RunRecord, CliError> {
        let started = Instant::now();
        let run = run_protocol(config)?;
        let lossy = apply_loss_model(&run.schedule, config);
        let oracle = per_round_closed_form(config.alpha(), config.max_rounds)?;
        let target = max_entangled_noon(config.n_photons)?;

        let mut rounds = Vec::with_capacity(run.rounds.len());
        for ((rec, outcome), lossy_rec) in run
            .schedule
            .per_round
            .iter()
            .zip(&run.rounds)
            .zip(&lossy.per_round)
        {
            let fidelity_min = outcome
                .heralds
                .iter()
                .filter(|h| h.kind == BranchKind::Success)
                .map(|h| h.corrected.fidelity(&target))
                .collect::<Result<Vec<_>, _>>()?
                .into_iter()
                .reduce(f64::min);
            rounds.push(RoundReport {
                round: rec.round,
                t_k: rec.t_k,
                p_conditional: rec.p_conditional,
                p_unconditional: rec.p_unconditional,
                p_oracle: oracle[(rec.round - 1) as usize],
                p_unconditional_lossy: lossy_rec.p_unconditional,
                fidelity_min,
            });
        }
        Ok(RunRecord {
            config: config.clone(),
            p_total_oracle: oracle.iter().sum(),
            schedule: run.schedule,
            lossy,
            rounds,
            wall_time: started.elapsed(),
        })
    }

    pub fn max_delta(&self) -> f64 {
        self.rounds.iter().map(RoundReport::delta).fold(0.0, f64::max)
    }

    /// Per-round CSV; identical for identical configs.
    pub fn to_csv(&self) -> String {
        let mut s = String::from(RUN_HEADER);
        s.push('\n');
        for r in &self.rounds {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{}",
                r.round,
                r.t_k.map(format_sig).unwrap_or_default(),
                format_sig(r.p_conditional),
                format_sig(r.p_unconditional),
                format_sig(r.p_oracle),
                format_sig(r.delta()),
                format_sig(r.p_unconditional_lossy),
                r.fidelity_min.map(format_sig).unwrap_or_default(),
            );
        }
        s
    }

    pub fn summary(&self) -> String {
        let c = &self.config;
        let mut s = String::new();
        let _ = writeln!(
            s,
            "protocol={} alpha_sq={} N={} K={} theta={} eta={}",
            c.protocol,
            format_sig(c.alpha() * c.alpha()),
            c.n_photons,
            c.max_rounds,
            format_sig(c.theta),
            format_sig(c.loss_eta)
        );
        let _ = writeln!(s, "{:>5}  {:<17}  {:<17}  {:<17}  {:<17}  fidelity", "round", "t_k", "P_cond", "P_K", "oracle");
        for r in &self.rounds {
            let _ = writeln!(
                s,
                "{:>5}  {:<17}  {:<17}  {:<17}  {:<17}  {}",
                r.round,
                r.t_k.map(format_sig).unwrap_or_else(|| "-".into()),
                format_sig(r.p_conditional),
                format_sig(r.p_unconditional),
                format_sig(r.p_oracle),
                r.fidelity_min.map(format_sig).unwrap_or_else(|| "-".into()),
            );
        }
        let _ = writeln!(s, "p_total={}", format_sig(self.schedule.p_total));
        let _ = writeln!(s, "p_total_oracle={}", format_sig(self.p_total_oracle));
        if c.loss_eta < 1.0 {
            let _ = writeln!(s, "p_total_with_loss={}", format_sig(self.lossy.p_total));
        }
        let _ = writeln!(s, "max_delta={}", format_sig(self.max_delta()));
        let _ = writeln!(s, "wall_time_ms={:.3}", self.wall_time.as_secs_f64() * 1e3);
        s
    }
}

pub fn cmd_run(flags: &Flags) -> Result<RunRecord, CliError> {
    reject(flags.grid.is_some(), "--grid", "run")?;
    let alpha_sq = flags
        .alpha_sq
        .ok_or_else(|| CliError::Usage("run needs --alpha-sq".into()))?;
    if !(alpha_sq > 0.0 && alpha_sq < 1.0) {
        return Err(CliError::Usage(format!("--alpha-sq {alpha_sq} outside (0, 1)")));
    }
    let config = flags.config_at(flags.protocol()?, alpha_sq.sqrt())?;
    RunRecord::compute(&config)
}

/// One sweep row: simulated and closed-form P_total at α.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub alpha: f64,
    pub k_max: u32,
    pub p_total: f64,
    pub p_total_oracle: f64,
}

impl SweepRow {
    pub fn delta(&self) -> f64 {
        (self.p_total - self.p_total_oracle).abs()
    }
}

pub fn cmd_sweep(flags: &Flags) -> Result<Vec<SweepRow>, CliError> {
    reject(flags.alpha_sq.is_some(), "--alpha-sq", "sweep")?;
    let protocol = flags.protocol()?;
    let grid = flags.grid()?;
    // validates the non-α settings once, even for an empty grid
    flags.config_at(protocol, 0.5)?;
    grid.par_iter()
        .map(|&alpha| {
            let config = flags.config_at(protocol, alpha)?;
            let run = run_protocol(&config)?;
            let oracle: f64 = per_round_closed_form(alpha, config.max_rounds)?.iter().sum();
            Ok(SweepRow {
                alpha,
                k_max: config.max_rounds,
                p_total: run.schedule.p_total,
                p_total_oracle: oracle,
            })
        })
        .collect()
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut s = String::from(SWEEP_HEADER);
    s.push('\n');
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            format_sig(r.alpha),
            format_sig(r.alpha * r.alpha),
            r.k_max,
            format_sig(r.p_total),
            format_sig(r.p_total_oracle),
            format_sig(r.delta())
        );
    }
    s
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossRow {
    pub alpha: f64,
    pub eta: f64,
    pub p_total_ecp1: f64,
    pub p_total_ecp2: f64,
}

impl LossRow {
    pub fn advantage(&self) -> f64 {
        self.p_total_ecp2 - self.p_total_ecp1
    }
}

pub fn cmd_compare_loss(flags: &Flags) -> Result<Vec<LossRow>, CliError> {
    reject(flags.alpha_sq.is_some(), "--alpha-sq", "compare-loss")?;
    reject(flags.protocol.is_some(), "--protocol", "compare-loss")?;
    let grid = flags.grid()?;
    flags.config_at(Protocol::Ecp1, 0.5)?;
    grid.par_iter()
        .map(|&alpha| {
            let mut totals = [0.0; 2];
            for (slot, protocol) in [Protocol::Ecp1, Protocol::Ecp2].into_iter().enumerate() {
                let config = flags.config_at(protocol, alpha)?;
                let schedule = run_protocol(&config)?.schedule;
                totals[slot] = apply_loss_model(&schedule, &config).p_total;
            }
            Ok(LossRow {
                alpha,
                eta: flags.eta.unwrap_or(1.0),
                p_total_ecp1: totals[0],
                p_total_ecp2: totals[1],
            })
        })
        .collect()
}

pub fn compare_csv(rows: &[LossRow]) -> String {
    let mut s = String::from(COMPARE_HEADER);
    s.push('\n');
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            format_sig(r.alpha),
            format_sig(r.eta),
            format_sig(r.p_total_ecp1),
            format_sig(r.p_total_ecp2),
            format_sig(r.advantage())
        );
    }
    s
}

fn emit(csv: &str, out: Option<&Path>, stdout: &mut dyn Write) -> Result<(), CliError> {
    match out {
        Some(path) => fs::write(path, csv)
            .map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display()))),
        None => stdout
            .write_all(csv.as_bytes())
            .map_err(|e| CliError::Io(e.to_string())),
    }
}

/// Runs a parsed command, writing human-readable text or CSV to `stdout`.
pub fn execute(cli: &Cli, stdout: &mut dyn Write) -> Result<(), CliError> {
    match &cli.command {
        Command::Run(flags) => {
            let flags = flags.merged()?;
            let record = cmd_run(&flags)?;
            stdout
                .write_all(record.summary().as_bytes())
                .map_err(|e| CliError::Io(e.to_string()))?;
            if let Some(path) = &flags.out {
                emit(&record.to_csv(), Some(path), stdout)?;
            }
        }
        Command::Sweep(flags) => {
            let flags = flags.merged()?;
            let rows = cmd_sweep(&flags)?;
            emit(&sweep_csv(&rows), flags.out.as_deref(), stdout)?;
        }
        Command::CompareLoss(flags) => {
            let flags = flags.merged()?;
            let rows = cmd_compare_loss(&flags)?;
            emit(&compare_csv(&rows), flags.out.as_deref(), stdout)?;
        }
    }
    Ok(())
}
