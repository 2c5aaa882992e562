//! Experiment configuration, seeded orchestration and CSV output.
//!
//! Each kind of experiment produces one [`ResultRow`] per trial. Trial `t`
//! runs on its own generator seeded with `mix_seed(seed, t)`, so rows do not
//! depend on scheduling.
//!
//! Column use by kind:
//! - `tomo`: estimator errors against a random rank-`r` state; no verdict.
//! - `attack-demo`: as `tomo`, with `statistic` the naive estimator's HS
//!   error, `threshold` half of it, and `accept` when the chosen estimator
//!   beats that threshold.
//! - `test`: Haar-basis identity test of a state at trace norm `epsilon` from
//!   `I/d`; errors are the true distances.
//! - `moments`: Monte Carlo `E<u|M|u>^k` against the exact value; `statistic`
//!   is the z-score, `threshold` is 5, `trace_error` the absolute gap and
//!   `hs_error` the standard error.
//! - `lb`: one perturbed state (`trace_error`, `hs_error` of `sigma_z - I/d`),
//!   `statistic = critical_epsilon(gamma, d, d)`, `threshold` the mean
//!   per-copy TV the coupling adversary needs, `accept` when that is at most
//!   `2 gamma`.

use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, ValueEnum};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::adversary::{
    corruption_budget, replace_attack, spam_attack, state_swap_attack, CouplingPlan, OutcomeRecord,
};
use crate::error::{Error, Result};
use crate::estimate::{
    filter_robust_covariance, naive_tomography, rank_truncated_tomography, subset_oracle,
    RobustConfig, SUBSET_ORACLE_MAX_SAMPLES,
};
use crate::haar::{haar_trace_moment, sample_haar_state, MAX_MOMENT_ORDER};
use crate::linalg::{hs_norm, trace_norm, DensityMatrix, HermitianMatrix, PureState};
use crate::lowerbound::{
    coupling_budget_diagnostic, critical_epsilon, sample_perturbed_state, DEFAULT_C_CONST,
};
use crate::measure::{basis_distribution, UniformPovmSample, UniformPovmSampler};
use crate::qtest::{
    coupling_toward, no_attack, quantum_identity_test, replace_with_rarest, TestVerdict,
    TesterConfig,
};
use crate::rng::{child_rng, mix_seed, SimRng};

pub const CSV_HEADER: [&str; 17] = [
    "trial",
    "kind",
    "d",
    "r",
    "n",
    "gamma",
    "epsilon",
    "estimator",
    "attack",
    "trace_error",
    "hs_error",
    "accept",
    "statistic",
    "threshold",
    "budget_used",
    "wall_time_ms",
    "derived_seed",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    Tomo,
    Test,
    AttackDemo,
    Moments,
    Lb,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
pub enum EstimatorKind {
    #[default]
    #[serde(rename = "naive")]
    Naive,
    #[serde(rename = "naive+rank")]
    #[value(name = "naive+rank")]
    NaiveRank,
    #[serde(rename = "filter")]
    Filter,
    #[serde(rename = "subset-oracle")]
    SubsetOracle,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum AttackKind {
    #[default]
    None,
    Replace,
    Coupling,
    Spam,
    StateSwap,
}

fn value_name<T: ValueEnum>(v: &T) -> String {
    v.to_possible_value()
        .expect("no skipped variants")
        .get_name()
        .to_string()
}

impl Kind {
    pub fn name(&self) -> String {
        value_name(self)
    }
}

impl EstimatorKind {
    pub fn name(&self) -> String {
        value_name(self)
    }
}

impl AttackKind {
    pub fn name(&self) -> String {
        value_name(self)
    }
}

fn parse_value<T: ValueEnum>(s: &str, what: &str) -> Result<T> {
    T::from_str(s, false).map_err(|_| Error::Config(format!("unknown {what} '{s}'")))
}

/// A fully specified experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub kind: Kind,
    #[serde(rename = "dim")]
    pub d: usize,
    #[serde(rename = "rank")]
    pub r: usize,
    #[serde(rename = "copies")]
    pub n: usize,
    pub gamma: f64,
    pub epsilon: f64,
    pub trials: usize,
    pub seed: u64,
    pub estimator: EstimatorKind,
    pub attack: AttackKind,
    #[serde(rename = "out")]
    pub output_path: Option<PathBuf>,
    /// Perturbation length for `lb`; defaults to `d^2 / 2`.
    pub ell: Option<usize>,
    /// Moment order for `moments`.
    pub order: usize,
    /// Write measured wall times into the CSV instead of zeros.
    pub timing: bool,
}

impl ExperimentConfig {
    /// Defaults: `d = 4, r = 1, n = 10000, gamma = epsilon = 0, trials = 1,
    /// seed = 0`, naive estimator, no attack, `order = 2`.
    pub fn new(kind: Kind) -> Self {
        ExperimentConfig {
            kind,
            d: 4,
            r: 1,
            n: 10_000,
            gamma: 0.0,
            epsilon: 0.0,
            trials: 1,
            seed: 0,
            estimator: EstimatorKind::Naive,
            attack: AttackKind::None,
            output_path: None,
            ell: None,
            order: 2,
            timing: false,
        }
    }

    pub fn ell(&self) -> usize {
        self.ell.unwrap_or(self.d * self.d / 2)
    }

    /// Checks every field before any work is done.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.d < 2 {
            return bad(format!("dim must be at least 2, got {}", self.d));
        }
        if !(0.0..0.5).contains(&self.gamma) {
            return bad(format!("gamma must lie in [0, 0.5), got {}", self.gamma));
        }
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return bad(format!("epsilon must be nonnegative, got {}", self.epsilon));
        }
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if self.n == 0 {
            return bad("copies must be at least 1".into());
        }
        if self.r == 0 || self.r > self.d {
            return bad(format!("rank must lie in 1..={}, got {}", self.d, self.r));
        }
        let allowed: &[AttackKind] = match self.kind {
            Kind::Tomo | Kind::AttackDemo => {
                &[AttackKind::None, AttackKind::Replace, AttackKind::StateSwap]
            }
            Kind::Test => &[
                AttackKind::None,
                AttackKind::Replace,
                AttackKind::Coupling,
                AttackKind::Spam,
            ],
            Kind::Moments | Kind::Lb => &[AttackKind::None],
        };
        if !allowed.contains(&self.attack) {
            return bad(format!(
                "attack '{}' is not available for kind '{}'",
                self.attack.name(),
                self.kind.name()
            ));
        }
        if matches!(self.kind, Kind::Tomo | Kind::AttackDemo) {
            match self.estimator {
                EstimatorKind::SubsetOracle if self.n > SUBSET_ORACLE_MAX_SAMPLES => {
                    return bad(format!(
                        "subset-oracle handles at most {SUBSET_ORACLE_MAX_SAMPLES} copies, got {}",
                        self.n
                    ));
                }
                EstimatorKind::Filter if self.gamma > 0.0 => {
                    let need = (10.0 / (self.gamma * self.gamma)).ceil() as usize;
                    if self.n < need {
                        return bad(format!(
                            "filter needs at least 10/gamma^2 = {need} copies, got {}",
                            self.n
                        ));
                    }
                }
                _ => {}
            }
        }
        if self.kind == Kind::Test {
            let max = 2.0 * (1.0 - 1.0 / self.d as f64);
            if self.epsilon > max {
                return bad(format!("epsilon must be at most {max} for dim {}", self.d));
            }
        }
        if self.kind == Kind::Moments && !(1..=MAX_MOMENT_ORDER).contains(&self.order) {
            return bad(format!(
                "order must lie in 1..={MAX_MOMENT_ORDER}, got {}",
                self.order
            ));
        }
        if self.kind == Kind::Lb {
            let ell = self.ell();
            let lo = (self.d * self.d).div_ceil(2);
            if ell < lo || ell > self.d * self.d - 1 {
                return bad(format!(
                    "ell must lie in [{lo}, {}], got {ell}",
                    self.d * self.d - 1
                ));
            }
        }
        Ok(())
    }
}

/// Every field optional; used for the JSON file and for flag overrides.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartialConfig {
    pub kind: Option<String>,
    #[serde(alias = "d")]
    pub dim: Option<usize>,
    #[serde(alias = "r")]
    pub rank: Option<usize>,
    #[serde(alias = "n")]
    pub copies: Option<usize>,
    pub gamma: Option<f64>,
    pub epsilon: Option<f64>,
    pub trials: Option<usize>,
    pub seed: Option<u64>,
    pub estimator: Option<String>,
    pub attack: Option<String>,
    #[serde(alias = "output_path")]
    pub out: Option<PathBuf>,
    pub ell: Option<usize>,
    pub order: Option<usize>,
    pub timing: Option<bool>,
}

impl PartialConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("config file: {e}")))
    }

    /// Fields set in `other` win.
    pub fn overlay(self, other: PartialConfig) -> PartialConfig {
        PartialConfig {
            kind: other.kind.or(self.kind),
            dim: other.dim.or(self.dim),
            rank: other.rank.or(self.rank),
            copies: other.copies.or(self.copies),
            gamma: other.gamma.or(self.gamma),
            epsilon: other.epsilon.or(self.epsilon),
            trials: other.trials.or(self.trials),
            seed: other.seed.or(self.seed),
            estimator: other.estimator.or(self.estimator),
            attack: other.attack.or(self.attack),
            out: other.out.or(self.out),
            ell: other.ell.or(self.ell),
            order: other.order.or(self.order),
            timing: other.timing.or(self.timing),
        }
    }

    /// Fills defaults and validates.
    pub fn resolve(self) -> Result<ExperimentConfig> {
        let kind_name = self
            .kind
            .ok_or_else(|| Error::Config("missing required --kind".into()))?;
        let mut c = ExperimentConfig::new(parse_value(&kind_name, "kind")?);
        if let Some(v) = self.dim {
            c.d = v;
        }
        if let Some(v) = self.rank {
            c.r = v;
        }
        if let Some(v) = self.copies {
            c.n = v;
        }
        if let Some(v) = self.gamma {
            c.gamma = v;
        }
        if let Some(v) = self.epsilon {
            c.epsilon = v;
        }
        if let Some(v) = self.trials {
            c.trials = v;
        }
        if let Some(v) = self.seed {
            c.seed = v;
        }
        if let Some(v) = self.estimator {
            c.estimator = parse_value(&v, "estimator")?;
        }
        if let Some(v) = self.attack {
            c.attack = parse_value(&v, "attack")?;
        }
        c.output_path = self.out;
        c.ell = self.ell;
        if let Some(v) = self.order {
            c.order = v;
        }
        c.timing = self.timing.unwrap_or(false);
        c.validate()?;
        Ok(c)
    }
}

/// Command-line interface.
#[derive(Parser, Debug, Clone)]
#[command(
    name = "qtomo",
    version,
    about = "Seeded quantum tomography and testing experiments"
)]
pub struct Cli {
    /// Experiment kind.
    #[arg(value_enum)]
    pub kind: Option<Kind>,
    /// Experiment kind, as a flag.
    #[arg(long = "kind", value_enum, conflicts_with = "kind", id = "kind_flag")]
    pub kind_flag: Option<Kind>,
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long)]
    pub rank: Option<usize>,
    #[arg(long)]
    pub copies: Option<usize>,
    #[arg(long, allow_negative_numbers = true)]
    pub gamma: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum)]
    pub estimator: Option<EstimatorKind>,
    #[arg(long, value_enum)]
    pub attack: Option<AttackKind>,
    /// CSV output path; a `.meta.json` side file is written next to it.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// JSON config file; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Perturbation length for `lb` (default `d^2/2`).
    #[arg(long)]
    pub ell: Option<usize>,
    /// Moment order for `moments` (default 2).
    #[arg(long)]
    pub order: Option<usize>,
    /// Record wall times in the CSV (breaks byte-identical reruns).
    #[arg(long)]
    pub timing: bool,
}

impl Cli {
    pub fn into_config(self) -> Result<ExperimentConfig> {
        let base = match &self.config {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| Error::Config(format!("cannot read {}: {e}", p.display())))?;
                PartialConfig::from_json(&text)?
            }
            None => PartialConfig::default(),
        };
        let flags = PartialConfig {
            kind: self.kind.or(self.kind_flag).map(|k| k.name()),
            dim: self.dim,
            rank: self.rank,
            copies: self.copies,
            gamma: self.gamma,
            epsilon: self.epsilon,
            trials: self.trials,
            seed: self.seed,
            estimator: self.estimator.map(|e| e.name()),
            attack: self.attack.map(|a| a.name()),
            out: self.out,
            ell: self.ell,
            order: self.order,
            timing: self.timing.then_some(true),
        };
        base.overlay(flags).resolve()
    }
}

/// Parses `argv` (without the program name) into a validated config.
pub fn parse_cli<I, S>(argv: I) -> Result<ExperimentConfig>
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let args =
        std::iter::once(std::ffi::OsString::from("qtomo")).chain(argv.into_iter().map(Into::into));
    Cli::try_parse_from(args)
        .map_err(|e| Error::Config(e.to_string()))?
        .into_config()
}

/// One CSV row.
#[derive(Clone, Debug, PartialEq)]
pub struct ResultRow {
    pub trial: usize,
    pub kind: Kind,
    pub d: usize,
    pub r: usize,
    pub n: usize,
    pub gamma: f64,
    pub epsilon: f64,
    pub estimator: EstimatorKind,
    pub attack: AttackKind,
    pub trace_error: Option<f64>,
    pub hs_error: Option<f64>,
    pub accept: Option<bool>,
    pub statistic: Option<f64>,
    pub threshold: Option<f64>,
    pub budget_used: usize,
    pub wall_time_ms: f64,
    pub derived_seed: u64,
}

/// 17 significant digits.
pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

fn opt_float(x: Option<f64>) -> String {
    x.map(format_float).unwrap_or_default()
}

fn parse_float(s: &str) -> Result<f64> {
    s.parse()
        .map_err(|_| Error::Config(format!("bad float '{s}'")))
}

fn parse_opt_float(s: &str) -> Result<Option<f64>> {
    if s.is_empty() {
        Ok(None)
    } else {
        parse_float(s).map(Some)
    }
}

fn parse_int<T: std::str::FromStr>(s: &str) -> Result<T> {
    s.parse()
        .map_err(|_| Error::Config(format!("bad integer '{s}'")))
}

impl ResultRow {
    pub fn to_record(&self) -> Vec<String> {
        vec![
            self.trial.to_string(),
            self.kind.name(),
            self.d.to_string(),
            self.r.to_string(),
            self.n.to_string(),
            format_float(self.gamma),
            format_float(self.epsilon),
            self.estimator.name(),
            self.attack.name(),
            opt_float(self.trace_error),
            opt_float(self.hs_error),
            self.accept.map(|a| a.to_string()).unwrap_or_default(),
            opt_float(self.statistic),
            opt_float(self.threshold),
            self.budget_used.to_string(),
            format_float(self.wall_time_ms),
            self.derived_seed.to_string(),
        ]
    }

    pub fn from_record(rec: &csv::StringRecord) -> Result<Self> {
        if rec.len() != CSV_HEADER.len() {
            return Err(Error::Config(format!(
                "expected {} columns, got {}",
                CSV_HEADER.len(),
                rec.len()
            )));
        }
        let f = |i: usize| &rec[i];
        let accept = match f(11) {
            "" => None,
            "true" => Some(true),
            "false" => Some(false),
            other => return Err(Error::Config(format!("bad accept flag '{other}'"))),
        };
        Ok(ResultRow {
            trial: parse_int(f(0))?,
            kind: parse_value(f(1), "kind")?,
            d: parse_int(f(2))?,
            r: parse_int(f(3))?,
            n: parse_int(f(4))?,
            gamma: parse_float(f(5))?,
            epsilon: parse_float(f(6))?,
            estimator: parse_value(f(7), "estimator")?,
            attack: parse_value(f(8), "attack")?,
            trace_error: parse_opt_float(f(9))?,
            hs_error: parse_opt_float(f(10))?,
            accept,
            statistic: parse_opt_float(f(12))?,
            threshold: parse_opt_float(f(13))?,
            budget_used: parse_int(f(14))?,
            wall_time_ms: parse_float(f(15))?,
            derived_seed: parse_int(f(16))?,
        })
    }
}

pub fn write_csv<W: Write>(rows: &[ResultRow], w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    let io = |e: csv::Error| Error::Io(e.to_string());
    wr.write_record(CSV_HEADER).map_err(io)?;
    for r in rows {
        wr.write_record(r.to_record()).map_err(io)?;
    }
    wr.flush()?;
    Ok(())
}

pub fn read_csv<R: Read>(r: R) -> Result<Vec<ResultRow>> {
    let mut rd = csv::Reader::from_reader(r);
    let header = rd.headers().map_err(|e| Error::Io(e.to_string()))?.clone();
    if header.iter().ne(CSV_HEADER.iter().copied()) {
        return Err(Error::Config("unexpected CSV header".into()));
    }
    rd.records()
        .map(|rec| ResultRow::from_record(&rec.map_err(|e| Error::Io(e.to_string()))?))
        .collect()
}

/// Side-file contents written next to the CSV.
#[derive(Clone, Debug, Serialize)]
pub struct RunMetadata<'a> {
    pub config: &'a ExperimentConfig,
    pub version: &'static str,
    pub csv_header: Vec<&'static str>,
    pub trial_wall_time_ms: Vec<f64>,
}

/// Writes `<path>` and `<path>.meta.json`.
pub fn write_outputs(
    cfg: &ExperimentConfig,
    rows: &[ResultRow],
    timings: &[f64],
    path: &Path,
) -> Result<()> {
    write_csv(rows, std::fs::File::create(path)?)?;
    let meta = RunMetadata {
        config: cfg,
        version: env!("CARGO_PKG_VERSION"),
        csv_header: CSV_HEADER.to_vec(),
        trial_wall_time_ms: timings.to_vec(),
    };
    let mut name = path.as_os_str().to_owned();
    name.push(".meta.json");
    let text = serde_json::to_string_pretty(&meta).map_err(|e| Error::Io(e.to_string()))?;
    std::fs::write(PathBuf::from(name), text + "\n")?;
    Ok(())
}

#[derive(Default)]
struct TrialOut {
    trace_error: Option<f64>,
    hs_error: Option<f64>,
    accept: Option<bool>,
    statistic: Option<f64>,
    threshold: Option<f64>,
    budget_used: usize,
}

/// Runs every trial and returns rows sorted by trial index, together with the
/// measured wall time of each trial.
pub fn run_experiment_timed(cfg: &ExperimentConfig) -> Result<(Vec<ResultRow>, Vec<f64>)> {
    cfg.validate()?;
    let results: Vec<(ResultRow, f64)> = (0..cfg.trials)
        .into_par_iter()
        .map(|t| {
            let derived_seed = mix_seed(cfg.seed, t as u64);
            let mut rng = child_rng(cfg.seed, t as u64);
            let start = Instant::now();
            let out = run_trial(cfg, &mut rng)?;
            let ms = start.elapsed().as_secs_f64() * 1e3;
            let budget = corruption_budget(cfg.gamma, cfg.n);
            if out.budget_used > budget {
                return Err(Error::BudgetExceeded {
                    used: out.budget_used,
                    budget,
                });
            }
            let row = ResultRow {
                trial: t,
                kind: cfg.kind,
                d: cfg.d,
                r: cfg.r,
                n: cfg.n,
                gamma: cfg.gamma,
                epsilon: cfg.epsilon,
                estimator: cfg.estimator,
                attack: cfg.attack,
                trace_error: out.trace_error,
                hs_error: out.hs_error,
                accept: out.accept,
                statistic: out.statistic,
                threshold: out.threshold,
                budget_used: out.budget_used,
                wall_time_ms: if cfg.timing { ms } else { 0.0 },
                derived_seed,
            };
            Ok((row, ms))
        })
        .collect::<Result<_>>()?;
    let mut results = results;
    results.sort_by_key(|(r, _)| r.trial);
    Ok(results.into_iter().unzip())
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    run_experiment_timed(cfg).map(|(rows, _)| rows)
}

fn run_trial(cfg: &ExperimentConfig, rng: &mut SimRng) -> Result<TrialOut> {
    match cfg.kind {
        Kind::Tomo => tomo_trial(cfg, rng),
        Kind::AttackDemo => attack_demo_trial(cfg, rng),
        Kind::Test => test_trial(cfg, rng),
        Kind::Moments => moments_trial(cfg, rng),
        Kind::Lb => lb_trial(cfg, rng),
    }
}

fn corrupted_samples(
    cfg: &ExperimentConfig,
    rho: &DensityMatrix,
    rng: &mut SimRng,
) -> Result<OutcomeRecord<UniformPovmSample>> {
    let samples = UniformPovmSampler::new(rho).sample_n(cfg.n, rng);
    let clean = OutcomeRecord::new(samples);
    let zero = PureState::basis(cfg.d, 0)?;
    let out = match cfg.attack {
        AttackKind::None => clean.clone(),
        AttackKind::Replace => {
            replace_attack(&clean, cfg.gamma, &UniformPovmSample::new(zero), rng)?
        }
        AttackKind::StateSwap => {
            let target = UniformPovmSampler::new(&DensityMatrix::pure(&zero));
            state_swap_attack(&clean, cfg.gamma, &target, rng)?
        }
        other => {
            return Err(Error::Config(format!(
                "attack '{}' needs labelled outcomes",
                other.name()
            )));
        }
    };
    out.audit(&clean, cfg.gamma)?;
    Ok(out)
}

fn estimate(
    kind: EstimatorKind,
    samples: &[UniformPovmSample],
    cfg: &ExperimentConfig,
    rng: &mut SimRng,
) -> Result<HermitianMatrix> {
    match kind {
        EstimatorKind::Naive => naive_tomography(samples),
        EstimatorKind::NaiveRank => rank_truncated_tomography(samples, cfg.r),
        EstimatorKind::Filter => {
            let rc = RobustConfig::new(cfg.gamma)?;
            Ok(filter_robust_covariance(samples, &rc, rng)?
                .covariance
                .to_state_estimate())
        }
        EstimatorKind::SubsetOracle => Ok(subset_oracle(samples, cfg.gamma)?
            .covariance
            .to_state_estimate()),
    }
}

fn errors(est: &HermitianMatrix, rho: &DensityMatrix) -> (f64, f64) {
    let diff = est - rho.as_hermitian();
    (trace_norm(&diff), hs_norm(&diff))
}

fn tomo_trial(cfg: &ExperimentConfig, rng: &mut SimRng) -> Result<TrialOut> {
    let rho = DensityMatrix::random(cfg.d, cfg.r, rng)?;
    let rec = corrupted_samples(cfg, &rho, rng)?;
    let est = estimate(cfg.estimator, rec.entries(), cfg, rng)?;
    let (t, h) = errors(&est, &rho);
    Ok(TrialOut {
        trace_error: Some(t),
        hs_error: Some(h),
        budget_used: rec.budget_used(),
        ..Default::default()
    })
}

fn attack_demo_trial(cfg: &ExperimentConfig, rng: &mut SimRng) -> Result<TrialOut> {
    let rho = DensityMatrix::random(cfg.d, cfg.r, rng)?;
    let rec = corrupted_samples(cfg, &rho, rng)?;
    let (_, naive_hs) = errors(&naive_tomography(rec.entries())?, &rho);
    let est = estimate(cfg.estimator, rec.entries(), cfg, rng)?;
    let (t, h) = errors(&est, &rho);
    let threshold = 0.5 * naive_hs;
    Ok(TrialOut {
        trace_error: Some(t),
        hs_error: Some(h),
        accept: Some(h <= threshold),
        statistic: Some(naive_hs),
        threshold: Some(threshold),
        budget_used: rec.budget_used(),
    })
}

/// `(1 - a) I/d + a |psi><psi|` at trace norm `eps` from `I/d`.
pub fn state_at_trace_norm(psi: &PureState, eps: f64) -> Result<DensityMatrix> {
    let d = psi.dim() as f64;
    DensityMatrix::mixed_with_pure(psi, eps / (2.0 * (1.0 - 1.0 / d)))
}

fn test_trial(cfg: &ExperimentConfig, rng: &mut SimRng) -> Result<TrialOut> {
    let d = cfg.d;
    let sigma = DensityMatrix::maximally_mixed(d)?;
    let rho = state_at_trace_norm(&sample_haar_state(d, rng), cfg.epsilon)?;
    let far = DensityMatrix::pure(&sample_haar_state(d, rng));
    let tc = TesterConfig::new(cfg.gamma, cfg.epsilon)?;
    let v: TestVerdict = match cfg.attack {
        AttackKind::None => quantum_identity_test(&rho, &sigma, cfg.n, &tc, no_attack, rng)?,
        AttackKind::Replace => {
            quantum_identity_test(&rho, &sigma, cfg.n, &tc, replace_with_rarest, rng)?
        }
        AttackKind::Coupling => {
            quantum_identity_test(&rho, &sigma, cfg.n, &tc, coupling_toward(far), rng)?
        }
        AttackKind::Spam => {
            let lam = cfg.gamma / 2.0;
            let noisy = DensityMatrix::new(
                &(rho.as_hermitian() * (1.0 - lam)) + &(far.as_hermitian() * lam),
            )?;
            let hook = |rec: &OutcomeRecord<usize>,
                        ctx: &crate::qtest::AttackContext<'_>,
                        r: &mut SimRng| {
                let t = basis_distribution(&noisy, ctx.unitary)?;
                let plan = CouplingPlan::repeated(ctx.source, &t, rec.len())?;
                Ok(spam_attack(rec, &plan, ctx.gamma, r)?.record)
            };
            quantum_identity_test(&rho, &sigma, cfg.n, &tc, hook, rng)?
        }
        AttackKind::StateSwap => {
            return Err(Error::Config(
                "state-swap needs uniform-POVM outcomes".into(),
            ));
        }
    };
    let (t, h) = errors(rho.as_hermitian(), &sigma);
    Ok(TrialOut {
        trace_error: Some(t),
        hs_error: Some(h),
        accept: Some(v.accept),
        statistic: Some(v.statistic),
        threshold: Some(v.threshold),
        budget_used: v.budget_used,
    })
}

fn moments_trial(cfg: &ExperimentConfig, rng: &mut SimRng) -> Result<TrialOut> {
    let a = HermitianMatrix::random(cfg.d, rng);
    let m = &a * (1.0 / hs_norm(&a));
    let exact = haar_trace_moment(&m, cfg.order)?;
    let seed: u64 = rand::Rng::random(rng);
    let k = cfg.order as i32;
    let vals: Vec<f64> = (0..cfg.n)
        .into_par_iter()
        .map(|i| {
            let mut r = child_rng(seed, i as u64);
            m.quadratic_form(&sample_haar_state(cfg.d, &mut r)).powi(k)
        })
        .collect();
    let (mean, se) = crate::stats::mean_and_std_error(&vals);
    let gap = (mean - exact).abs();
    let z = if se > 0.0 {
        gap / se
    } else if gap == 0.0 {
        0.0
    } else {
        f64::INFINITY
    };
    Ok(TrialOut {
        trace_error: Some(gap),
        hs_error: Some(se),
        accept: Some(z <= 5.0),
        statistic: Some(z),
        threshold: Some(5.0),
        budget_used: 0,
    })
}

fn lb_trial(cfg: &ExperimentConfig, rng: &mut SimRng) -> Result<TrialOut> {
    let d = cfg.d;
    let ell = cfg.ell();
    let crit = critical_epsilon(cfg.gamma, d, d as f64)?;
    let eps = if cfg.epsilon > 0.0 {
        cfg.epsilon
    } else {
        crit / DEFAULT_C_CONST
    };
    let st = sample_perturbed_state(d, ell, eps, DEFAULT_C_CONST, rng)?;
    let delta = st.clipped_delta();
    let diag = coupling_budget_diagnostic(d, cfg.n, cfg.gamma, ell, DEFAULT_C_CONST, rng)?;
    Ok(TrialOut {
        trace_error: Some(trace_norm(&delta)),
        hs_error: Some(hs_norm(&delta)),
        accept: Some(diag.mean_tv <= 2.0 * cfg.gamma),
        statistic: Some(crit),
        threshold: Some(diag.mean_tv),
        budget_used: diag.budget_used,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cli_examples() {
        let c = parse_cli([
            "tomo", "--dim", "4", "--copies", "10000", "--gamma", "0.05", "--seed", "7",
        ])
        .unwrap();
        assert_eq!(
            (c.kind, c.d, c.n, c.gamma, c.seed),
            (Kind::Tomo, 4, 10000, 0.05, 7)
        );
        assert!(matches!(
            parse_cli(["tomo", "--gamma", "0.7"]),
            Err(Error::Config(_))
        ));
        assert_eq!(parse_cli(["lb", "--dim", "16"]).unwrap().ell(), 128);
        assert!(matches!(parse_cli(["--dim", "4"]), Err(Error::Config(m)) if m.contains("--kind")));
        assert!(parse_cli(["tomo", "--bogus", "1"]).is_err());
        let c = parse_cli([
            "--kind",
            "attack-demo",
            "--estimator",
            "naive+rank",
            "--attack",
            "state-swap",
        ])
        .unwrap();
        assert_eq!(
            (c.kind, c.estimator, c.attack),
            (
                Kind::AttackDemo,
                EstimatorKind::NaiveRank,
                AttackKind::StateSwap
            )
        );
        assert!(parse_cli(["tomo", "--attack", "coupling"]).is_err());
        assert!(parse_cli(["tomo", "--estimator", "subset-oracle"]).is_err());
    }

    #[test]
    fn json_config_with_flag_override() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("cfg.json");
        std::fs::write(&p, r#"{"kind": "test", "dim": 8, "gamma": 0.1, "seed": 3}"#).unwrap();
        let c = parse_cli(["--config", p.to_str().unwrap(), "--gamma", "0.2"]).unwrap();
        assert_eq!((c.kind, c.d, c.gamma, c.seed), (Kind::Test, 8, 0.2, 3));
        std::fs::write(&p, r#"{"kind": "test", "colour": 1}"#).unwrap();
        assert!(parse_cli(["--config", p.to_str().unwrap()]).is_err());
    }

    #[test]
    fn csv_round_trip_and_determinism() {
        let mut cfg = ExperimentConfig::new(Kind::Tomo);
        cfg.n = 2000;
        cfg.trials = 3;
        cfg.seed = 9;
        let a = run_experiment(&cfg).unwrap();
        let b = run_experiment(&cfg).unwrap();
        assert_eq!(a, b);
        let mut buf = Vec::new();
        write_csv(&a, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with(&CSV_HEADER.join(",")));
        assert_eq!(read_csv(&buf[..]).unwrap(), a);
        assert_eq!(a[1].derived_seed, mix_seed(9, 1));
    }

    #[test]
    fn lb_reports_critical_epsilon() {
        let mut cfg = ExperimentConfig::new(Kind::Lb);
        cfg.d = 16;
        cfg.gamma = 0.01;
        cfg.n = 500;
        let rows = run_experiment(&cfg).unwrap();
        assert_eq!(rows[0].statistic, Some(0.01));
        assert!(rows[0].budget_used <= 5);
    }

    #[test]
    fn float_format_has_17_digits() {
        assert_eq!(format_float(0.1), "1.0000000000000001e-1");
        assert_eq!(format_float(0.1).parse::<f64>().unwrap(), 0.1);
    }
}
