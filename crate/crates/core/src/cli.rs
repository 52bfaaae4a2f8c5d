//! Batch experiment surface behind the `viral-timeline` binary.
//!
//! A run reads one JSON config, computes a JSON summary and zero or more CSV
//! tables, and only then writes anything, so a failing run leaves no partial
//! output.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::Error;
use crate::extinction::{solve_single, solve_two_cp};
use crate::model::{Cp, ModelParams, TwoCpParams};
use crate::optimize::{nash_equilibrium, nash_multi_start, optimal_quality, Objective};
use crate::shares::{
    exact_trajectory, nonviral_expected, two_cp_coefficients, two_cp_exact, two_cp_nonviral,
    viral_asymptote, ShareConvention,
};
use crate::simulate::{run_ensemble, Process, SimConfig};
use crate::spectral::{
    alpha_bounds, alpha_bounds_mixed, build_mixed, build_single, check_positive_regular,
    dominant_root, perron, Generator,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Spectral,
    Extinct,
    Shares,
    Nonviral,
    Simulate,
    Optimize,
    Nash,
    Sweep,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    #[default]
    Json,
    Csv,
}

#[derive(Clone, Debug, Default)]
pub struct Options {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub format: Format,
    pub convention: Option<ShareConvention>,
}

#[derive(Debug)]
pub enum CliError {
    /// Unreadable, malformed or invalid configuration.
    Config(String),
    /// Regime mismatch or solver failure.
    Solver(Error),
    Io(std::io::Error),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Solver(e) => write!(f, "{e}"),
            CliError::Io(e) => write!(f, "io error: {e}"),
        }
    }
}

impl std::error::Error for CliError {}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Solver(_) | CliError::Io(_) => 3,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Invalid(v) => CliError::Config(v.join("; ")),
            other => CliError::Solver(other),
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

/// Start of simulated paths.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum StartSpec {
    /// Single-provider level, 1-based.
    Level(usize),
    /// Two-provider type label such as `"(1,2)"`.
    Type(String),
    Distribution(Vec<f64>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepVariable {
    /// Mean friend count; the friend family is kept.
    M,
    /// `lambda/(lambda+nu)` at fixed `lambda+nu`.
    Theta,
    Psi,
    Eta,
    Eta1,
    Eta2,
    Delta,
    Lambda,
    Nu,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepOutput {
    /// `q . rho` (single provider).
    QRho,
    /// Dominant root (single) or mixed Perron root (two providers).
    Alpha,
    /// Optimal quality and its cost (single provider, needs an objective).
    EtaStar,
    /// Equilibrium qualities, costs, performances and certificate.
    Ne,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    pub variable: SweepVariable,
    pub from: f64,
    pub to: f64,
    pub step: f64,
    /// Coupling `lambda = kappa * m` applied at every point of an `m` sweep.
    #[serde(default)]
    pub lambda_per_m: Option<f64>,
    pub outputs: Vec<SweepOutput>,
}

impl Sweep {
    pub fn points(&self) -> Vec<f64> {
        if self.to < self.from {
            return vec![];
        }
        let n = ((self.to - self.from) / self.step + 1e-9).floor() as usize;
        (0..=n).map(|i| self.from + i as f64 * self.step).collect()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub model: Option<ModelParams>,
    #[serde(default)]
    pub two_cp: Option<TwoCpParams>,
    #[serde(default)]
    pub sim: Option<SimConfig>,
    #[serde(default)]
    pub objective: Option<Objective>,
    /// Time grid of trajectories and simulation checkpoints.
    #[serde(default)]
    pub times: Option<Vec<f64>>,
    #[serde(default)]
    pub start: Option<StartSpec>,
    #[serde(default)]
    pub multi_start: bool,
    #[serde(default)]
    pub sweep: Option<Sweep>,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    fn model(&self) -> Result<&ModelParams> {
        self.model
            .as_ref()
            .ok_or_else(|| CliError::Config("missing `model` block".into()))
    }

    fn two(&self) -> Result<&TwoCpParams> {
        self.two_cp
            .as_ref()
            .ok_or_else(|| CliError::Config("missing `two_cp` block".into()))
    }

    fn objective(&self) -> Result<&Objective> {
        self.objective
            .as_ref()
            .ok_or_else(|| CliError::Config("missing `objective` block".into()))
    }

    fn times(&self) -> Result<&[f64]> {
        let t = self
            .times
            .as_deref()
            .ok_or_else(|| CliError::Config("missing `times`".into()))?;
        if t.iter().any(|x| !(x.is_finite() && *x >= 0.0)) || t.windows(2).any(|w| w[1] < w[0]) {
            return Err(CliError::Config(
                "`times` must be finite, nonnegative and nondecreasing".into(),
            ));
        }
        Ok(t)
    }

    /// Exactly one of `model` and `two_cp`, validated.
    fn check_models(&self) -> Result<()> {
        match (&self.model, &self.two_cp) {
            (Some(_), Some(_)) => Err(CliError::Config(
                "give either `model` or `two_cp`, not both".into(),
            )),
            (None, None) => Err(CliError::Config("missing `model` or `two_cp` block".into())),
            (Some(m), None) => Ok(m.validate()?),
            (None, Some(t)) => Ok(t.validate()?),
        }
    }
}

/// A CSV table with `{:.16e}` floats.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn new(name: &str, header: &[&str]) -> Self {
        Self {
            name: name.into(),
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: vec![],
        }
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(vec![]);
        w.write_record(&self.header).map_err(csv_io)?;
        for r in &self.rows {
            w.write_record(r).map_err(csv_io)?;
        }
        let bytes = w.into_inner().map_err(|e| CliError::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

fn csv_io(e: csv::Error) -> CliError {
    CliError::Io(std::io::Error::other(e))
}

pub fn fmt_f(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        format!("{x}")
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Outcome {
    pub summary: Value,
    pub tables: Vec<Table>,
}

fn outcome(summary: Value, tables: Vec<Table>) -> Result<Outcome> {
    Ok(Outcome { summary, tables })
}

fn to_value<T: Serialize>(x: &T) -> Value {
    serde_json::to_value(x).expect("report types serialize")
}

/// Runs one command on a parsed config.
pub fn execute(cmd: Command, cfg: &ExperimentConfig, opts: &Options) -> Result<Outcome> {
    match cmd {
        Command::Sweep => {}
        _ => cfg.check_models()?,
    }
    match cmd {
        Command::Spectral => spectral(cfg),
        Command::Extinct => extinct(cfg),
        Command::Shares => shares(cfg, opts),
        Command::Nonviral => nonviral(cfg),
        Command::Simulate => simulate(cfg, opts),
        Command::Optimize => optimize(cfg),
        Command::Nash => nash(cfg),
        Command::Sweep => sweep(cfg),
    }
}

fn matrix_table(name: &str, g: &Generator) -> Table {
    let mut header = vec!["type"];
    header.extend(g.labels.iter().map(|s| s.as_str()));
    let mut t = Table::new(name, &header);
    for i in 0..g.dim() {
        let mut row = vec![g.labels[i].clone()];
        row.extend((0..g.dim()).map(|j| fmt_f(g.a[(i, j)])));
        t.rows.push(row);
    }
    t
}

fn rows(g: &Generator) -> Vec<Vec<f64>> {
    (0..g.dim())
        .map(|i| (0..g.dim()).map(|j| g.a[(i, j)]).collect())
        .collect()
}

fn regime_of(alpha: f64) -> &'static str {
    if alpha > 0.0 {
        "supercritical"
    } else if alpha < 0.0 {
        "subcritical"
    } else {
        "critical"
    }
}

fn spectral(cfg: &ExperimentConfig) -> Result<Outcome> {
    if let Some(p) = &cfg.model {
        let g = build_single(p);
        let (lo, hi) = alpha_bounds(p);
        let reg = check_positive_regular(&g);
        let summary = match perron(&g) {
            Ok(s) => json!({
                "alpha": s.alpha, "bounds": [lo, hi], "u": s.u, "v": s.v, "residual": s.residual,
                "regularity": reg, "regime": regime_of(s.alpha), "labels": g.labels, "generator": rows(&g),
                "warnings": s.warnings,
            }),
            Err(Error::Reducible { components }) => {
                let alpha = dominant_root(&g)?;
                json!({
                    "alpha": alpha, "bounds": [lo, hi], "reducible_components": components,
                    "regularity": reg, "regime": regime_of(alpha), "labels": g.labels, "generator": rows(&g),
                })
            }
            Err(e) => return Err(e.into()),
        };
        return outcome(summary, vec![matrix_table("generator.csv", &g)]);
    }
    let p = cfg.two()?;
    let g = build_mixed(p);
    let s = perron(&g)?;
    let (lo, hi) = alpha_bounds_mixed(p);
    let summary = json!({
        "alpha_mx": s.alpha, "bounds": [lo, hi], "u": s.u, "v": s.v, "residual": s.residual,
        "regime": regime_of(s.alpha), "labels": g.labels, "generator": rows(&g), "c_mx": p.c_mx(),
    });
    outcome(summary, vec![matrix_table("mixed_generator.csv", &g)])
}

fn extinct(cfg: &ExperimentConfig) -> Result<Outcome> {
    let mut t = Table::new("extinction.csv", &["cp", "type", "q"]);
    if let Some(p) = &cfg.model {
        let e = solve_single(p)?;
        for (l, q) in e.q.iter().enumerate() {
            t.rows
                .push(vec!["1".into(), format!("{}", l + 1), fmt_f(*q)]);
        }
        let mut summary = to_value(&e);
        summary["q_rho"] = json!(e.weighted(&p.level_probs));
        return outcome(summary, vec![t]);
    }
    let p = cfg.two()?;
    let n = p.levels();
    let mut per = serde_json::Map::new();
    for cp in [Cp::One, Cp::Two] {
        let e = solve_two_cp(p, cp)?;
        let c = cp.index() + 1;
        for l in 0..n - 1 {
            t.rows.push(vec![
                c.to_string(),
                format!("({},{})", l + 1, l + 2),
                fmt_f(e.q_mx1[l]),
            ]);
            t.rows.push(vec![
                c.to_string(),
                format!("({},{})", l + 2, l + 1),
                fmt_f(e.q_mx2[l]),
            ]);
        }
        for (l, q) in e.q_ex.iter().enumerate() {
            let label = match cp {
                Cp::One => format!("({},0)", l + 1),
                Cp::Two => format!("(0,{})", l + 1),
            };
            t.rows.push(vec![c.to_string(), label, fmt_f(*q)]);
        }
        let mut v = to_value(&e);
        v["pm"] = json!(e.pm());
        per.insert(format!("cp{c}"), v);
    }
    outcome(Value::Object(per), vec![t])
}

fn shares(cfg: &ExperimentConfig, opts: &Options) -> Result<Outcome> {
    let times = cfg.times()?;
    if let Some(p) = &cfg.model {
        let conv = opts.convention.unwrap_or_default();
        let tr = exact_trajectory(p, times, conv)?;
        let mut header = vec!["t".to_string()];
        header.extend(tr.labels.iter().map(|l| format!("y_{l}")));
        let mut t = Table {
            name: "shares.csv".into(),
            header,
            rows: vec![],
        };
        for (k, row) in tr.y.iter().enumerate() {
            let mut r = vec![fmt_f(times[k])];
            r.extend(row.iter().map(|x| fmt_f(*x)));
            t.rows.push(r);
        }
        let asym = viral_asymptote(p, conv).ok();
        let summary =
            json!({ "convention": conv, "labels": tr.labels, "asymptote": asym, "y": tr.y });
        return outcome(summary, vec![t]);
    }
    let p = cfg.two()?;
    if opts.convention == Some(ShareConvention::Event) {
        return Err(CliError::Config(
            "the event convention applies to single-provider runs".into(),
        ));
    }
    let mut t = Table::new("shares_two_cp.csv", &["t", "type", "y_cp1", "y_cp2"]);
    let e1 = two_cp_exact(p, Cp::One, times)?;
    let e2 = two_cp_exact(p, Cp::Two, times)?;
    for (k, &tk) in times.iter().enumerate() {
        for (i, label) in e1.labels.iter().enumerate() {
            t.rows.push(vec![
                fmt_f(tk),
                label.clone(),
                fmt_f(e1.y[k][i]),
                fmt_f(e2.y[k][i]),
            ]);
        }
    }
    let coeff = |cp| match two_cp_coefficients(p, cp) {
        Ok(c) => to_value(&c),
        Err(e) => json!({ "error": e.to_string() }),
    };
    let summary = json!({ "coefficients": { "cp1": coeff(Cp::One), "cp2": coeff(Cp::Two) }, "labels": e1.labels });
    outcome(summary, vec![t])
}

fn nonviral(cfg: &ExperimentConfig) -> Result<Outcome> {
    let mut t = Table::new("nonviral.csv", &["cp", "type", "y"]);
    if let Some(p) = &cfg.model {
        let s = nonviral_expected(p)?;
        for (l, y) in s.y.iter().enumerate() {
            t.rows
                .push(vec!["1".into(), format!("{}", l + 1), fmt_f(*y)]);
        }
        return outcome(to_value(&s), vec![t]);
    }
    let p = cfg.two()?;
    let mut per = serde_json::Map::new();
    for cp in [Cp::One, Cp::Two] {
        let s = two_cp_nonviral(p, cp)?;
        let c = cp.index() + 1;
        for l in 0..s.y_mx1.len() {
            t.rows.push(vec![
                c.to_string(),
                format!("({},{})", l + 1, l + 2),
                fmt_f(s.y_mx1[l]),
            ]);
            t.rows.push(vec![
                c.to_string(),
                format!("({},{})", l + 2, l + 1),
                fmt_f(s.y_mx2[l]),
            ]);
        }
        per.insert(format!("cp{c}"), to_value(&s));
    }
    outcome(Value::Object(per), vec![t])
}

fn start_distribution(cfg: &ExperimentConfig, labels: &[String]) -> Result<Vec<f64>> {
    let d = labels.len();
    let unit = |i: usize| {
        let mut s = vec![0.0; d];
        s[i] = 1.0;
        s
    };
    match &cfg.start {
        None => Ok(unit(0)),
        Some(StartSpec::Level(l)) if cfg.model.is_some() && (1..=d).contains(l) => Ok(unit(l - 1)),
        Some(StartSpec::Level(l)) => Err(CliError::Config(format!(
            "start level {l} is not a single-provider level"
        ))),
        Some(StartSpec::Type(name)) => labels
            .iter()
            .position(|x| x == name)
            .map(unit)
            .ok_or_else(|| CliError::Config(format!("unknown start type {name}"))),
        Some(StartSpec::Distribution(w)) => {
            if w.len() != d || !w.iter().all(|x| *x >= 0.0) || w.iter().sum::<f64>() <= 0.0 {
                return Err(CliError::Config(format!(
                    "start distribution needs {d} nonnegative weights"
                )));
            }
            let s: f64 = w.iter().sum();
            Ok(w.iter().map(|x| x / s).collect())
        }
    }
}

fn simulate(cfg: &ExperimentConfig, opts: &Options) -> Result<Outcome> {
    let mut sim = cfg
        .sim
        .clone()
        .ok_or_else(|| CliError::Config("missing `sim` block".into()))?;
    if let Some(s) = opts.seed {
        sim.seed = s;
    }
    if let Some(c) = opts.convention {
        sim.convention = c;
    }
    if let Some(t) = &cfg.times {
        sim.checkpoints = t.clone();
    }
    let bad = sim.violations();
    if !bad.is_empty() {
        return Err(CliError::Config(bad.join("; ")));
    }
    let (process, theory): (Process, Vec<Vec<Vec<f64>>>) = match (&cfg.model, &cfg.two_cp) {
        (Some(p), _) => {
            let tr = exact_trajectory(p, &sim.checkpoints, sim.convention)?;
            (Process::single(p)?, vec![tr.y])
        }
        (_, Some(p)) => {
            let a = two_cp_exact(p, Cp::One, &sim.checkpoints)?;
            let b = two_cp_exact(p, Cp::Two, &sim.checkpoints)?;
            (Process::two_cp(p)?, vec![a.y, b.y])
        }
        _ => unreachable!("checked"),
    };
    let start = start_distribution(cfg, &process.labels)?;
    let est = run_ensemble(&process, &start, &sim)?;
    let providers = theory.len();
    let mut header = vec!["t".to_string()];
    for c in 1..=providers {
        header.extend([
            format!("theory_cp{c}"),
            format!("sim_cp{c}"),
            format!("half_width_cp{c}"),
        ]);
    }
    header.push("observed".into());
    let mut t = Table {
        name: "shares_vs_t.csv".into(),
        header,
        rows: vec![],
    };
    for (k, cp) in est.checkpoints.iter().enumerate() {
        let mut row = vec![fmt_f(cp.t)];
        for (c, y) in theory.iter().enumerate() {
            let th: f64 = y[k].iter().zip(&start).map(|(a, b)| a * b).sum();
            row.extend([fmt_f(th), fmt_f(cp.mean_shares[c]), fmt_f(cp.half_width[c])]);
        }
        row.push(cp.observed.to_string());
        t.rows.push(row);
    }
    let summary = json!({
        "replications": est.replications, "extinct": est.extinct, "escaped": est.escaped,
        "horizon": est.horizon, "extinct_fraction": est.extinct_fraction, "extinct_ci": est.extinct_ci,
        "lost": est.lost,
        "seed": sim.seed, "convention": sim.convention, "checkpoints": est.checkpoints,
    });
    outcome(summary, vec![t])
}

fn optimize(cfg: &ExperimentConfig) -> Result<Outcome> {
    let p = cfg.model()?;
    let obj = cfg.objective()?;
    let opt = optimal_quality(p, obj)?;
    let mut t = Table::new("optimum.csv", &["eta_star", "cost", "pm"]);
    t.rows
        .push(vec![fmt_f(opt.eta_star), fmt_f(opt.cost), fmt_f(opt.pm)]);
    outcome(json!({ "objective": obj, "optimum": opt }), vec![t])
}

fn nash(cfg: &ExperimentConfig) -> Result<Outcome> {
    let p = cfg.two()?;
    let obj = cfg.objective()?;
    let ne = nash_equilibrium(p, obj)?;
    let mut hist = Table::new("ne_history.csv", &["round", "eta1", "eta2"]);
    for (k, h) in ne.history.iter().enumerate() {
        hist.rows
            .push(vec![(k + 1).to_string(), fmt_f(h[0]), fmt_f(h[1])]);
    }
    let mut summary = json!({ "objective": obj, "equilibrium": ne });
    if cfg.multi_start {
        summary["multi_start"] = to_value(&nash_multi_start(p, obj)?);
    }
    outcome(summary, vec![hist])
}

fn sweep_columns(cfg: &ExperimentConfig, outputs: &[SweepOutput]) -> Result<Vec<&'static str>> {
    let single = cfg.model.is_some();
    let mut cols = vec![];
    for o in outputs {
        match (o, single) {
            (SweepOutput::QRho, true) => cols.push("q_rho"),
            (SweepOutput::Alpha, true) => cols.push("alpha"),
            (SweepOutput::Alpha, false) => cols.push("alpha_mx"),
            (SweepOutput::EtaStar, true) => cols.extend(["eta_star", "cost"]),
            (SweepOutput::Ne, false) => cols.extend([
                "eta1",
                "eta2",
                "cost1",
                "cost2",
                "pm1",
                "pm2",
                "epsilon",
                "converged",
            ]),
            (o, _) => {
                return Err(CliError::Config(format!(
                    "sweep output {o:?} does not apply to a {} model",
                    if single {
                        "single-provider"
                    } else {
                        "two-provider"
                    }
                )))
            }
        }
        if matches!(o, SweepOutput::EtaStar | SweepOutput::Ne) && cfg.objective.is_none() {
            return Err(CliError::Config(
                "sweep output needs an `objective` block".into(),
            ));
        }
    }
    Ok(cols)
}

fn set_rate_split(lambda: &mut f64, nu: &mut f64, theta: f64) {
    let total = *lambda + *nu;
    *lambda = theta * total;
    *nu = (1.0 - theta) * total;
}

fn sweep_point(
    cfg: &ExperimentConfig,
    sw: &Sweep,
    x: f64,
) -> std::result::Result<Vec<String>, Error> {
    let mut model = cfg.model.clone();
    let mut two = cfg.two_cp.clone();
    let mut obj = cfg.objective;
    let bad = |what: &str| {
        Error::Invalid(vec![format!(
            "sweep variable {what} does not apply to this config"
        )])
    };
    match sw.variable {
        SweepVariable::Psi => obj.as_mut().ok_or_else(|| bad("psi"))?.psi = x,
        SweepVariable::M => {
            if let Some(m) = model.as_mut() {
                m.friends = crate::model::FriendLaw::with_mean(m.friends.family, x);
                if let Some(k) = sw.lambda_per_m {
                    m.lambda = k * x;
                }
            }
            if let Some(t) = two.as_mut() {
                t.friends = crate::model::FriendLaw::with_mean(t.friends.family, x);
                if let Some(k) = sw.lambda_per_m {
                    t.lambda = k * x;
                }
            }
        }
        SweepVariable::Theta => {
            if let Some(m) = model.as_mut() {
                set_rate_split(&mut m.lambda, &mut m.nu, x);
            }
            if let Some(t) = two.as_mut() {
                set_rate_split(&mut t.lambda, &mut t.nu, x);
            }
        }
        SweepVariable::Lambda => {
            model.iter_mut().for_each(|m| m.lambda = x);
            two.iter_mut().for_each(|t| t.lambda = x);
        }
        SweepVariable::Nu => {
            model.iter_mut().for_each(|m| m.nu = x);
            two.iter_mut().for_each(|t| t.nu = x);
        }
        SweepVariable::Eta => model.as_mut().ok_or_else(|| bad("eta"))?.eta = x,
        SweepVariable::Eta1 => two.as_mut().ok_or_else(|| bad("eta1"))?.eta1 = x,
        SweepVariable::Eta2 => two.as_mut().ok_or_else(|| bad("eta2"))?.eta2 = x,
        SweepVariable::Delta => two.as_mut().ok_or_else(|| bad("delta"))?.delta = x,
    }
    let mut row = vec![];
    for o in &sw.outputs {
        match (o, &model, &two) {
            (SweepOutput::QRho, Some(p), _) => {
                row.push(fmt_f(solve_single(p)?.weighted(&p.level_probs)))
            }
            (SweepOutput::Alpha, Some(p), _) => {
                p.validate()?;
                row.push(fmt_f(dominant_root(&build_single(p))?))
            }
            (SweepOutput::Alpha, _, Some(p)) => {
                p.validate()?;
                row.push(fmt_f(perron(&build_mixed(p))?.alpha))
            }
            (SweepOutput::EtaStar, Some(p), _) => {
                let opt = optimal_quality(p, obj.as_ref().expect("checked"))?;
                row.extend([fmt_f(opt.eta_star), fmt_f(opt.cost)]);
            }
            (SweepOutput::Ne, _, Some(p)) => {
                let ne = nash_equilibrium(p, obj.as_ref().expect("checked"))?;
                row.extend(
                    [
                        ne.eta_star[0],
                        ne.eta_star[1],
                        ne.costs[0],
                        ne.costs[1],
                        ne.pm[0],
                        ne.pm[1],
                        ne.epsilon,
                    ]
                    .map(fmt_f),
                );
                row.push(ne.converged.to_string());
            }
            _ => unreachable!("columns checked"),
        }
    }
    Ok(row)
}

fn sweep(cfg: &ExperimentConfig) -> Result<Outcome> {
    let sw = cfg
        .sweep
        .as_ref()
        .ok_or_else(|| CliError::Config("missing `sweep` block".into()))?;
    if !(sw.step > 0.0 && sw.step.is_finite() && sw.from.is_finite() && sw.to.is_finite()) {
        return Err(CliError::Config(
            "sweep needs finite bounds and a positive step".into(),
        ));
    }
    if cfg.model.is_some() == cfg.two_cp.is_some() {
        return Err(CliError::Config(
            "sweep needs exactly one of `model` and `two_cp`".into(),
        ));
    }
    if let Some(o) = &cfg.objective {
        let v = o.violations();
        if !v.is_empty() {
            return Err(CliError::Config(v.join("; ")));
        }
    }
    let cols = sweep_columns(cfg, &sw.outputs)?;
    let mut header = vec![format!("{:?}", sw.variable).to_lowercase()];
    header.extend(cols.iter().map(|c| c.to_string()));
    header.push("error".into());
    let width = header.len();
    let rows: Vec<Vec<String>> = sw
        .points()
        .par_iter()
        .map(|&x| {
            let mut row = vec![fmt_f(x)];
            match sweep_point(cfg, sw, x) {
                Ok(vals) => {
                    row.extend(vals);
                    row.push(String::new());
                }
                Err(e) => {
                    row.resize(width - 1, String::new());
                    row.push(e.to_string());
                }
            }
            row
        })
        .collect();
    let errors = rows.iter().filter(|r| !r[width - 1].is_empty()).count();
    let summary = json!({ "variable": sw.variable, "points": rows.len(), "errors": errors, "columns": header });
    outcome(
        summary,
        vec![Table {
            name: "sweep.csv".into(),
            header,
            rows,
        }],
    )
}

/// Reads the config, runs the command and writes its artifacts. Returns what
/// goes to stdout.
pub fn run(cmd: Command, config: &Path, opts: &Options) -> Result<String> {
    let text = fs::read_to_string(config)
        .map_err(|e| CliError::Config(format!("{}: {e}", config.display())))?;
    let cfg = ExperimentConfig::parse(&text)?;
    let out = execute(cmd, &cfg, opts)?;
    let rendered: Vec<(String, String)> = out
        .tables
        .iter()
        .map(|t| Ok((t.name.clone(), t.to_csv()?)))
        .collect::<Result<_>>()?;
    if let Some(dir) = &opts.out {
        fs::create_dir_all(dir).map_err(CliError::Io)?;
        for (name, body) in &rendered {
            fs::write(dir.join(name), body).map_err(CliError::Io)?;
        }
        fs::write(dir.join("summary.json"), pretty(&out.summary)).map_err(CliError::Io)?;
    }
    Ok(match opts.format {
        Format::Json => pretty(&out.summary),
        Format::Csv => rendered.first().map(|(_, b)| b.clone()).unwrap_or_default(),
    })
}

fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("json values serialize");
    s.push('\n');
    s
}
