//! Post-quality optimization for one provider and Nash equilibria between two.
//!
//! Every objective is turned into a loss to minimize; the reported cost keeps
//! the sign of its kind (extinction plus cost, or shares minus cost).

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::extinction::{solve_single, solve_two_cp};
use crate::model::{dot, Cp, ModelParams, TwoCpParams, TwoCpType};
use crate::shares::{
    exact_trajectory, nonviral_expected, two_cp_exact, two_cp_nonviral, ShareConvention,
};

pub const GRID_STEP: f64 = 0.01;
pub const GOLDEN_TOL: f64 = 1e-6;
pub const SCAN_STEP: f64 = 1e-3;
pub const NE_TOL: f64 = 1e-6;
pub const NE_ROUNDS: usize = 200;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StartWeighting {
    /// `q . rho`
    #[default]
    Rho,
    /// `q_1`
    First,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ObjectiveKind {
    /// Minimize `q . rho + psi eta^2` (or `q_1 + psi eta^2`).
    ExtinctionPlusCost,
    /// Maximize `log(y_1(t))/t - psi eta^2`.
    GrowthRateMinusCost,
    /// Maximize `y_1 - psi eta^2`, eventual shares; needs `m < 1`.
    SubcriticalSharesMinusCost,
    /// Minimize `q_(1,2) q_(2,1) + psi w^2 eta^2` for the provider.
    TwoCpExtinction,
    /// Maximize `y_(1,2) + y_(2,1) - psi w^2 eta^2` for the provider.
    TwoCpShares,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Objective {
    pub kind: ObjectiveKind,
    pub psi: f64,
    /// Evaluation time of growth-rate and two-provider share objectives. Two-provider
    /// shares without it are eventual totals, which need the subcritical regime.
    #[serde(default)]
    pub t_eval: Option<f64>,
    #[serde(default)]
    pub weighting: StartWeighting,
}

impl Objective {
    pub fn new(kind: ObjectiveKind, psi: f64) -> Self {
        Self {
            kind,
            psi,
            t_eval: None,
            weighting: StartWeighting::Rho,
        }
    }

    pub fn at(self, t: f64) -> Self {
        Self {
            t_eval: Some(t),
            ..self
        }
    }

    fn maximizes(&self) -> bool {
        matches!(
            self.kind,
            ObjectiveKind::GrowthRateMinusCost
                | ObjectiveKind::SubcriticalSharesMinusCost
                | ObjectiveKind::TwoCpShares
        )
    }

    fn two_cp(&self) -> bool {
        matches!(
            self.kind,
            ObjectiveKind::TwoCpExtinction | ObjectiveKind::TwoCpShares
        )
    }

    pub fn violations(&self) -> Vec<String> {
        let mut out = vec![];
        if !(self.psi >= 0.0 && self.psi.is_finite()) {
            out.push(format!(
                "psi must be finite and nonnegative, got {}",
                self.psi
            ));
        }
        if let Some(t) = self.t_eval {
            if !(t > 0.0 && t.is_finite()) {
                out.push(format!("t_eval must be positive, got {t}"));
            }
        }
        if self.kind == ObjectiveKind::GrowthRateMinusCost && self.t_eval.is_none() {
            out.push("growth-rate objective needs t_eval".into());
        }
        out
    }

    fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Invalid(v))
        }
    }

    /// Cost with the sign of the objective kind, from performance `pm` and quality cost.
    fn signed(&self, pm: f64, quality_cost: f64) -> f64 {
        if self.maximizes() {
            pm - quality_cost
        } else {
            pm + quality_cost
        }
    }

    fn loss(&self, cost: f64) -> f64 {
        if self.maximizes() {
            -cost
        } else {
            cost
        }
    }
}

/// Performance measure of the single-provider objectives.
pub fn single_pm(p: &ModelParams, obj: &Objective) -> Result<f64> {
    match obj.kind {
        ObjectiveKind::ExtinctionPlusCost => {
            let q = solve_single(p)?.q;
            Ok(match obj.weighting {
                StartWeighting::Rho => dot(&q, &p.level_probs),
                StartWeighting::First => q[0],
            })
        }
        ObjectiveKind::GrowthRateMinusCost => {
            let t = obj.t_eval.expect("validated");
            let y = exact_trajectory(p, &[t], ShareConvention::Recipient)?.y[0][0];
            Ok(y.ln() / t)
        }
        ObjectiveKind::SubcriticalSharesMinusCost => Ok(nonviral_expected(p)?.y[0]),
        _ => Err(Error::Regime(
            "two-provider objective used for a single provider".into(),
        )),
    }
}

/// Performance measure of provider `cp` in competition.
pub fn two_cp_pm(p: &TwoCpParams, cp: Cp, obj: &Objective) -> Result<f64> {
    match obj.kind {
        ObjectiveKind::TwoCpExtinction => Ok(solve_two_cp(p, cp)?.pm()),
        ObjectiveKind::TwoCpShares => {
            let n = p.levels();
            match obj.t_eval {
                Some(t) => {
                    let y = &two_cp_exact(p, cp, &[t])?.y[0];
                    Ok(y[TwoCpType::Mixed {
                        top: Cp::One,
                        level: 0,
                    }
                    .index(n)]
                        + y[TwoCpType::Mixed {
                            top: Cp::Two,
                            level: 0,
                        }
                        .index(n)])
                }
                None => {
                    let s = two_cp_nonviral(p, cp)?;
                    Ok(s.y_mx1[0] + s.y_mx2[0])
                }
            }
        }
        _ => Err(Error::Regime(
            "single-provider objective used in competition".into(),
        )),
    }
}

/// Grid minimum (ties to the smaller point) refined by golden section on the
/// neighbouring cells; the refinement is kept only if it improves.
pub fn minimize_scalar<F>(f: F, lo: f64, hi: f64) -> Result<(f64, f64)>
where
    F: Fn(f64) -> Result<f64> + Sync,
{
    let cells = ((hi - lo) / GRID_STEP + 1e-9).floor() as usize;
    let mut grid: Vec<f64> = (0..=cells).map(|i| lo + i as f64 * GRID_STEP).collect();
    if hi - grid[cells] > 1e-12 {
        grid.push(hi);
    }
    let values = grid
        .par_iter()
        .map(|&x| f(x))
        .collect::<Result<Vec<f64>>>()?;
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v < values[best] {
            best = i;
        }
    }
    let (a, b) = (
        grid[best.saturating_sub(1)],
        grid[(best + 1).min(grid.len() - 1)],
    );
    let (x, fx) = golden(&f, a, b)?;
    if fx < values[best] {
        Ok((x, fx))
    } else {
        Ok((grid[best], values[best]))
    }
}

fn golden<F: Fn(f64) -> Result<f64>>(f: &F, mut a: f64, mut b: f64) -> Result<(f64, f64)> {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c)?, f(d)?);
    while b - a > GOLDEN_TOL {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d)?;
        }
    }
    let x = 0.5 * (a + b);
    Ok((x, f(x)?))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct QualityOptimum {
    pub eta_star: f64,
    pub cost: f64,
    pub pm: f64,
}

/// Optimal quality over `eta in [0, 1]`; the `eta` field of `p` is ignored.
pub fn optimal_quality(p: &ModelParams, obj: &Objective) -> Result<QualityOptimum> {
    p.validate()?;
    obj.validate()?;
    if obj.two_cp() {
        return Err(Error::Regime(
            "two-provider objective used for a single provider".into(),
        ));
    }
    if obj.kind == ObjectiveKind::SubcriticalSharesMinusCost && p.friends.mean() >= 1.0 {
        return Err(Error::Regime(format!(
            "eventual-shares objective needs m < 1, got m = {}",
            p.friends.mean()
        )));
    }
    let cost = |eta: f64| -> Result<f64> {
        Ok(obj.signed(single_pm(&p.with_eta(eta), obj)?, obj.psi * eta * eta))
    };
    let (eta_star, _) = minimize_scalar(|eta| Ok(obj.loss(cost(eta)?)), 0.0, 1.0)?;
    Ok(QualityOptimum {
        eta_star,
        cost: cost(eta_star)?,
        pm: single_pm(&p.with_eta(eta_star), obj)?,
    })
}

/// Eq.-18 cost of provider `cp` at the current qualities of `p`.
pub fn two_cp_cost(p: &TwoCpParams, cp: Cp, obj: &Objective) -> Result<f64> {
    let eta = p.eta(cp);
    let w = p.w(cp);
    Ok(obj.signed(two_cp_pm(p, cp, obj)?, obj.psi * w * w * eta * eta))
}

fn check_two_cp(p: &TwoCpParams, obj: &Objective) -> Result<()> {
    p.validate()?;
    obj.validate()?;
    if !obj.two_cp() {
        return Err(Error::Regime(
            "single-provider objective used in competition".into(),
        ));
    }
    Ok(())
}

/// Best quality of `cp` in `[0, 1/w_cp]` against the opponent quality in `p`.
pub fn best_response(p: &TwoCpParams, cp: Cp, obj: &Objective) -> Result<QualityOptimum> {
    check_two_cp(p, obj)?;
    let cost = |eta: f64| two_cp_cost(&p.with_eta(cp, eta), cp, obj);
    let (eta_star, _) = minimize_scalar(|eta| Ok(obj.loss(cost(eta)?)), 0.0, 1.0 / p.w(cp))?;
    let at = p.with_eta(cp, eta_star);
    Ok(QualityOptimum {
        eta_star,
        cost: cost(eta_star)?,
        pm: two_cp_pm(&at, cp, obj)?,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NeResult {
    pub eta_star: [f64; 2],
    pub costs: [f64; 2],
    pub pm: [f64; 2],
    pub rounds: usize,
    pub epsilon: f64,
    pub converged: bool,
    /// Best-response iterates, one pair per round.
    pub history: Vec<[f64; 2]>,
}

/// Gauss–Seidel best responses from `start`, certified by [`deviation_scan`].
pub fn nash_from(p: &TwoCpParams, obj: &Objective, start: [f64; 2]) -> Result<NeResult> {
    check_two_cp(p, obj)?;
    let mut q = p.with_eta(Cp::One, start[0]).with_eta(Cp::Two, start[1]);
    let mut history = vec![];
    let mut converged = false;
    let mut rounds = 0;
    while rounds < NE_ROUNDS {
        rounds += 1;
        let old = [q.eta1, q.eta2];
        q = q.with_eta(Cp::One, best_response(&q, Cp::One, obj)?.eta_star);
        q = q.with_eta(Cp::Two, best_response(&q, Cp::Two, obj)?.eta_star);
        history.push([q.eta1, q.eta2]);
        if (q.eta1 - old[0]).abs().max((q.eta2 - old[1]).abs()) <= NE_TOL {
            converged = true;
            break;
        }
    }
    let scan = deviation_scan(&q, obj)?;
    Ok(NeResult {
        eta_star: [q.eta1, q.eta2],
        costs: scan.costs,
        pm: [two_cp_pm(&q, Cp::One, obj)?, two_cp_pm(&q, Cp::Two, obj)?],
        rounds,
        epsilon: scan.epsilon,
        converged,
        history,
    })
}

/// Equilibrium reached from the canonical start `(1/w_1, 1/w_2)`.
pub fn nash_equilibrium(p: &TwoCpParams, obj: &Objective) -> Result<NeResult> {
    nash_from(p, obj, [1.0 / p.w1, 1.0 / p.w2])
}

/// Distinct equilibria reached from a 3×3 grid of starts.
pub fn nash_multi_start(p: &TwoCpParams, obj: &Objective) -> Result<Vec<NeResult>> {
    let starts: Vec<[f64; 2]> = [0.0, 0.5, 1.0]
        .iter()
        .flat_map(|&a| [0.0, 0.5, 1.0].map(|b| [a / p.w1, b / p.w2]))
        .collect();
    let all = starts
        .par_iter()
        .map(|&s| nash_from(p, obj, s))
        .collect::<Result<Vec<_>>>()?;
    let mut out: Vec<NeResult> = vec![];
    for r in all {
        let seen = out.iter().any(|o| {
            (o.eta_star[0] - r.eta_star[0]).abs() <= 1e-4
                && (o.eta_star[1] - r.eta_star[1]).abs() <= 1e-4
        });
        if !seen {
            out.push(r);
        }
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DeviationScan {
    /// Largest unilateral improvement of either provider.
    pub epsilon: f64,
    pub gain: [f64; 2],
    pub costs: [f64; 2],
}

/// Best unilateral improvement over a `1e-3` grid of deviations, per provider.
pub fn deviation_scan(p: &TwoCpParams, obj: &Objective) -> Result<DeviationScan> {
    check_two_cp(p, obj)?;
    let mut gain = [0.0; 2];
    let mut costs = [0.0; 2];
    for cp in [Cp::One, Cp::Two] {
        let here = two_cp_cost(p, cp, obj)?;
        let hi = 1.0 / p.w(cp);
        let steps = (hi / SCAN_STEP + 1e-9).floor() as usize;
        let mut pts: Vec<f64> = (0..=steps).map(|i| i as f64 * SCAN_STEP).collect();
        pts.push(hi);
        let best = pts
            .par_iter()
            .map(|&eta| two_cp_cost(&p.with_eta(cp, eta), cp, obj).map(|c| obj.loss(c)))
            .collect::<Result<Vec<f64>>>()?
            .into_iter()
            .fold(f64::INFINITY, f64::min);
        costs[cp.index()] = here;
        gain[cp.index()] = (obj.loss(here) - best).max(0.0);
    }
    Ok(DeviationScan {
        epsilon: gain[0].max(gain[1]),
        gain,
        costs,
    })
}
