//! Extinction probabilities as minimal fixed points of the offspring
//! generating functions.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{Cp, ModelParams, OffspringLaws, TwoCpParams, TwoCpType};
use crate::spectral::{build_mixed, build_single, dominant_root};

const TOL: f64 = 1e-13;
const CAP: usize = 1_000_000;
/// Relative width of the band `|alpha| <= GUARD (lambda+nu)` treated as critical.
pub const GUARD: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    SubcriticalAllOne,
    Supercritical,
    CriticalIndeterminate,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExtinctionVector {
    pub q: Vec<f64>,
    pub regime: Regime,
    pub alpha: f64,
    pub iterations: usize,
    /// `max |h(q) - q|`.
    pub residual: f64,
    pub warnings: Vec<String>,
}

impl ExtinctionVector {
    /// `q . rho`
    pub fn weighted(&self, rho: &[f64]) -> f64 {
        self.q.iter().zip(rho).map(|(a, b)| a * b).sum()
    }
}

struct Iterate {
    x: Vec<f64>,
    iterations: usize,
    change: f64,
}

/// Newton steps `x += (I - J(x))^{-1} (f(x) - x)` from zero. For generating
/// functions these increase to the minimal fixed point, quadratically away
/// from criticality; a step that fails or leaves `[x, 1]` is replaced by plain
/// substitution `x = f(x)`, which also increases to that point.
fn minimal_fixed_point(
    dim: usize,
    f: impl Fn(&[f64]) -> Vec<f64>,
    jac: impl Fn(&[f64]) -> DMatrix<f64>,
) -> Iterate {
    let mut x = vec![0.0; dim];
    let mut change = f64::INFINITY;
    let mut it = 0;
    while it < CAP {
        let fx = f(&x);
        let gap = DVector::from_iterator(dim, fx.iter().zip(&x).map(|(a, b)| a - b));
        let newton = (DMatrix::identity(dim, dim) - jac(&x))
            .lu()
            .solve(&gap)
            .map(|d| {
                x.iter()
                    .zip(d.iter())
                    .map(|(a, b)| a + b)
                    .collect::<Vec<f64>>()
            })
            .filter(|y| {
                y.iter()
                    .zip(&fx)
                    .all(|(&y, &f)| y.is_finite() && y >= f - 1e-12 && y <= 1.0 + 1e-12)
            });
        let next: Vec<f64> = match newton {
            Some(y) => y.into_iter().map(|v| v.min(1.0)).collect(),
            None => fx,
        };
        change = next
            .iter()
            .zip(&x)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        x = next;
        it += 1;
        if change <= TOL {
            break;
        }
    }
    Iterate {
        x,
        iterations: it,
        change,
    }
}

/// Jacobian of the first `d` generating functions in their first `d` arguments.
fn gradient(laws: &OffspringLaws, d: usize, s: &[f64]) -> DMatrix<f64> {
    let rows: Vec<Vec<f64>> = (0..d).map(|i| laws.pgf_gradient(i, s)).collect();
    DMatrix::from_fn(d, d, |i, k| rows[i][k])
}

fn residual(q: &[f64], hq: &[f64]) -> f64 {
    q.iter()
        .zip(hq)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
}

/// Extinction probability of each single-provider type.
pub fn solve_single(p: &ModelParams) -> Result<ExtinctionVector> {
    p.validate()?;
    let n = p.levels();
    let alpha = dominant_root(&build_single(p))?;
    let guard = GUARD * p.rate();
    if alpha < -guard {
        return Ok(ExtinctionVector {
            q: vec![1.0; n],
            regime: Regime::SubcriticalAllOne,
            alpha,
            iterations: 0,
            residual: 0.0,
            warnings: vec![],
        });
    }
    let laws = p.laws();
    let h = |s: &[f64]| laws.pgf_all(s);
    let jac = |s: &[f64]| gradient(&laws, n, s);
    let it = minimal_fixed_point(n, h, jac);
    let res = residual(&it.x, &h(&it.x));
    let mut warnings = Vec::new();
    let regime = if alpha > guard {
        if it.change > TOL {
            return Err(Error::NoConvergence {
                what: "extinction fixed point",
                iterations: it.iterations,
                residual: res,
            });
        }
        Regime::Supercritical
    } else {
        warnings.push(format!(
            "critical-indeterminate: alpha = {alpha:.3e}; returning the iterate"
        ));
        Regime::CriticalIndeterminate
    };
    Ok(ExtinctionVector {
        q: it.x,
        regime,
        alpha,
        iterations: it.iterations,
        residual: res,
        warnings,
    })
}

/// `max_l |q_{N-l} - ((q_N - 1) sum_{i<=l} theta^{l-i} r_{N-i}/r_N + 1)|`.
pub fn level_relation_residual(q: &[f64], p: &ModelParams) -> f64 {
    let n = p.levels();
    let theta = p.theta();
    let r = &p.view_probs;
    let qn = q[n - 1];
    (0..n)
        .map(|l| {
            let sum: f64 = (0..=l)
                .map(|i| theta.powi((l - i) as i32) * r[n - 1 - i] / r[n - 1])
                .sum();
            (q[n - 1 - l] - ((qn - 1.0) * sum + 1.0)).abs()
        })
        .fold(0.0, f64::max)
}

/// Extinction probabilities of one provider's post in the two-provider process.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TwoCpExtinction {
    pub cp: Cp,
    /// Exclusive types `(l,0)` for CP1 or `(0,l)` for CP2.
    pub q_ex: Vec<f64>,
    /// Types `(l,l+1)`, `l = 1..N-1`.
    pub q_mx1: Vec<f64>,
    /// Types `(l+1,l)`.
    pub q_mx2: Vec<f64>,
    pub regime: Regime,
    pub alpha_ex: f64,
    pub alpha_mx: f64,
    pub iterations: usize,
    pub residual: f64,
    pub warnings: Vec<String>,
}

impl TwoCpExtinction {
    /// `q_(1,2) q_(2,1)`: extinction when starting from one timeline of each orientation.
    pub fn pm(&self) -> f64 {
        self.q_mx1[0] * self.q_mx2[0]
    }
}

/// Extinction of CP `cp`: exclusive types first, then the mixed system given them.
pub fn solve_two_cp(p: &TwoCpParams, cp: Cp) -> Result<TwoCpExtinction> {
    p.validate()?;
    let n = p.levels();
    let ex = solve_single(&p.single(cp))?;
    let alpha_mx = dominant_root(&build_mixed(p))?;
    let laws = p.laws();
    let mut warnings = ex.warnings.clone();

    let mut full = vec![1.0; p.dim()];
    let off = TwoCpType::Exclusive { cp, level: 0 }.index(n);
    full[off..off + n].copy_from_slice(&ex.q);

    let guard = GUARD * p.rate();
    let done = |mixed: Vec<f64>, iterations, residual, regime, warnings| TwoCpExtinction {
        cp,
        q_ex: ex.q.clone(),
        q_mx1: mixed.iter().step_by(2).copied().collect(),
        q_mx2: mixed.iter().skip(1).step_by(2).copied().collect(),
        regime,
        alpha_ex: ex.alpha,
        alpha_mx,
        iterations,
        residual,
        warnings,
    };

    if ex.regime == Regime::SubcriticalAllOne && alpha_mx < -guard {
        let assumption = p.level_probs[n - 1] == 0.0
            && p.mixed_level_probs
                .iter()
                .zip(&p.level_probs)
                .all(|(a, b)| a == b);
        if !assumption {
            warnings.push(
                "all-ones mixed solution applied without rho_N = 0 and rho_bar = rho; \
                 justified here by the subcritical mixed block"
                    .into(),
            );
        }
        return Ok(done(
            vec![1.0; 2 * n - 2],
            0,
            0.0,
            Regime::SubcriticalAllOne,
            warnings,
        ));
    }

    let h = |mixed: &[f64]| mixed_map(&laws, &full, mixed);
    let d = 2 * n - 2;
    let jac = |mixed: &[f64]| {
        let mut s = full.clone();
        s[..d].copy_from_slice(mixed);
        gradient(&laws, d, &s)
    };
    let it = minimal_fixed_point(d, h, jac);
    let res = residual(&it.x, &h(&it.x));
    if it.change > TOL {
        if alpha_mx.max(ex.alpha).abs() <= guard {
            warnings.push("critical-indeterminate mixed system; returning the iterate".into());
            return Ok(done(
                it.x,
                it.iterations,
                res,
                Regime::CriticalIndeterminate,
                warnings,
            ));
        }
        return Err(Error::NoConvergence {
            what: "two-provider extinction",
            iterations: it.iterations,
            residual: res,
        });
    }
    let regime = if it.x.iter().all(|&x| x == 1.0) && ex.regime == Regime::SubcriticalAllOne {
        Regime::SubcriticalAllOne
    } else {
        Regime::Supercritical
    };
    Ok(done(it.x, it.iterations, res, regime, warnings))
}

fn mixed_map(laws: &OffspringLaws, full: &[f64], mixed: &[f64]) -> Vec<f64> {
    let mut s = full.to_vec();
    s[..mixed.len()].copy_from_slice(mixed);
    (0..mixed.len()).map(|t| laws.pgf(t, &s)).collect()
}

/// `(K1l, K2l, K3l)` for mixed level index `l` (pair `(l+1, l+2)`):
/// `K2l = (1-theta) sum_{i<N-l-1} theta^i r_{l+i}`, `K1l = delta K2l`,
/// `K3l = (1-theta) sum_i theta^i (1 - r_{l+i})`.
pub fn k_constants(p: &TwoCpParams, l: usize) -> (f64, f64, f64) {
    let n = p.levels();
    let theta = p.theta();
    let r = &p.view_probs;
    let terms = n - 1 - l;
    let k2: f64 = (0..terms)
        .map(|i| (1.0 - theta) * theta.powi(i as i32) * r[l + i])
        .sum();
    let k3: f64 = (0..terms)
        .map(|i| (1.0 - theta) * theta.powi(i as i32) * (1.0 - r[l + i]))
        .sum();
    (p.delta * k2, k2, k3)
}
