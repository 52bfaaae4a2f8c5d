//! Generator matrices, Perron roots and eigenvector structure.

use std::collections::HashSet;

use nalgebra::{DMatrix, DVector};
use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::norm_inf;
use crate::model::{dot, Cp, ModelParams, OffspringLaws, TwoCpParams, TwoCpType};

const POWER_TOL: f64 = 1e-13;
const POWER_CAP: usize = 1_000_000;
const SQUARINGS: usize = 64;

/// `A = (lambda+nu)(M - I)`, with `M` the mean offspring matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Generator {
    pub a: DMatrix<f64>,
    pub rate: f64,
    pub labels: Vec<String>,
}

impl Generator {
    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn mean_matrix(&self) -> DMatrix<f64> {
        &self.a / self.rate + DMatrix::identity(self.dim(), self.dim())
    }

    /// Generator of an arbitrary set of first-transition laws.
    pub fn from_laws(laws: &OffspringLaws, labels: Vec<String>) -> Self {
        let m = laws.mean_matrix();
        let d = laws.dim();
        let a = DMatrix::from_fn(d, d, |i, j| {
            laws.rate * (m[i][j] - if i == j { 1.0 } else { 0.0 })
        });
        Self {
            a,
            rate: laws.rate,
            labels,
        }
    }

    pub fn submatrix(&self, idx: &[usize]) -> Generator {
        let a = DMatrix::from_fn(idx.len(), idx.len(), |i, j| self.a[(idx[i], idx[j])]);
        let labels = idx.iter().map(|&i| self.labels[i].clone()).collect();
        Generator {
            a,
            rate: self.rate,
            labels,
        }
    }

    /// Strongly connected components of the sparsity pattern of `M`.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let d = self.dim();
        let mut g = DiGraph::<(), ()>::with_capacity(d, d * d);
        let nodes: Vec<_> = (0..d).map(|_| g.add_node(())).collect();
        for i in 0..d {
            for j in 0..d {
                if i != j && self.a[(i, j)] > 0.0 {
                    g.add_edge(nodes[i], nodes[j], ());
                }
            }
        }
        let mut comps: Vec<Vec<usize>> = tarjan_scc(&g)
            .into_iter()
            .map(|c| {
                let mut v: Vec<usize> = c.into_iter().map(|n| n.index()).collect();
                v.sort_unstable();
                v
            })
            .collect();
        comps.sort();
        comps
    }
}

pub fn level_labels(n: usize) -> Vec<String> {
    (1..=n).map(|l| l.to_string()).collect()
}

/// Single-provider generator: `A_lk = (lambda+nu)(c_k r_l - 1{l=k} + theta 1{k=l+1})`.
pub fn build_single(p: &ModelParams) -> Generator {
    let n = p.levels();
    let theta = p.theta();
    let c = p.c_vec();
    let r = &p.view_probs;
    let a = DMatrix::from_fn(n, n, |l, k| {
        let mut x = c[k] * r[l];
        if l == k {
            x -= 1.0;
        }
        if k == l + 1 {
            x += theta;
        }
        p.rate() * x
    });
    Generator {
        a,
        rate: p.rate(),
        labels: level_labels(n),
    }
}

/// Mixed-type generator in the interleaved order `(1,2),(2,1),(2,3),(3,2),...`.
pub fn build_mixed(p: &TwoCpParams) -> Generator {
    let n = p.levels();
    let d = 2 * n - 2;
    let theta = p.theta();
    let cmx = p.c_mx();
    let bar = &p.mixed_level_probs;
    let a = DMatrix::from_fn(d, d, |row, col| {
        let (l, i) = (row / 2, col / 2);
        let same = row % 2 == col % 2;
        let z = if same {
            (1.0 - p.p) * cmx * bar[i]
        } else {
            p.p * cmx * bar[i]
        };
        let mut x = z * p.view_probs[l];
        if row == col {
            x -= 1.0;
        }
        if same && i == l + 1 {
            x += theta;
        }
        p.rate() * x
    });
    let labels = (0..d)
        .map(|i| TwoCpType::from_index(i, n).label())
        .collect();
    Generator {
        a,
        rate: p.rate(),
        labels,
    }
}

/// Full two-provider generator: blocks `[mixed, exclusive CP1, exclusive CP2]`.
pub fn build_full(p: &TwoCpParams) -> Generator {
    let n = p.levels();
    let d = p.dim();
    let theta = p.theta();
    let rate = p.rate();
    let m = p.friends.mean();
    let bar = &p.mixed_level_probs;
    let mut a = DMatrix::zeros(d, d);
    let mx = build_mixed(p);
    a.view_mut((0, 0), (2 * n - 2, 2 * n - 2)).copy_from(&mx.a);
    for cp in [Cp::One, Cp::Two] {
        let off = TwoCpType::Exclusive { cp, level: 0 }.index(n);
        let ex = build_single(&p.single(cp));
        a.view_mut((off, off), (n, n)).copy_from(&ex.a);
        let (own, other) = (p.eta(cp), p.eta(cp.other()));
        // Exclusive CP-cp children per view: from the own-top orientation both
        // the single-view batch and the double-view exclusive batch, from the
        // other orientation only the double-view exclusive batch.
        let own_top = (1.0 - p.delta) * m * own + p.delta * m * own * (1.0 - other);
        let other_top = p.delta * m * own * (1.0 - other);
        for l in 0..n - 1 {
            for top in [Cp::One, Cp::Two] {
                let row = TwoCpType::Mixed { top, level: l }.index(n);
                let k = if top == cp { own_top } else { other_top };
                for (i, &w) in bar.iter().enumerate() {
                    a[(row, off + i)] += rate * (1.0 - theta) * p.view_probs[l] * k * w;
                }
            }
        }
        let last = TwoCpType::Mixed {
            top: cp,
            level: n - 2,
        }
        .index(n);
        a[(last, off + n - 1)] += rate * theta;
    }
    let labels = (0..d)
        .map(|i| TwoCpType::from_index(i, n).label())
        .collect();
    Generator { a, rate, labels }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SpectralData {
    pub alpha: f64,
    /// `alpha / (lambda+nu) + 1`, the Perron root of `M`.
    pub sigma: f64,
    /// Left eigenvector, `u . v = 1`, `sum(u) = 1`.
    pub u: Vec<f64>,
    /// Right eigenvector.
    pub v: Vec<f64>,
    /// `max(|uA - alpha u|_inf, |Av - alpha v|_inf)` for the stored scaling.
    pub residual: f64,
    pub warnings: Vec<String>,
}

impl SpectralData {
    /// Left eigenvector scaled so that `u_1 = 1`.
    pub fn u_first(&self) -> Vec<f64> {
        self.u.iter().map(|x| x / self.u[0]).collect()
    }
}

/// Perron root and eigenvectors of an irreducible generator.
pub fn perron(g: &Generator) -> Result<SpectralData> {
    let comps = g.components();
    if comps.len() > 1 {
        return Err(Error::Reducible {
            components: comps.len(),
        });
    }
    let d = g.dim();
    // M + I is primitive whenever M is irreducible.
    let b = g.mean_matrix() + DMatrix::identity(d, d);
    let (v, sigma_b) = power_vector(&b)?;
    let (u, _) = power_vector(&b.transpose())?;
    let alpha = (sigma_b - 2.0) * g.rate;

    let su: f64 = u.iter().sum();
    let u = u / su;
    let uv = u.dot(&v);
    let v = v / uv;

    let ut = u.transpose();
    let left = (&ut * &g.a - &ut * alpha).amax();
    let right = (&g.a * &v - &v * alpha).amax();
    let residual = left.max(right);
    let scale = g.rate.max(1e-300) * norm_inf(&g.a).max(1.0) * u.amax().max(v.amax());
    if residual > 1e-10 * scale {
        return Err(Error::NoConvergence {
            what: "Perron vector",
            iterations: POWER_CAP,
            residual,
        });
    }
    let mut warnings = Vec::new();
    if alpha.abs() <= 1e-6 * g.rate {
        warnings.push(format!("near-critical: alpha = {alpha:.3e}"));
    }
    Ok(SpectralData {
        alpha,
        sigma: alpha / g.rate + 1.0,
        u: u.iter().copied().collect(),
        v: v.iter().copied().collect(),
        residual,
        warnings,
    })
}

/// Dominant eigenvector of a primitive nonnegative matrix: repeated squaring
/// to reach the rank-one limit, then power iteration to the tolerance.
fn power_vector(b: &DMatrix<f64>) -> Result<(DVector<f64>, f64)> {
    let d = b.nrows();
    let mut p = b / b.amax();
    for _ in 0..SQUARINGS {
        let next = &p * &p;
        let next = &next / next.amax();
        let change = (&next - &p).amax();
        p = next;
        if change < 1e-15 {
            break;
        }
    }
    let mut v = &p * DVector::from_element(d, 1.0);
    v /= v.amax();
    let mut est = 0.0;
    for it in 0..POWER_CAP {
        let w = b * &v;
        let new_est = w.dot(&v) / v.dot(&v);
        let w = &w / w.amax();
        let change = (new_est - est).abs();
        v = w;
        est = new_est;
        if it > 0 && change <= POWER_TOL * est.abs() {
            return Ok((v, est));
        }
    }
    Err(Error::NoConvergence {
        what: "power iteration",
        iterations: POWER_CAP,
        residual: f64::NAN,
    })
}

/// Largest real eigenvalue of a generator with arbitrary block structure:
/// the maximum over its strongly connected diagonal blocks.
pub fn dominant_root(g: &Generator) -> Result<f64> {
    let mut best = f64::NEG_INFINITY;
    for comp in g.components() {
        let root = if comp.len() == 1 {
            g.a[(comp[0], comp[0])]
        } else {
            perron(&g.submatrix(&comp))?.alpha
        };
        best = best.max(root);
    }
    Ok(best)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Regularity {
    pub regular: bool,
    /// Smallest `n` with `M^n > 0` entrywise.
    pub power: Option<usize>,
}

/// Whether some power of `M` is entrywise positive (checked on the sparsity
/// pattern up to Wielandt's bound `(d-1)^2 + 1`).
pub fn check_positive_regular(g: &Generator) -> Regularity {
    let d = g.dim();
    let m = g.mean_matrix();
    let pattern: Vec<Vec<bool>> = (0..d)
        .map(|i| (0..d).map(|j| m[(i, j)] > 0.0).collect())
        .collect();
    let mut pow = pattern.clone();
    let mut seen = HashSet::new();
    let bound = (d - 1) * (d - 1) + 1;
    for n in 1..=bound {
        if pow.iter().all(|row| row.iter().all(|&x| x)) {
            return Regularity {
                regular: true,
                power: Some(n),
            };
        }
        if !seen.insert(pow.clone()) {
            break;
        }
        pow = (0..d)
            .map(|i| {
                (0..d)
                    .map(|j| (0..d).any(|k| pow[i][k] && pattern[k][j]))
                    .collect()
            })
            .collect();
    }
    Regularity {
        regular: false,
        power: None,
    }
}

/// `((r.c - 1)(lambda+nu), (r.c - 1 + theta)(lambda+nu))`
pub fn alpha_bounds(p: &ModelParams) -> (f64, f64) {
    let rc = p.r_dot_c();
    ((rc - 1.0) * p.rate(), (rc - 1.0 + p.theta()) * p.rate())
}

/// Mixed analogue with `c_mx` and `rho_bar` over the first `N-1` levels.
pub fn alpha_bounds_mixed(p: &TwoCpParams) -> (f64, f64) {
    let n = p.levels();
    let rc = p.c_mx() * dot(&p.view_probs[..n - 1], &p.mixed_level_probs);
    ((rc - 1.0) * p.rate(), (rc - 1.0 + p.theta()) * p.rate())
}

/// Large-`N` limit of the threshold for `r_l = d1 d2^l`.
pub fn alpha_asymptotic(p: &ModelParams, d1: f64, d2: f64) -> Result<f64> {
    let bad: Vec<String> = p
        .view_probs
        .iter()
        .enumerate()
        .filter(|&(l, &r)| (r - d1 * d2.powi(l as i32 + 1)).abs() > 1e-12)
        .map(|(l, r)| format!("r_{} = {r} is not d1*d2^{}", l + 1, l + 1))
        .collect();
    if !bad.is_empty() {
        return Err(Error::Invalid(bad));
    }
    Ok((p.r_dot_c() - 1.0 + p.theta() * d2) * p.rate())
}

/// Threshold when timelines are ignored: `(m eta - 1) nu`.
pub fn alpha_no_tl(m: f64, eta: f64, nu: f64) -> f64 {
    (m * eta - 1.0) * nu
}

/// Largest deviation from the closed-form eigenvector recursions
/// `u_l = sum_i (rho_{l-i}/rho_1)(theta/sigma)^i u_1`,
/// `v_l = sum_i (theta/sigma)^i (r_{l+i}/r_N) v_N`,
/// `c_1 (r.u) = sigma u_1` and `r_N (c.v) = sigma v_N`, relative to the
/// largest component.
pub fn eigvec_residuals(s: &SpectralData, p: &ModelParams) -> f64 {
    let n = p.levels();
    let ratio = p.theta() / s.sigma;
    let r = &p.view_probs;
    let rho = &p.level_probs;
    let c = p.c_vec();
    let u = s.u_first();
    let vmax = s.v.iter().fold(0.0f64, |a, &x| a.max(x));
    let v: Vec<f64> = s.v.iter().map(|x| x / vmax).collect();
    let umax = u.iter().fold(0.0f64, |a, &x| a.max(x));
    let mut res: f64 = 0.0;
    for l in 0..n {
        let rec: f64 = (0..=l)
            .map(|i| rho[l - i] / rho[0] * ratio.powi(i as i32))
            .sum();
        res = res.max((u[l] - rec).abs() / umax);
        let rec: f64 = (0..n - l)
            .map(|i| ratio.powi(i as i32) * r[l + i] / r[n - 1])
            .sum::<f64>()
            * v[n - 1];
        res = res.max((v[l] - rec).abs());
    }
    res = res.max((c[0] * dot(r, &u) - s.sigma).abs() / umax);
    res = res.max((r[n - 1] * dot(&c, &v) - s.sigma * v[n - 1]).abs());
    res
}

/// Mixed-generator analogue of [`eigvec_residuals`]: both orientations obey the
/// single-provider recursions with `rho_bar`, so in particular
/// `u_(l+1,l) / u_(2,1) = u_(l,l+1) / u_(1,2)`.
pub fn mixed_eigvec_residuals(s: &SpectralData, p: &TwoCpParams) -> f64 {
    let n = p.levels();
    let ratio = p.theta() / s.sigma;
    let r = &p.view_probs;
    let bar = &p.mixed_level_probs;
    let umax = s.u.iter().fold(0.0f64, |a, &x| a.max(x));
    let vmax = s.v.iter().fold(0.0f64, |a, &x| a.max(x));
    let mut res: f64 = 0.0;
    for o in 0..2 {
        let u1 = s.u[o];
        let vn = s.v[2 * (n - 2) + o];
        for l in 0..n - 1 {
            let rec: f64 = (0..=l)
                .map(|i| bar[l - i] / bar[0] * ratio.powi(i as i32))
                .sum::<f64>()
                * u1;
            res = res.max((s.u[2 * l + o] - rec).abs() / umax);
            let rec: f64 = (0..n - 1 - l)
                .map(|i| ratio.powi(i as i32) * r[l + i] / r[n - 2])
                .sum::<f64>()
                * vn;
            res = res.max((s.v[2 * l + o] - rec).abs() / vmax);
        }
    }
    for l in 0..n - 1 {
        let lhs = s.u[2 * l + 1] / s.u[1];
        let rhs = s.u[2 * l] / s.u[0];
        res = res.max((lhs - rhs).abs() / lhs.abs().max(rhs.abs()).max(1e-300));
    }
    res
}
