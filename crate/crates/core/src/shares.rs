//! Expected shares: exact trajectories, growth asymptotes, eventual totals in
//! the subcritical regime and the two-provider coefficient systems.
//!
//! `y_l(t)` counts the seed timeline plus every share recipient up to time `t`
//! when starting from one type-`l` timeline. It solves
//! `y' = A y + (lambda+nu) k`, `y(0) = 1`, with `k_l` the probability that an
//! event of a type-`l` timeline removes the post (a wake-up, or a shift off
//! the last level). Eventual totals in the subcritical regime exclude the seed.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{expm, solve};
use crate::model::{Cp, ModelParams, TwoCpParams, TwoCpType};
use crate::spectral::{build_full, build_single, perron, Generator};

/// What the share counter of a path counts.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ShareConvention {
    /// Seed plus every share recipient.
    #[default]
    Recipient,
    /// Wake-ups and shifts off the last level, starting from zero.
    Event,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SharesTrajectory {
    pub t: Vec<f64>,
    /// Start-type labels.
    pub labels: Vec<String>,
    /// `y[i][l]`: expected shares at `t[i]` from one timeline of type `l`.
    pub y: Vec<Vec<f64>>,
}

/// `e^{At} y0 + int_0^t e^{As} ds f`, via the exponential of `[[A, f], [0, 0]]`.
pub fn affine_flow(a: &DMatrix<f64>, f: &DVector<f64>, y0: &DVector<f64>, t: f64) -> DVector<f64> {
    let d = a.nrows();
    let mut aug = DMatrix::zeros(d + 1, d + 1);
    aug.view_mut((0, 0), (d, d)).copy_from(&(a * t));
    aug.view_mut((0, d), (d, 1)).copy_from(&(f * t));
    let e = expm(&aug);
    e.view((0, 0), (d, d)) * y0 + e.view((0, d), (d, 1))
}

fn terminal_forcing(p: &ModelParams) -> DVector<f64> {
    let n = p.levels();
    let theta = p.theta();
    DVector::from_fn(n, |l, _| {
        (1.0 - theta) + if l + 1 == n { theta } else { 0.0 }
    })
}

fn initial(p: &ModelParams, conv: ShareConvention) -> DVector<f64> {
    let n = p.levels();
    match conv {
        ShareConvention::Recipient => DVector::from_element(n, 1.0),
        ShareConvention::Event => DVector::zeros(n),
    }
}

/// `w = (lambda+nu) A^{-1} k`
fn forcing_solve(g: &Generator, p: &ModelParams) -> Result<DVector<f64>> {
    solve(&g.a, &(terminal_forcing(p) * p.rate()))
}

/// Exact expected shares `y(t) = e^{At}(y(0) + w) - w` on a time grid.
pub fn viral_trajectory(
    p: &ModelParams,
    t_grid: &[f64],
    conv: ShareConvention,
) -> Result<SharesTrajectory> {
    p.validate()?;
    let g = build_single(p);
    let alpha = perron(&g)?.alpha;
    if alpha <= 0.0 {
        return Err(Error::Regime(format!(
            "alpha = {alpha:.6e} <= 0: shares stay bounded, use the eventual totals"
        )));
    }
    let w = forcing_solve(&g, p)?;
    let start = initial(p, conv) + &w;
    let y = t_grid
        .iter()
        .map(|&t| (expm(&(&g.a * t)) * &start - &w).iter().copied().collect())
        .collect();
    Ok(SharesTrajectory {
        t: t_grid.to_vec(),
        labels: g.labels,
        y,
    })
}

/// Expected shares for any regime by direct integration of the linear system.
pub fn exact_trajectory(
    p: &ModelParams,
    t_grid: &[f64],
    conv: ShareConvention,
) -> Result<SharesTrajectory> {
    p.validate()?;
    let g = build_single(p);
    let f = terminal_forcing(p) * p.rate();
    let y0 = initial(p, conv);
    let y = t_grid
        .iter()
        .map(|&t| affine_flow(&g.a, &f, &y0, t).iter().copied().collect())
        .collect();
    Ok(SharesTrajectory {
        t: t_grid.to_vec(),
        labels: g.labels,
        y,
    })
}

/// Large-`t` form `y_l(t) ~ d_l + e_l e^{alpha t}`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Asymptote {
    pub alpha: f64,
    pub e: Vec<f64>,
    pub d: Vec<f64>,
}

/// With `u . v = 1`: `e_l = v_l [sum(u)(1 + nu/alpha) + (lambda/alpha) u_N]` for
/// recipient counts (the seed contributes `v_l sum(u)`), `d = -w`.
pub fn viral_asymptote(p: &ModelParams, conv: ShareConvention) -> Result<Asymptote> {
    p.validate()?;
    let g = build_single(p);
    let s = perron(&g)?;
    let alpha = s.alpha;
    if alpha <= 0.0 {
        return Err(Error::Regime(format!(
            "alpha = {alpha:.6e} <= 0: no exponential growth"
        )));
    }
    let w = forcing_solve(&g, p)?;
    let n = p.levels();
    let su: f64 = s.u.iter().sum();
    let forced = su * p.nu / alpha + p.lambda / alpha * s.u[n - 1];
    let scale = match conv {
        ShareConvention::Recipient => su + forced,
        ShareConvention::Event => forced,
    };
    Ok(Asymptote {
        alpha,
        e: s.v.iter().map(|v| v * scale).collect(),
        d: w.iter().map(|x| -x).collect(),
    })
}

/// Expected eventual shares (seed excluded) of a subcritical post.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NonviralShares {
    pub y: Vec<f64>,
    pub y_dot_rho: f64,
    /// `(1-theta) m eta sum_l rho_l sum_{j>=l} theta^{j-l} r_j`: mean number of
    /// timelines a freshly shared post reaches.
    pub o_mean: f64,
}

/// `sum_{j>=l} theta^{j-l} r_j` for every level.
fn shift_weighted_views(p: &ModelParams) -> Vec<f64> {
    let n = p.levels();
    let theta = p.theta();
    let mut g = vec![0.0; n];
    let mut acc = 0.0;
    for l in (0..n).rev() {
        acc = p.view_probs[l] + theta * acc;
        g[l] = acc;
    }
    g
}

/// Closed form `y.rho = a/(1-a)` and `y_l = c (1 + y.rho) sum_{j>=l} theta^{j-l} r_j`.
pub fn nonviral_expected(p: &ModelParams) -> Result<NonviralShares> {
    p.validate()?;
    let g = shift_weighted_views(p);
    let c = p.c();
    let a = c * p
        .level_probs
        .iter()
        .zip(&g)
        .map(|(rho, x)| rho * x)
        .sum::<f64>();
    if a >= 1.0 {
        return Err(Error::Regime(format!(
            "denominator nonpositive: not in sub-critical domain (reach {a:.6} >= 1)"
        )));
    }
    let y_dot_rho = a / (1.0 - a);
    Ok(NonviralShares {
        y: g.iter().map(|x| c * (1.0 + y_dot_rho) * x).collect(),
        y_dot_rho,
        o_mean: a,
    })
}

/// `max_l |y_l - theta y_{l+1} - (1-theta) r_l m eta (1 + y.rho)|`.
pub fn nonviral_residual(y: &[f64], p: &ModelParams) -> f64 {
    let n = p.levels();
    let theta = p.theta();
    let yr: f64 = y.iter().zip(&p.level_probs).map(|(a, b)| a * b).sum();
    (0..n)
        .map(|l| {
            let next = if l + 1 < n { y[l + 1] } else { 0.0 };
            (y[l] - theta * next - p.c() * p.view_probs[l] * (1.0 + yr)).abs()
        })
        .fold(0.0, f64::max)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GeometricLimit {
    pub o_mean: f64,
    pub y_dot_rho: f64,
}

/// Infinite-depth limit for `r_l = d1 d2^l` and `rho_l ∝ rho^l`:
/// `O = (1-theta) m eta (1-rho) d1 d2 / ((1 - theta d2)(1 - rho d2))`.
pub fn nonviral_geometric_limit(
    p: &ModelParams,
    d1: f64,
    d2: f64,
    rho: f64,
) -> Result<GeometricLimit> {
    let o = p.c() * (1.0 - rho) * d1 * d2 / ((1.0 - p.theta() * d2) * (1.0 - rho * d2));
    if o >= 1.0 {
        return Err(Error::Regime(format!(
            "aggregate reach {o:.6} >= 1: not subcritical"
        )));
    }
    Ok(GeometricLimit {
        o_mean: o,
        y_dot_rho: o / (1.0 - o),
    })
}

/// Reach of a shared post when timelines are ignored.
pub fn o_mean_no_tl(m: f64, eta: f64) -> f64 {
    m * eta
}

/// Coefficients of one mode `e^{a t}` of the mixed-type shares, given the
/// exclusive-type coefficients of the same mode.
///
/// With discount `x = (lambda+nu)/(lambda+nu+a)` a mode solves
/// `Z = x M Z + (x-dependent forcing)`; along the shift chain this leaves two
/// unknowns, the `rho_bar` aggregates of both orientations.
struct MixedMode {
    own: Vec<f64>,
    oth: Vec<f64>,
}

struct MixedSystem<'a> {
    p: &'a TwoCpParams,
    cp: Cp,
}

impl MixedSystem<'_> {
    fn c1(&self) -> f64 {
        self.p.c(self.cp)
    }

    fn kappas(&self) -> (f64, f64) {
        let p = self.p;
        let other = p.eta(self.cp.other());
        (
            1.0 - p.delta + p.delta * (1.0 - other),
            p.delta * (1.0 - other),
        )
    }

    /// `R_l(x) = sum_{i<N-1-l} x^{i+1} theta^i r_{l+i}` and tail `(x theta)^{N-1-l}`.
    fn chain(&self, x: f64) -> (Vec<f64>, Vec<f64>) {
        let p = self.p;
        let n = p.levels();
        let theta = p.theta();
        (0..n - 1)
            .map(|l| {
                let r: f64 = (0..n - 1 - l)
                    .map(|i| x.powi(i as i32 + 1) * theta.powi(i as i32) * p.view_probs[l + i])
                    .sum();
                (r, (x * theta).powi((n - 1 - l) as i32))
            })
            .unzip()
    }

    /// `O(x) = sum_l rho_bar_l R_l(x)`.
    fn o(&self, x: f64) -> f64 {
        let (r, _) = self.chain(x);
        r.iter()
            .zip(&self.p.mixed_level_probs)
            .map(|(a, b)| a * b)
            .sum()
    }

    fn t(&self, x: f64) -> f64 {
        let (_, tail) = self.chain(x);
        tail.iter()
            .zip(&self.p.mixed_level_probs)
            .map(|(a, b)| a * b)
            .sum()
    }

    fn mode(&self, x: f64, ex: &[f64], forced: bool) -> Result<MixedMode> {
        let p = self.p;
        let n = p.levels();
        let bar = &p.mixed_level_probs;
        let c1 = self.c1();
        let cmx = p.c_mx();
        let (k_own, k_oth) = self.kappas();
        let (r, tail) = self.chain(x);
        let o: f64 = r.iter().zip(bar).map(|(a, b)| a * b).sum();
        let t: f64 = tail.iter().zip(bar).map(|(a, b)| a * b).sum();
        let ex_bar: f64 = bar.iter().zip(ex).map(|(a, b)| a * b).sum();
        let ex_last = ex[n - 1];
        let (f1, f2) = if forced {
            (c1, c1 * p.delta)
        } else {
            (0.0, 0.0)
        };
        let q = 1.0 - p.p;
        let m = nalgebra::Matrix2::new(
            1.0 - cmx * o * q,
            -cmx * o * p.p,
            -cmx * o * p.p,
            1.0 - cmx * o * q,
        );
        let rhs = nalgebra::Vector2::new(
            o * (f1 + c1 * k_own * ex_bar) + t * ex_last,
            o * (f2 + c1 * k_oth * ex_bar),
        );
        let det = m.determinant();
        if det.abs() < 1e-12 {
            return Err(Error::Singular { rcond: det.abs() });
        }
        let s = m.lu().solve(&rhs).ok_or(Error::Singular { rcond: 0.0 })?;
        let y1 = f1 + cmx * (q * s[0] + p.p * s[1]) + c1 * k_own * ex_bar;
        let y2 = f2 + cmx * (p.p * s[0] + q * s[1]) + c1 * k_oth * ex_bar;
        Ok(MixedMode {
            own: (0..n - 1).map(|l| r[l] * y1 + tail[l] * ex_last).collect(),
            oth: (0..n - 1).map(|l| r[l] * y2).collect(),
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CoefficientRegime {
    /// `c_mx O_mx < 1`: `y = d + e e^{alpha_cp t}`.
    TwoTerm,
    /// `c_mx O_mx > 1`: an extra `g e^{alpha_g t}` mode from the mixed types.
    ThreeTerm,
}

/// Coefficient form of one provider's expected shares in competition.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TwoCpShares {
    pub cp: Cp,
    /// Mixed types of both orientations followed by the provider's exclusive types.
    pub labels: Vec<String>,
    #[serde(skip)]
    pub types: Vec<TwoCpType>,
    pub d: Vec<f64>,
    pub e: Vec<f64>,
    pub g: Vec<f64>,
    pub regime: CoefficientRegime,
    pub alpha_cp: f64,
    /// Growth rate of the `g` mode: the Perron root of the mixed block.
    pub alpha_g: Option<f64>,
    /// `(c_mx O_mx - 1)(lambda+nu)`, first-order approximation of `alpha_g`.
    pub alpha_star: f64,
    pub c_mx: f64,
    pub o_mx: f64,
    /// `(lambda+nu)/(lambda+nu+alpha_cp)`
    pub alpha_lambda: f64,
}

impl TwoCpShares {
    pub fn eval(&self, ty: TwoCpType, t: f64) -> f64 {
        let i = self
            .types
            .iter()
            .position(|&x| x == ty)
            .expect("type carries this provider's post");
        let mut y = self.d[i] + self.e[i] * (self.alpha_cp * t).exp();
        if let Some(a) = self.alpha_g {
            y += self.g[i] * (a * t).exp();
        }
        y
    }

    /// `(d, e, g)` aggregated with `rho_bar` over both mixed orientations.
    pub fn aggregates(&self, rho_bar: &[f64]) -> (f64, f64, f64) {
        let mut out = (0.0, 0.0, 0.0);
        for (i, ty) in self.types.iter().enumerate() {
            if let TwoCpType::Mixed { level, .. } = *ty {
                out.0 += rho_bar[level] * self.d[i];
                out.1 += rho_bar[level] * self.e[i];
                out.2 += rho_bar[level] * self.g[i];
            }
        }
        out
    }
}

/// Coefficients of `y^cp_{l,k}(t)` for every type carrying CP `cp`'s post.
pub fn two_cp_coefficients(p: &TwoCpParams, cp: Cp) -> Result<TwoCpShares> {
    p.validate()?;
    let n = p.levels();
    let single = p.single(cp);
    let asym = viral_asymptote(&single, ShareConvention::Recipient)?;
    let sys = MixedSystem { p, cp };
    let alpha_cp = asym.alpha;
    let x1 = p.rate() / (p.rate() + alpha_cp);
    let o_mx = sys.o(1.0);
    let c_mx = p.c_mx();
    let regime = if c_mx * o_mx < 1.0 {
        CoefficientRegime::TwoTerm
    } else {
        CoefficientRegime::ThreeTerm
    };
    if regime == CoefficientRegime::ThreeTerm && c_mx * o_mx * x1 >= 1.0 {
        return Err(Error::OpenCase {
            value: c_mx * o_mx * x1,
        });
    }

    // Constant mode in seed-excluded units, then shifted by the seed.
    let d_ex: Vec<f64> = asym.d.iter().map(|d| d - 1.0).collect();
    let dm = sys.mode(1.0, &d_ex, true)?;
    let em = sys.mode(x1, &asym.e, false)?;

    let mut types = Vec::with_capacity(3 * n - 2);
    let (mut d, mut e) = (Vec::new(), Vec::new());
    for l in 0..n - 1 {
        for top in [Cp::One, Cp::Two] {
            types.push(TwoCpType::Mixed { top, level: l });
            let own = top == cp;
            d.push(1.0 + if own { dm.own[l] } else { dm.oth[l] });
            e.push(if own { em.own[l] } else { em.oth[l] });
        }
    }
    for l in 0..n {
        types.push(TwoCpType::Exclusive { cp, level: l });
        d.push(asym.d[l]);
        e.push(asym.e[l]);
    }
    let alpha_g = match regime {
        CoefficientRegime::TwoTerm => None,
        CoefficientRegime::ThreeTerm => Some(perron(&crate::spectral::build_mixed(p))?.alpha),
    };
    let g = types
        .iter()
        .enumerate()
        .map(|(i, ty)| match (regime, ty) {
            (CoefficientRegime::ThreeTerm, TwoCpType::Mixed { .. }) => 1.0 - d[i] - e[i],
            _ => 0.0,
        })
        .collect();
    Ok(TwoCpShares {
        cp,
        labels: types.iter().map(|t| t.label()).collect(),
        types,
        d,
        e,
        g,
        regime,
        alpha_cp,
        alpha_g,
        alpha_star: (c_mx * o_mx - 1.0) * p.rate(),
        c_mx,
        o_mx,
        alpha_lambda: x1,
    })
}

/// Closed forms of the `rho_bar` aggregates `sum (d_(l,l+1) + d_(l+1,l))` and
/// the same for `e`, obtained by summing the two orientation equations.
pub fn two_cp_aggregate_closed_form(p: &TwoCpParams, cp: Cp) -> Result<(f64, f64)> {
    let single = p.single(cp);
    let asym = viral_asymptote(&single, ShareConvention::Recipient)?;
    let sys = MixedSystem { p, cp };
    let n = p.levels();
    let bar = &p.mixed_level_probs;
    let c1 = sys.c1();
    let cmx = p.c_mx();
    let (k_own, k_oth) = sys.kappas();
    let mix = |v: &[f64]| -> f64 { bar.iter().zip(v).map(|(a, b)| a * b).sum() };
    let d_ex: Vec<f64> = asym.d.iter().map(|d| d - 1.0).collect();
    let o = sys.o(1.0);
    let d_sum = (o * (c1 * (1.0 + p.delta) + c1 * (k_own + k_oth) * mix(&d_ex))
        + sys.t(1.0) * d_ex[n - 1])
        / (1.0 - cmx * o);
    let x = p.rate() / (p.rate() + asym.alpha);
    let ox = sys.o(x);
    let e_sum =
        (ox * c1 * (k_own + k_oth) * mix(&asym.e) + sys.t(x) * asym.e[n - 1]) / (1.0 - cmx * ox);
    Ok((2.0 + d_sum, e_sum))
}

/// Expected shares of CP `cp` from every two-provider type, by direct
/// integration of the full linear system (any regime). Recipients solve
/// `z' = A z + (lambda+nu) b` from zero; the seed is added for types carrying the post.
pub fn two_cp_exact(p: &TwoCpParams, cp: Cp, t_grid: &[f64]) -> Result<SharesTrajectory> {
    p.validate()?;
    let g = build_full(p);
    let laws = p.laws();
    let b = laws.mean_recipients();
    let n = p.levels();
    let f = DVector::from_fn(p.dim(), |i, _| p.rate() * b[i][cp.index()]);
    let seed = DVector::from_fn(p.dim(), |i, _| {
        if TwoCpType::from_index(i, n).carries(cp) {
            1.0
        } else {
            0.0
        }
    });
    let zero = DVector::zeros(p.dim());
    let y = t_grid
        .iter()
        .map(|&t| {
            (affine_flow(&g.a, &f, &zero, t) + &seed)
                .iter()
                .copied()
                .collect()
        })
        .collect();
    Ok(SharesTrajectory {
        t: t_grid.to_vec(),
        labels: g.labels,
        y,
    })
}

/// Eventual (seed-excluded) shares of CP `cp` in the subcritical regime.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TwoCpNonviral {
    pub cp: Cp,
    /// Types `(l,l+1)`.
    pub y_mx1: Vec<f64>,
    /// Types `(l+1,l)`.
    pub y_mx2: Vec<f64>,
    pub y_ex: Vec<f64>,
    /// `sum_l rho_bar_l (y_(l,l+1) + y_(l+1,l))`.
    pub y_mx_dot: f64,
    pub o_mx: f64,
    pub c_mx: f64,
}

pub fn two_cp_nonviral(p: &TwoCpParams, cp: Cp) -> Result<TwoCpNonviral> {
    p.validate()?;
    let ex = nonviral_expected(&p.single(cp))?;
    let sys = MixedSystem { p, cp };
    let o_mx = sys.o(1.0);
    let c_mx = p.c_mx();
    if 1.0 - c_mx * o_mx <= 0.0 {
        return Err(Error::Regime(format!(
            "1 - c_mx O_mx = {:.6} <= 0: mixed types supercritical",
            1.0 - c_mx * o_mx
        )));
    }
    let m = sys.mode(1.0, &ex.y, true)?;
    let (y_mx1, y_mx2) = match cp {
        Cp::One => (m.own, m.oth),
        Cp::Two => (m.oth, m.own),
    };
    let bar = &p.mixed_level_probs;
    let y_mx_dot = bar
        .iter()
        .enumerate()
        .map(|(l, w)| w * (y_mx1[l] + y_mx2[l]))
        .sum();
    Ok(TwoCpNonviral {
        cp,
        y_mx1,
        y_mx2,
        y_ex: ex.y,
        y_mx_dot,
        o_mx,
        c_mx,
    })
}

/// Closed form of `y_mx . rho_bar`:
/// `[O (c1 (1+delta) + c1 (kappa_own + kappa_other) y_ex . rho_bar) + T y_ex,N] / (1 - c_mx O)`.
pub fn two_cp_nonviral_closed_form(p: &TwoCpParams, cp: Cp) -> Result<f64> {
    let ex = nonviral_expected(&p.single(cp))?;
    let sys = MixedSystem { p, cp };
    let (k_own, k_oth) = sys.kappas();
    let c1 = sys.c1();
    let o = sys.o(1.0);
    let ex_bar: f64 = p
        .mixed_level_probs
        .iter()
        .zip(&ex.y)
        .map(|(a, b)| a * b)
        .sum();
    let n = p.levels();
    Ok(
        (o * (c1 * (1.0 + p.delta) + c1 * (k_own + k_oth) * ex_bar) + sys.t(1.0) * ex.y[n - 1])
            / (1.0 - p.c_mx() * o),
    )
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TwoCpGeometricLimit {
    pub o_mx: f64,
    pub y_mx_dot: f64,
}

/// Infinite-depth limit of [`two_cp_nonviral_closed_form`] for `r_l = d1 d2^l`,
/// `rho_l ∝ rho^l` and `rho_bar_l ∝ rho_bar^l`:
/// `O_mx = d1 d2 (1 - rho_bar) / ((1 - d2 rho_bar)(1 - theta d2))`.
pub fn two_cp_nonviral_limit(
    p: &TwoCpParams,
    cp: Cp,
    d1: f64,
    d2: f64,
    rho: f64,
    rho_bar: f64,
) -> Result<TwoCpGeometricLimit> {
    let theta = p.theta();
    let o_mx = d1 * d2 * (1.0 - rho_bar) / ((1.0 - d2 * rho_bar) * (1.0 - theta * d2));
    let single = p.single(cp);
    let y_rho = nonviral_geometric_limit(&single, d1, d2, rho)?.y_dot_rho;
    let c1 = p.c(cp);
    let ex_bar = c1 * (1.0 + y_rho) * o_mx;
    let sys = MixedSystem { p, cp };
    let (k_own, k_oth) = sys.kappas();
    let denom = 1.0 - p.c_mx() * o_mx;
    if denom <= 0.0 {
        return Err(Error::Regime("1 - c_mx O_mx <= 0 in the limit".into()));
    }
    Ok(TwoCpGeometricLimit {
        o_mx,
        y_mx_dot: o_mx * (c1 * (1.0 + p.delta) + c1 * (k_own + k_oth) * ex_bar) / denom,
    })
}
