//! Parameters, friend laws and offspring generating functions.
//!
//! Levels are 0-based in code: index `l` is level `l + 1` of the timeline.
//! Every timeline type has the same event rate `lambda + nu`; an event is a
//! shift with probability `theta = lambda / (lambda + nu)` and a wake-up
//! otherwise. The acting timeline is always replaced by its offspring.

use rand::Rng;
use rand_distr::{Distribution, Geometric, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const SUM_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Poisson,
    Geometric,
}

/// Law of the friend count `F`. A post of quality `eta` is shared to a batch
/// whose size has mean `m * eta`, `m = E[F]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FriendLaw {
    pub family: Family,
    pub beta: f64,
}

impl FriendLaw {
    pub fn poisson(beta: f64) -> Self {
        Self {
            family: Family::Poisson,
            beta,
        }
    }

    pub fn geometric(beta: f64) -> Self {
        Self {
            family: Family::Geometric,
            beta,
        }
    }

    /// Friend law of the given family whose mean is `m`.
    pub fn with_mean(family: Family, m: f64) -> Self {
        match family {
            Family::Poisson => Self::poisson(m),
            Family::Geometric => Self::geometric(m / (1.0 + m)),
        }
    }

    pub fn mean(&self) -> f64 {
        match self.family {
            Family::Poisson => self.beta,
            Family::Geometric => self.beta / (1.0 - self.beta),
        }
    }

    pub fn mean_shares(&self, eta: f64) -> f64 {
        self.mean() * eta
    }

    /// Continuation probability of the geometric batch: `P(k) = (1-p) p^k`.
    /// Chosen so that the batch mean is exactly `m * eta`.
    fn continuation(&self, eta: f64) -> f64 {
        let b = self.beta;
        b * eta / (1.0 - b + b * eta)
    }

    /// Generating function `f(s, eta)` of the batch size.
    pub fn pgf(&self, s: f64, eta: f64) -> f64 {
        match self.family {
            Family::Poisson => (self.beta * eta * (s - 1.0)).exp(),
            Family::Geometric => {
                let p = self.continuation(eta);
                (1.0 - p) / (1.0 - p * s)
            }
        }
    }

    pub fn pgf_deriv(&self, s: f64, eta: f64) -> f64 {
        match self.family {
            Family::Poisson => self.beta * eta * self.pgf(s, eta),
            Family::Geometric => {
                let p = self.continuation(eta);
                p * (1.0 - p) / ((1.0 - p * s) * (1.0 - p * s))
            }
        }
    }

    pub fn pmf(&self, k: u64, eta: f64) -> f64 {
        match self.family {
            Family::Poisson => {
                let mu = self.beta * eta;
                if mu == 0.0 {
                    return if k == 0 { 1.0 } else { 0.0 };
                }
                let kf = k as f64;
                (kf * mu.ln() - mu - ln_factorial(k)).exp()
            }
            Family::Geometric => {
                let p = self.continuation(eta);
                (1.0 - p) * p.powi(k as i32)
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, eta: f64, rng: &mut R) -> u64 {
        if eta <= 0.0 {
            return 0;
        }
        match self.family {
            Family::Poisson => Poisson::new(self.beta * eta)
                .map(|d| d.sample(rng) as u64)
                .unwrap_or(0),
            Family::Geometric => Geometric::new(1.0 - self.continuation(eta))
                .map(|d| d.sample(rng))
                .unwrap_or(0),
        }
    }

    fn check(&self, out: &mut Vec<String>) {
        match self.family {
            Family::Poisson if !(self.beta > 0.0 && self.beta.is_finite()) => {
                out.push(format!("poisson beta must be positive, got {}", self.beta))
            }
            Family::Geometric if !(self.beta > 0.0 && self.beta < 1.0) => out.push(format!(
                "geometric beta must lie in (0,1), got {}",
                self.beta
            )),
            _ => {}
        }
    }
}

fn ln_factorial(k: u64) -> f64 {
    (1..=k).map(|i| (i as f64).ln()).sum()
}

/// Single content provider.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    pub lambda: f64,
    pub nu: f64,
    pub eta: f64,
    /// `r_l`: probability that a waking user views the post at level `l`.
    pub view_probs: Vec<f64>,
    /// `rho_l`: level at which a shared batch lands.
    pub level_probs: Vec<f64>,
    pub friends: FriendLaw,
}

impl ModelParams {
    pub fn levels(&self) -> usize {
        self.view_probs.len()
    }

    pub fn rate(&self) -> f64 {
        self.lambda + self.nu
    }

    pub fn theta(&self) -> f64 {
        self.lambda / (self.lambda + self.nu)
    }

    /// `c = (1 - theta) m eta`; the per-level constants are `c * rho_l`.
    pub fn c(&self) -> f64 {
        (1.0 - self.theta()) * self.friends.mean_shares(self.eta)
    }

    pub fn c_vec(&self) -> Vec<f64> {
        let c = self.c();
        self.level_probs.iter().map(|rho| c * rho).collect()
    }

    /// `r . c`
    pub fn r_dot_c(&self) -> f64 {
        dot(&self.view_probs, &self.c_vec())
    }

    pub fn with_eta(&self, eta: f64) -> Self {
        Self {
            eta,
            ..self.clone()
        }
    }

    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        check_network(
            self.lambda,
            self.nu,
            &self.view_probs,
            &self.level_probs,
            &self.friends,
            &mut out,
        );
        check_unit("eta", self.eta, &mut out);
        out
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Invalid(v))
        }
    }

    /// `h_l(s)` for level index `l`.
    pub fn offspring_pgf(&self, l: usize, s: &[f64]) -> f64 {
        let n = self.levels();
        let theta = self.theta();
        let r = self.view_probs[l];
        let shift = if l + 1 < n { s[l + 1] } else { 1.0 };
        let batch: f64 = self
            .level_probs
            .iter()
            .zip(s)
            .map(|(rho, &si)| rho * self.friends.pgf(si, self.eta))
            .sum();
        theta * shift + (1.0 - theta) * r * batch + (1.0 - theta) * (1.0 - r)
    }

    pub fn laws(&self) -> OffspringLaws {
        let n = self.levels();
        let theta = self.theta();
        let targets: Vec<(usize, f64)> = self.level_probs.iter().copied().enumerate().collect();
        let laws = (0..n)
            .map(|l| {
                let r = self.view_probs[l];
                let shift = if l + 1 < n {
                    Branch::shift(theta, l + 1)
                } else {
                    Branch::fall_off(theta)
                };
                TypeLaw {
                    branches: vec![
                        shift,
                        Branch::idle((1.0 - theta) * (1.0 - r)),
                        Branch {
                            prob: (1.0 - theta) * r,
                            shift: None,
                            terminal: true,
                            batches: vec![Batch {
                                eta: self.eta,
                                targets: targets.clone(),
                                carries: [true, false],
                            }],
                        },
                    ],
                }
            })
            .collect();
        OffspringLaws {
            friends: self.friends,
            rate: self.rate(),
            laws,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Cp {
    One,
    Two,
}

impl Cp {
    pub fn other(self) -> Self {
        match self {
            Cp::One => Cp::Two,
            Cp::Two => Cp::One,
        }
    }

    pub fn index(self) -> usize {
        match self {
            Cp::One => 0,
            Cp::Two => 1,
        }
    }
}

impl TryFrom<u8> for Cp {
    type Error = String;

    fn try_from(v: u8) -> std::result::Result<Self, String> {
        match v {
            1 => Ok(Cp::One),
            2 => Ok(Cp::Two),
            _ => Err(format!("content provider must be 1 or 2, got {v}")),
        }
    }
}

impl From<Cp> for u8 {
    fn from(cp: Cp) -> u8 {
        cp.index() as u8 + 1
    }
}

/// Timeline type of the two-provider process.
///
/// `Mixed { top: Cp::One, level: l }` is the pair `(l+1, l+2)`: CP1's post at
/// level `l+1`, CP2's directly below. `top: Cp::Two` is the mirror `(l+2, l+1)`.
/// `Exclusive { cp, level }` carries only one provider's post at `level + 1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum TwoCpType {
    Mixed { top: Cp, level: usize },
    Exclusive { cp: Cp, level: usize },
}

impl TwoCpType {
    /// Position in the ordering `[(1,2),(2,1),(2,3),(3,2),..., (1,0)..(N,0), (0,1)..(0,N)]`.
    pub fn index(self, n: usize) -> usize {
        match self {
            TwoCpType::Mixed { top, level } => 2 * level + top.index(),
            TwoCpType::Exclusive { cp: Cp::One, level } => 2 * n - 2 + level,
            TwoCpType::Exclusive { cp: Cp::Two, level } => 3 * n - 2 + level,
        }
    }

    pub fn from_index(i: usize, n: usize) -> Self {
        if i < 2 * n - 2 {
            let top = if i.is_multiple_of(2) {
                Cp::One
            } else {
                Cp::Two
            };
            TwoCpType::Mixed { top, level: i / 2 }
        } else if i < 3 * n - 2 {
            TwoCpType::Exclusive {
                cp: Cp::One,
                level: i - (2 * n - 2),
            }
        } else {
            TwoCpType::Exclusive {
                cp: Cp::Two,
                level: i - (3 * n - 2),
            }
        }
    }

    /// `(level of CP1's post, level of CP2's post)`, 1-based, 0 when absent.
    pub fn levels(self) -> (usize, usize) {
        match self {
            TwoCpType::Mixed {
                top: Cp::One,
                level,
            } => (level + 1, level + 2),
            TwoCpType::Mixed {
                top: Cp::Two,
                level,
            } => (level + 2, level + 1),
            TwoCpType::Exclusive { cp: Cp::One, level } => (level + 1, 0),
            TwoCpType::Exclusive { cp: Cp::Two, level } => (0, level + 1),
        }
    }

    pub fn label(self) -> String {
        let (a, b) = self.levels();
        format!("({a},{b})")
    }

    pub fn carries(self, cp: Cp) -> bool {
        match self {
            TwoCpType::Mixed { .. } => true,
            TwoCpType::Exclusive { cp: c, .. } => c == cp,
        }
    }
}

/// Two competing content providers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TwoCpParams {
    pub lambda: f64,
    pub nu: f64,
    /// Effective (influence-scaled) qualities.
    pub eta1: f64,
    pub eta2: f64,
    pub w1: f64,
    pub w2: f64,
    /// Probability of also viewing the lower of the two posts.
    pub delta: f64,
    /// Probability that a shared pair lands in reversed order.
    pub p: f64,
    pub view_probs: Vec<f64>,
    pub level_probs: Vec<f64>,
    /// `rho_bar_i`, `i = 1..N-1`: landing levels of batches shared from mixed timelines.
    pub mixed_level_probs: Vec<f64>,
    pub friends: FriendLaw,
}

impl TwoCpParams {
    pub fn levels(&self) -> usize {
        self.view_probs.len()
    }

    pub fn dim(&self) -> usize {
        4 * self.levels() - 2
    }

    pub fn rate(&self) -> f64 {
        self.lambda + self.nu
    }

    pub fn theta(&self) -> f64 {
        self.lambda / (self.lambda + self.nu)
    }

    pub fn eta(&self, cp: Cp) -> f64 {
        match cp {
            Cp::One => self.eta1,
            Cp::Two => self.eta2,
        }
    }

    pub fn w(&self, cp: Cp) -> f64 {
        match cp {
            Cp::One => self.w1,
            Cp::Two => self.w2,
        }
    }

    pub fn with_eta(&self, cp: Cp, eta: f64) -> Self {
        let mut out = self.clone();
        match cp {
            Cp::One => out.eta1 = eta,
            Cp::Two => out.eta2 = eta,
        }
        out
    }

    /// Single-provider model of CP `cp`'s exclusive timelines.
    pub fn single(&self, cp: Cp) -> ModelParams {
        ModelParams {
            lambda: self.lambda,
            nu: self.nu,
            eta: self.eta(cp),
            view_probs: self.view_probs.clone(),
            level_probs: self.level_probs.clone(),
            friends: self.friends,
        }
    }

    pub fn c(&self, cp: Cp) -> f64 {
        (1.0 - self.theta()) * self.friends.mean_shares(self.eta(cp))
    }

    /// `c_mx = delta (1 - theta) m eta1 eta2`
    pub fn c_mx(&self) -> f64 {
        self.delta * (1.0 - self.theta()) * self.friends.mean() * self.eta1 * self.eta2
    }

    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        check_network(
            self.lambda,
            self.nu,
            &self.view_probs,
            &self.level_probs,
            &self.friends,
            &mut out,
        );
        let n = self.levels();
        if n < 2 {
            out.push("two providers need at least 2 levels".into());
        }
        check_unit("eta1", self.eta1, &mut out);
        check_unit("eta2", self.eta2, &mut out);
        check_unit("delta", self.delta, &mut out);
        check_unit("p", self.p, &mut out);
        for (name, w) in [("w1", self.w1), ("w2", self.w2)] {
            if !(w >= 1.0 && w.is_finite()) {
                out.push(format!("{name} must be at least 1, got {w}"));
            }
        }
        if n >= 2 {
            check_probs("rho_bar", &self.mixed_level_probs, n - 1, &mut out);
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Invalid(v))
        }
    }

    pub fn types(&self) -> Vec<TwoCpType> {
        let n = self.levels();
        (0..self.dim())
            .map(|i| TwoCpType::from_index(i, n))
            .collect()
    }

    pub fn laws(&self) -> OffspringLaws {
        let n = self.levels();
        let theta = self.theta();
        let (eta1, eta2) = (self.eta1, self.eta2);
        let idx = |t: TwoCpType| t.index(n);
        let bar = &self.mixed_level_probs;
        let excl = |cp: Cp, probs: &[f64]| -> Vec<(usize, f64)> {
            probs
                .iter()
                .enumerate()
                .map(|(i, &w)| (idx(TwoCpType::Exclusive { cp, level: i }), w))
                .collect()
        };
        let carry = |cp: Cp| match cp {
            Cp::One => [true, false],
            Cp::Two => [false, true],
        };
        let mut laws = Vec::with_capacity(self.dim());
        for ty in self.types() {
            let law = match ty {
                TwoCpType::Mixed { top, level } => {
                    let r = self.view_probs[level];
                    let next = if level + 2 < n {
                        TwoCpType::Mixed {
                            top,
                            level: level + 1,
                        }
                    } else {
                        TwoCpType::Exclusive {
                            cp: top,
                            level: n - 1,
                        }
                    };
                    // Same-orientation children with prob 1-p, reversed with prob p.
                    let mixed_targets: Vec<(usize, f64)> = bar
                        .iter()
                        .enumerate()
                        .flat_map(|(i, &w)| {
                            [
                                (idx(TwoCpType::Mixed { top, level: i }), (1.0 - self.p) * w),
                                (
                                    idx(TwoCpType::Mixed {
                                        top: top.other(),
                                        level: i,
                                    }),
                                    self.p * w,
                                ),
                            ]
                        })
                        .collect();
                    TypeLaw {
                        branches: vec![
                            Branch::shift(theta, idx(next)),
                            Branch::idle((1.0 - theta) * (1.0 - r)),
                            Branch {
                                prob: (1.0 - theta) * r * (1.0 - self.delta),
                                shift: None,
                                terminal: true,
                                batches: vec![Batch {
                                    eta: self.eta(top),
                                    targets: excl(top, bar),
                                    carries: carry(top),
                                }],
                            },
                            Branch {
                                prob: (1.0 - theta) * r * self.delta,
                                shift: None,
                                terminal: true,
                                batches: vec![
                                    Batch {
                                        eta: eta1 * eta2,
                                        targets: mixed_targets,
                                        carries: [true, true],
                                    },
                                    Batch {
                                        eta: eta1 * (1.0 - eta2),
                                        targets: excl(Cp::One, bar),
                                        carries: carry(Cp::One),
                                    },
                                    Batch {
                                        eta: eta2 * (1.0 - eta1),
                                        targets: excl(Cp::Two, bar),
                                        carries: carry(Cp::Two),
                                    },
                                ],
                            },
                        ],
                    }
                }
                TwoCpType::Exclusive { cp, level } => {
                    let r = self.view_probs[level];
                    let shift = if level + 1 < n {
                        Branch::shift(
                            theta,
                            idx(TwoCpType::Exclusive {
                                cp,
                                level: level + 1,
                            }),
                        )
                    } else {
                        Branch::fall_off(theta)
                    };
                    TypeLaw {
                        branches: vec![
                            shift,
                            Branch::idle((1.0 - theta) * (1.0 - r)),
                            Branch {
                                prob: (1.0 - theta) * r,
                                shift: None,
                                terminal: true,
                                batches: vec![Batch {
                                    eta: self.eta(cp),
                                    targets: excl(cp, &self.level_probs),
                                    carries: carry(cp),
                                }],
                            },
                        ],
                    }
                }
            };
            laws.push(law);
        }
        OffspringLaws {
            friends: self.friends,
            rate: self.rate(),
            laws,
        }
    }
}

/// A batch of `zeta ~ f(., eta)` recipients, all of one type drawn from `targets`.
#[derive(Clone, Debug, PartialEq)]
pub struct Batch {
    pub eta: f64,
    pub targets: Vec<(usize, f64)>,
    /// Which providers' share counters the batch increments.
    pub carries: [bool; 2],
}

/// One outcome of a timeline's next event.
#[derive(Clone, Debug, PartialEq)]
pub struct Branch {
    pub prob: f64,
    /// Child created by a shift; `None` for wake-ups and for falling off level N.
    pub shift: Option<usize>,
    /// Counted by the event convention (wake-ups and fall-offs).
    pub terminal: bool,
    pub batches: Vec<Batch>,
}

impl Branch {
    fn shift(prob: f64, child: usize) -> Self {
        Self {
            prob,
            shift: Some(child),
            terminal: false,
            batches: vec![],
        }
    }

    fn fall_off(prob: f64) -> Self {
        Self {
            prob,
            shift: None,
            terminal: true,
            batches: vec![],
        }
    }

    fn idle(prob: f64) -> Self {
        Self {
            prob,
            shift: None,
            terminal: true,
            batches: vec![],
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TypeLaw {
    pub branches: Vec<Branch>,
}

/// First-transition laws of every type, the common input of the generic
/// generating-function, mean-matrix and simulation code.
#[derive(Clone, Debug, PartialEq)]
pub struct OffspringLaws {
    pub friends: FriendLaw,
    pub rate: f64,
    pub laws: Vec<TypeLaw>,
}

impl OffspringLaws {
    pub fn dim(&self) -> usize {
        self.laws.len()
    }

    pub fn pgf(&self, ty: usize, s: &[f64]) -> f64 {
        self.laws[ty]
            .branches
            .iter()
            .map(|b| {
                let shift = b.shift.map_or(1.0, |c| s[c]);
                let batches: f64 = b
                    .batches
                    .iter()
                    .map(|batch| {
                        batch
                            .targets
                            .iter()
                            .map(|&(t, w)| w * self.friends.pgf(s[t], batch.eta))
                            .sum::<f64>()
                    })
                    .product();
                b.prob * shift * batches
            })
            .sum()
    }

    /// Row `d pgf(ty, s) / d s_k` of the Jacobian.
    pub fn pgf_gradient(&self, ty: usize, s: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; s.len()];
        for b in &self.laws[ty].branches {
            let shift = b.shift.map_or(1.0, |c| s[c]);
            let values: Vec<f64> = b
                .batches
                .iter()
                .map(|batch| {
                    batch
                        .targets
                        .iter()
                        .map(|&(t, w)| w * self.friends.pgf(s[t], batch.eta))
                        .sum()
                })
                .collect();
            if let Some(c) = b.shift {
                g[c] += b.prob * values.iter().product::<f64>();
            }
            for (j, batch) in b.batches.iter().enumerate() {
                let others: f64 = values
                    .iter()
                    .enumerate()
                    .filter(|&(i, _)| i != j)
                    .map(|(_, v)| v)
                    .product();
                for &(t, w) in &batch.targets {
                    g[t] += b.prob * shift * others * w * self.friends.pgf_deriv(s[t], batch.eta);
                }
            }
        }
        g
    }

    pub fn pgf_all(&self, s: &[f64]) -> Vec<f64> {
        (0..self.dim()).map(|t| self.pgf(t, s)).collect()
    }

    /// `M[i][j]`: expected number of type-`j` children of a type-`i` timeline.
    pub fn mean_matrix(&self) -> Vec<Vec<f64>> {
        let d = self.dim();
        let mut m = vec![vec![0.0; d]; d];
        for (i, law) in self.laws.iter().enumerate() {
            for b in &law.branches {
                if let Some(c) = b.shift {
                    m[i][c] += b.prob;
                }
                for batch in &b.batches {
                    let mean = self.friends.mean_shares(batch.eta);
                    for &(t, w) in &batch.targets {
                        m[i][t] += b.prob * mean * w;
                    }
                }
            }
        }
        m
    }

    /// Expected share recipients per provider generated by one event of each type.
    pub fn mean_recipients(&self) -> Vec<[f64; 2]> {
        self.laws
            .iter()
            .map(|law| {
                let mut out = [0.0; 2];
                for b in &law.branches {
                    for batch in &b.batches {
                        let mean = self.friends.mean_shares(batch.eta);
                        for (k, &c) in batch.carries.iter().enumerate() {
                            if c {
                                out[k] += b.prob * mean;
                            }
                        }
                    }
                }
                out
            })
            .collect()
    }

    /// Probability that one event of each type is counted by the event convention.
    pub fn terminal_probs(&self) -> Vec<f64> {
        self.laws
            .iter()
            .map(|law| {
                law.branches
                    .iter()
                    .filter(|b| b.terminal)
                    .map(|b| b.prob)
                    .sum()
            })
            .collect()
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn check_unit(name: &str, x: f64, out: &mut Vec<String>) {
    if !(0.0..=1.0).contains(&x) {
        out.push(format!("{name} must lie in [0,1], got {x}"));
    }
}

fn check_probs(name: &str, probs: &[f64], len: usize, out: &mut Vec<String>) {
    if probs.len() != len {
        out.push(format!(
            "{name} has {} entries, expected {len}",
            probs.len()
        ));
        return;
    }
    if probs.iter().any(|&x| !(0.0..=1.0).contains(&x)) {
        out.push(format!("{name} entries must lie in [0,1]"));
    }
    let sum: f64 = probs.iter().sum();
    if (sum - 1.0).abs() > SUM_TOL {
        out.push(format!("{name} must sum to 1, sums to {sum}"));
    }
    if probs.first().is_some_and(|&x| x <= 0.0) {
        out.push(format!("{name}_1 must be positive"));
    }
}

fn check_network(
    lambda: f64,
    nu: f64,
    r: &[f64],
    rho: &[f64],
    friends: &FriendLaw,
    out: &mut Vec<String>,
) {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        out.push(format!("lambda must be nonnegative, got {lambda}"));
    }
    if !(nu > 0.0 && nu.is_finite()) {
        out.push(format!("nu must be positive, got {nu}"));
    }
    if r.is_empty() {
        out.push("at least one level is required".into());
        return;
    }
    if r.iter().any(|&x| !(0.0..=1.0).contains(&x)) {
        out.push("view probabilities must lie in [0,1]".into());
    }
    if r.windows(2).any(|w| w[1] > w[0]) {
        out.push("view probabilities not nonincreasing".into());
    }
    check_probs("rho", rho, r.len(), out);
    friends.check(out);
}
