//! Event-driven Monte Carlo of the timeline process.
//!
//! Timelines of one type are exchangeable, so a path is a vector of type
//! counts advanced by a Gillespie step: exponential holding time at total rate
//! `(lambda+nu) * population`, a type drawn in proportion to its count, then a
//! branch of that type's first-transition law. Replication `i` draws from
//! stream `i` of a ChaCha8 generator keyed by the master seed, so ensembles are
//! reproducible under any thread count.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::model::{Cp, FriendLaw, ModelParams, OffspringLaws, TwoCpParams, TwoCpType};
use crate::shares::ShareConvention;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    pub replications: usize,
    pub horizon: f64,
    /// A path whose population reaches this size stops as `Escaped`.
    pub pop_cap: u64,
    /// Observation times, nondecreasing and within the horizon.
    pub checkpoints: Vec<f64>,
    pub seed: u64,
    pub convention: ShareConvention,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            replications: 10_000,
            horizon: 10.0,
            pop_cap: 100_000,
            checkpoints: vec![],
            seed: 1,
            convention: ShareConvention::Recipient,
        }
    }
}

impl SimConfig {
    pub fn violations(&self) -> Vec<String> {
        let mut out = vec![];
        if self.replications == 0 {
            out.push("replications must be positive".into());
        }
        if !(self.horizon >= 0.0 && self.horizon.is_finite()) {
            out.push(format!(
                "horizon must be finite and nonnegative, got {}",
                self.horizon
            ));
        }
        if self.pop_cap == 0 {
            out.push("pop_cap must be positive".into());
        }
        if self.checkpoints.windows(2).any(|w| w[1] < w[0]) {
            out.push("checkpoints must be nondecreasing".into());
        }
        if self
            .checkpoints
            .iter()
            .any(|&t| !(0.0..=self.horizon).contains(&t))
        {
            out.push("checkpoints must lie in [0, horizon]".into());
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Extinct,
    Escaped,
    /// Alive and below the cap at the horizon.
    Horizon,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Snapshot {
    pub counts: Vec<u64>,
    pub shares: [u64; 2],
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SamplePath {
    pub status: Status,
    pub end_time: f64,
    pub start: usize,
    /// One entry per checkpoint; `None` after escape.
    pub snapshots: Vec<Option<Snapshot>>,
    /// Time at which the last timeline carrying each provider's post was read.
    pub lost: [Option<f64>; 2],
    /// Timelines carrying each provider's post when the path stopped.
    pub carriers: [u64; 2],
}

struct CompiledBatch {
    eta: f64,
    carries: [bool; 2],
    targets: Vec<usize>,
    pick: Option<WeightedIndex<f64>>,
}

struct CompiledBranch {
    shift: Option<usize>,
    terminal: bool,
    batches: Vec<CompiledBatch>,
}

struct CompiledType {
    pick: WeightedIndex<f64>,
    branches: Vec<CompiledBranch>,
}

/// A process ready for sampling.
pub struct Process {
    rate: f64,
    friends: FriendLaw,
    types: Vec<CompiledType>,
    /// Providers whose post the timeline of each type carries (seed counts).
    seeds: Vec<[bool; 2]>,
    /// Wake-ups and fall-offs are per-timeline events, defined for one provider only.
    single: bool,
    pub labels: Vec<String>,
}

impl Process {
    pub fn new(
        laws: &OffspringLaws,
        seeds: Vec<[bool; 2]>,
        labels: Vec<String>,
        single: bool,
    ) -> Result<Self> {
        let types = laws
            .laws
            .iter()
            .map(|law| {
                let branches = law
                    .branches
                    .iter()
                    .map(|b| {
                        Ok(CompiledBranch {
                            shift: b.shift,
                            terminal: b.terminal,
                            batches: b
                                .batches
                                .iter()
                                .map(|batch| {
                                    let kept: Vec<(usize, f64)> = batch
                                        .targets
                                        .iter()
                                        .copied()
                                        .filter(|&(_, w)| w > 0.0)
                                        .collect();
                                    let pick = if kept.len() > 1 {
                                        Some(
                                            WeightedIndex::new(kept.iter().map(|&(_, w)| w))
                                                .map_err(invalid)?,
                                        )
                                    } else {
                                        None
                                    };
                                    Ok(CompiledBatch {
                                        eta: batch.eta,
                                        carries: batch.carries,
                                        targets: kept.iter().map(|&(t, _)| t).collect(),
                                        pick,
                                    })
                                })
                                .collect::<Result<Vec<_>>>()?,
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(CompiledType {
                    pick: WeightedIndex::new(law.branches.iter().map(|b| b.prob))
                        .map_err(invalid)?,
                    branches,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            rate: laws.rate,
            friends: laws.friends,
            types,
            seeds,
            labels,
            single,
        })
    }

    pub fn single(p: &ModelParams) -> Result<Self> {
        p.validate()?;
        let n = p.levels();
        Self::new(
            &p.laws(),
            vec![[true, false]; n],
            crate::spectral::level_labels(n),
            true,
        )
    }

    pub fn two_cp(p: &TwoCpParams) -> Result<Self> {
        p.validate()?;
        let types = p.types();
        Self::new(
            &p.laws(),
            types
                .iter()
                .map(|t| [t.carries(Cp::One), t.carries(Cp::Two)])
                .collect(),
            types.iter().map(|t| t.label()).collect(),
            false,
        )
    }

    pub fn dim(&self) -> usize {
        self.types.len()
    }

    fn carriers(&self, counts: &[u64]) -> [u64; 2] {
        let mut c = [0; 2];
        for (n, seeds) in counts.iter().zip(&self.seeds) {
            for k in 0..2 {
                if seeds[k] {
                    c[k] += n;
                }
            }
        }
        c
    }

    fn initial_shares(&self, start: usize, conv: ShareConvention) -> [u64; 2] {
        match conv {
            ShareConvention::Recipient => self.seeds[start].map(u64::from),
            ShareConvention::Event => [0, 0],
        }
    }

    /// Applies one event of a type-`ty` timeline.
    fn fire<R: Rng>(
        &self,
        ty: usize,
        counts: &mut [u64],
        shares: &mut [u64; 2],
        conv: ShareConvention,
        rng: &mut R,
    ) -> i64 {
        let law = &self.types[ty];
        let b = &law.branches[law.pick.sample(rng)];
        counts[ty] -= 1;
        let mut born = -1i64;
        if let Some(c) = b.shift {
            counts[c] += 1;
            born += 1;
        }
        if b.terminal && conv == ShareConvention::Event {
            shares[0] += 1;
        }
        for batch in &b.batches {
            let z = self.friends.sample(batch.eta, rng);
            if conv == ShareConvention::Recipient {
                for k in 0..2 {
                    if batch.carries[k] {
                        shares[k] += z;
                    }
                }
            }
            // The whole batch lands on one type.
            let t = match &batch.pick {
                Some(w) => Some(batch.targets[w.sample(rng)]),
                None => batch.targets.first().copied(),
            };
            if let Some(t) = t {
                counts[t] += z;
            }
            born += z as i64;
        }
        born
    }

    /// One path from a type drawn from `start`.
    pub fn path<R: Rng>(
        &self,
        start: &WeightedIndex<f64>,
        cfg: &SimConfig,
        rng: &mut R,
    ) -> SamplePath {
        let s = start.sample(rng);
        let mut counts = vec![0u64; self.dim()];
        counts[s] = 1;
        let mut total: u64 = 1;
        let mut shares = self.initial_shares(s, cfg.convention);
        let mut carriers = self.carriers(&counts);
        let mut lost = [None; 2];
        let mut t = 0.0f64;
        let mut snaps = Vec::with_capacity(cfg.checkpoints.len());
        let record =
            |snaps: &mut Vec<Option<Snapshot>>, counts: &[u64], shares: [u64; 2], upto: f64| {
                while snaps.len() < cfg.checkpoints.len() && cfg.checkpoints[snaps.len()] < upto {
                    snaps.push(Some(Snapshot {
                        counts: counts.to_vec(),
                        shares,
                    }));
                }
            };
        let status = loop {
            if total == 0 {
                record(&mut snaps, &counts, shares, f64::INFINITY);
                break Status::Extinct;
            }
            if total >= cfg.pop_cap {
                record(&mut snaps, &counts, shares, t.max(f64::MIN_POSITIVE));
                snaps.resize(cfg.checkpoints.len(), None);
                break Status::Escaped;
            }
            let dt: f64 = rng.sample::<f64, _>(Exp1) / (self.rate * total as f64);
            let next = t + dt;
            record(&mut snaps, &counts, shares, next);
            if next > cfg.horizon {
                record(&mut snaps, &counts, shares, f64::INFINITY);
                t = cfg.horizon;
                break Status::Horizon;
            }
            t = next;
            let mut k = rng.random_range(0..total);
            let ty = counts
                .iter()
                .position(|&c| {
                    if k < c {
                        true
                    } else {
                        k -= c;
                        false
                    }
                })
                .expect("type counts sum to the population");
            let born = self.fire(ty, &mut counts, &mut shares, cfg.convention, rng);
            total = (total as i64 + born) as u64;
            let now = self.carriers(&counts);
            for k in 0..2 {
                if carriers[k] > 0 && now[k] == 0 {
                    lost[k] = Some(t);
                }
            }
            carriers = now;
        };
        SamplePath {
            status,
            end_time: t,
            start: s,
            snapshots: snaps,
            lost,
            carriers,
        }
    }
}

fn invalid(e: impl std::fmt::Display) -> Error {
    Error::Invalid(vec![e.to_string()])
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckpointStat {
    pub t: f64,
    /// Paths observed at this checkpoint (not escaped before it).
    pub observed: usize,
    pub survivors: usize,
    pub mean_shares: [f64; 2],
    /// Half-width of simultaneous 95% intervals over all checkpoints.
    pub half_width: [f64; 2],
    pub mean_counts: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SimEstimate {
    pub replications: usize,
    pub extinct: usize,
    pub escaped: usize,
    pub horizon: usize,
    pub extinct_fraction: f64,
    /// Wilson 95% interval for the extinction probability.
    pub extinct_ci: (f64, f64),
    /// Paths on which each provider's post died out.
    pub lost: [usize; 2],
    pub checkpoints: Vec<CheckpointStat>,
    #[serde(skip)]
    pub paths: Vec<SamplePath>,
}

/// Runs `cfg.replications` independent paths in parallel. `start` is a
/// distribution over start types (a unit vector for a fixed type).
pub fn run_ensemble(process: &Process, start: &[f64], cfg: &SimConfig) -> Result<SimEstimate> {
    let mut bad = cfg.violations();
    if start.len() != process.dim() {
        bad.push(format!(
            "start distribution has {} entries, expected {}",
            start.len(),
            process.dim()
        ));
    }
    if cfg.convention == ShareConvention::Event && !process.single {
        bad.push("the event convention applies to single-provider runs".into());
    }
    if !bad.is_empty() {
        return Err(Error::Invalid(bad));
    }
    let pick = WeightedIndex::new(start.iter().copied()).map_err(invalid)?;
    let paths: Vec<SamplePath> = (0..cfg.replications)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(i as u64);
            process.path(&pick, cfg, &mut rng)
        })
        .collect();
    Ok(summarize(paths, cfg))
}

/// Normal quantile for simultaneous two-sided 95% coverage of `k` intervals.
pub fn bonferroni_z(k: usize) -> f64 {
    let normal = Normal::standard();
    normal.inverse_cdf(1.0 - 0.05 / (2.0 * k.max(1) as f64))
}

pub fn wilson(successes: usize, n: usize) -> (f64, f64) {
    let z = bonferroni_z(1);
    let n = n as f64;
    let p = successes as f64 / n;
    let centre = (p + z * z / (2.0 * n)) / (1.0 + z * z / n);
    let half = z / (1.0 + z * z / n) * (p * (1.0 - p) / n + z * z / (4.0 * n * n)).sqrt();
    (centre - half, centre + half)
}

fn mean_sd(xs: impl Iterator<Item = f64> + Clone) -> (f64, f64, usize) {
    let n = xs.clone().count();
    if n == 0 {
        return (f64::NAN, f64::NAN, 0);
    }
    let mean = xs.clone().sum::<f64>() / n as f64;
    let var = if n > 1 {
        xs.map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64
    } else {
        0.0
    };
    (mean, var.sqrt(), n)
}

fn summarize(paths: Vec<SamplePath>, cfg: &SimConfig) -> SimEstimate {
    let count = |s: Status| paths.iter().filter(|p| p.status == s).count();
    let (extinct, escaped, horizon) = (
        count(Status::Extinct),
        count(Status::Escaped),
        count(Status::Horizon),
    );
    let z = bonferroni_z(cfg.checkpoints.len());
    let checkpoints = cfg
        .checkpoints
        .iter()
        .enumerate()
        .map(|(k, &t)| {
            let seen: Vec<&Snapshot> = paths
                .iter()
                .filter_map(|p| p.snapshots[k].as_ref())
                .collect();
            let dim = seen.first().map_or(0, |s| s.counts.len());
            let mut mean_shares = [0.0; 2];
            let mut half_width = [0.0; 2];
            for j in 0..2 {
                let (m, sd, n) = mean_sd(seen.iter().map(|s| s.shares[j] as f64));
                mean_shares[j] = m;
                half_width[j] = z * sd / (n as f64).sqrt();
            }
            let mean_counts = (0..dim)
                .map(|l| seen.iter().map(|s| s.counts[l] as f64).sum::<f64>() / seen.len() as f64)
                .collect();
            CheckpointStat {
                t,
                observed: seen.len(),
                survivors: seen
                    .iter()
                    .filter(|s| s.counts.iter().any(|&c| c > 0))
                    .count(),
                mean_shares,
                half_width,
                mean_counts,
            }
        })
        .collect();
    SimEstimate {
        replications: paths.len(),
        extinct,
        escaped,
        horizon,
        extinct_fraction: extinct as f64 / paths.len() as f64,
        extinct_ci: wilson(extinct, paths.len()),
        lost: [0, 1].map(|k| paths.iter().filter(|p| p.lost[k].is_some()).count()),
        checkpoints,
        paths,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MartingalePoint {
    pub t: f64,
    pub mean: f64,
    pub half_width: f64,
    pub observed: usize,
}

/// Sample mean of `W(t) = (v . X(t)) e^{-alpha t}` at every checkpoint, with
/// simultaneous 95% half-widths. Its expectation is `v . E[X(0)]`.
pub fn martingale(
    est: &SimEstimate,
    cfg: &SimConfig,
    v: &[f64],
    alpha: f64,
) -> Vec<MartingalePoint> {
    let z = bonferroni_z(cfg.checkpoints.len());
    cfg.checkpoints
        .iter()
        .enumerate()
        .map(|(k, &t)| {
            let w = est
                .paths
                .iter()
                .filter_map(|p| p.snapshots[k].as_ref())
                .map(|s| {
                    s.counts
                        .iter()
                        .zip(v)
                        .map(|(&c, v)| c as f64 * v)
                        .sum::<f64>()
                        * (-alpha * t).exp()
                });
            let (mean, sd, n) = mean_sd(w);
            MartingalePoint {
                t,
                mean,
                half_width: z * sd / (n as f64).sqrt(),
                observed: n,
            }
        })
        .collect()
}

/// Pooled type composition of surviving paths at checkpoint `k`.
pub fn survivor_composition(est: &SimEstimate, k: usize) -> Vec<f64> {
    let mut acc: Vec<f64> = vec![];
    for s in est.paths.iter().filter_map(|p| p.snapshots[k].as_ref()) {
        if acc.is_empty() {
            acc = vec![0.0; s.counts.len()];
        }
        for (a, &c) in acc.iter_mut().zip(&s.counts) {
            *a += c as f64;
        }
    }
    let total: f64 = acc.iter().sum();
    acc.iter().map(|a| a / total).collect()
}

/// Unit start distribution on one type.
pub fn start_at(dim: usize, ty: usize) -> Vec<f64> {
    let mut s = vec![0.0; dim];
    s[ty] = 1.0;
    s
}

/// Start at a two-provider type.
pub fn start_two_cp(p: &TwoCpParams, ty: TwoCpType) -> Vec<f64> {
    start_at(p.dim(), ty.index(p.levels()))
}
