//! Acceptance suite: one PASS/FAIL line per criterion.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

use viral_timeline::cli::{execute, Command, ExperimentConfig, Options};
use viral_timeline::extinction::{level_relation_residual, solve_single, solve_two_cp};
use viral_timeline::model::{Cp, FriendLaw, ModelParams, TwoCpParams, TwoCpType};
use viral_timeline::optimize::minimize_scalar;
use viral_timeline::shares::{
    exact_trajectory, nonviral_expected, nonviral_geometric_limit, nonviral_residual,
    two_cp_coefficients, two_cp_nonviral, two_cp_nonviral_closed_form, two_cp_nonviral_limit,
    CoefficientRegime, ShareConvention,
};
use viral_timeline::simulate::{
    bonferroni_z, martingale, run_ensemble, start_at, start_two_cp, survivor_composition, Process,
    SimConfig, SimEstimate, Status,
};
use viral_timeline::spectral::{
    alpha_asymptotic, alpha_bounds, alpha_bounds_mixed, build_mixed, build_single,
    eigvec_residuals, mixed_eigvec_residuals, perron,
};

struct Outcome {
    ok: bool,
    detail: String,
}

fn outcome(ok: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        ok,
        detail: detail.into(),
    }
}

fn repo_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn geo(n: usize, q: f64) -> Vec<f64> {
    let raw: Vec<f64> = (1..=n).map(|l| q.powi(l as i32)).collect();
    let s: f64 = raw.iter().sum();
    raw.iter().map(|x| x / s).collect()
}

fn random_probs(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let mut v: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
    v[0] += 0.05;
    let s: f64 = v.iter().sum();
    v.iter().map(|x| x / s).collect()
}

fn random_friends(rng: &mut ChaCha8Rng) -> FriendLaw {
    let m = rng.random_range(0.1..8.0);
    if rng.random::<bool>() {
        FriendLaw::poisson(m)
    } else {
        FriendLaw::with_mean(viral_timeline::model::Family::Geometric, m)
    }
}

fn random_views(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let mut r: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..=1.0)).collect();
    r.sort_by(|a, b| b.partial_cmp(a).unwrap());
    r
}

fn random_single(rng: &mut ChaCha8Rng) -> ModelParams {
    let n = rng.random_range(2..=8);
    ModelParams {
        lambda: rng.random_range(0.01..5.0),
        nu: rng.random_range(0.1..5.0),
        eta: rng.random_range(0.01..=1.0),
        view_probs: random_views(rng, n),
        level_probs: random_probs(rng, n),
        friends: random_friends(rng),
    }
}

/// At least two mixed levels: with one there is no shift chain and the root
/// sits on the lower bound.
fn random_mixed(rng: &mut ChaCha8Rng) -> TwoCpParams {
    let n = rng.random_range(3..=8);
    let w1 = rng.random_range(1.0..1.5);
    let w2 = rng.random_range(1.0..1.5);
    TwoCpParams {
        lambda: rng.random_range(0.01..5.0),
        nu: rng.random_range(0.1..5.0),
        eta1: rng.random_range(0.05..=1.0) / w1,
        eta2: rng.random_range(0.05..=1.0) / w2,
        w1,
        w2,
        delta: rng.random_range(0.05..=1.0),
        p: rng.random_range(0.0..=1.0),
        view_probs: random_views(rng, n),
        level_probs: random_probs(rng, n),
        mixed_level_probs: random_probs(rng, n - 1),
        friends: random_friends(rng),
    }
}

fn criteria_1_2() -> (Outcome, Outcome) {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut outside, mut worst_res, mut failures) = (0, 0.0f64, 0);
    for _ in 0..1000 {
        let p = random_single(&mut rng);
        match perron(&build_single(&p)) {
            Ok(s) => {
                let (lo, hi) = alpha_bounds(&p);
                if !(lo < s.alpha && s.alpha < hi) {
                    outside += 1;
                }
                worst_res = worst_res.max(eigvec_residuals(&s, &p));
            }
            Err(_) => failures += 1,
        }
    }
    for _ in 0..200 {
        let p = random_mixed(&mut rng);
        match perron(&build_mixed(&p)) {
            Ok(s) => {
                let (lo, hi) = alpha_bounds_mixed(&p);
                if !(lo < s.alpha && s.alpha < hi) {
                    outside += 1;
                }
                worst_res = worst_res.max(mixed_eigvec_residuals(&s, &p));
            }
            Err(_) => failures += 1,
        }
    }
    let secs = start.elapsed().as_secs_f64();
    (
        outcome(
            outside == 0 && failures == 0 && secs < 30.0,
            format!(
                "1200 instances, {outside} outside bounds, {failures} solver failures, {secs:.1}s"
            ),
        ),
        outcome(
            worst_res <= 1e-9 && failures == 0,
            format!("worst recursion residual {worst_res:.2e}"),
        ),
    )
}

fn criterion_3() -> Outcome {
    let start = Instant::now();
    let mut lines = vec![];
    let mut ok = true;
    for d2 in [0.5f64, 0.7, 0.9] {
        let d1 = 1.0 / d2;
        let mut gaps = vec![];
        for n in [10usize, 20, 40, 80] {
            let p = ModelParams {
                lambda: 1.0,
                nu: 1.0,
                eta: 1.0,
                view_probs: (1..=n).map(|l| d1 * d2.powi(l as i32)).collect(),
                level_probs: geo(n, 0.99),
                friends: FriendLaw::poisson(4.0),
            };
            let a = perron(&build_single(&p)).map(|s| s.alpha);
            let lim = alpha_asymptotic(&p, d1, d2);
            match (a, lim) {
                (Ok(a), Ok(l)) => gaps.push((a - l).abs()),
                _ => gaps.push(f64::NAN),
            }
        }
        let mono = gaps.windows(2).all(|w| w[1] < w[0]);
        ok &= mono && gaps[3] <= 1e-3;
        lines.push(format!("d2={d2}: {:.1e}", gaps[3]));
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        ok && secs < 10.0,
        format!("gap at N=80 {}, monotone, {secs:.1}s", lines.join(", ")),
    )
}

/// Offspring PGF of the single-provider process written out directly. A whole
/// batch lands on one sampled level.
fn h_direct(p: &ModelParams, s: &[f64]) -> Vec<f64> {
    let n = p.levels();
    let theta = p.theta();
    let g: f64 = p
        .level_probs
        .iter()
        .zip(s)
        .map(|(rho, &x)| rho * p.friends.pgf(x, p.eta))
        .sum();
    (0..n)
        .map(|l| {
            let shifted = if l + 1 < n { s[l + 1] } else { 1.0 };
            let r = p.view_probs[l];
            theta * shifted + (1.0 - theta) * (r * g + 1.0 - r)
        })
        .collect()
}

fn criterion_4() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (mut drawn, mut wrong, mut fp, mut lvl) = (0, 0, 0.0f64, 0.0f64);
    while drawn < 500 {
        let p = random_single(&mut rng);
        let alpha = perron(&build_single(&p)).unwrap().alpha;
        if alpha.abs() <= 1e-3 * p.rate() {
            continue;
        }
        drawn += 1;
        let e = match solve_single(&p) {
            Ok(e) => e,
            Err(_) => {
                wrong += 1;
                continue;
            }
        };
        let all_one = e.q.iter().all(|&q| q == 1.0);
        if all_one != (alpha < 0.0) {
            wrong += 1;
        }
        if alpha > 0.0 {
            let h = h_direct(&p, &e.q);
            fp = fp.max(
                h.iter()
                    .zip(&e.q)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max),
            );
            lvl = lvl.max(level_relation_residual(&e.q, &p));
        }
    }
    outcome(
        wrong == 0 && fp <= 1e-12 && lvl <= 1e-10,
        format!("500 draws, {wrong} misclassified, |h(q)-q| {fp:.1e}, level relation {lvl:.1e}"),
    )
}

fn three_level() -> ModelParams {
    ModelParams {
        lambda: 1.0,
        nu: 1.0,
        eta: 1.0,
        view_probs: vec![1.0, 0.5, 0.25],
        level_probs: vec![0.6, 0.3, 0.1],
        friends: FriendLaw::poisson(4.0),
    }
}

fn competing_pair(delta: f64) -> TwoCpParams {
    TwoCpParams {
        lambda: 1.0,
        nu: 1.0,
        eta1: 0.5,
        eta2: 0.5,
        w1: 1.0,
        w2: 1.0,
        delta,
        p: 0.3,
        view_probs: vec![1.0, 1.0],
        level_probs: vec![1.0, 0.0],
        mixed_level_probs: vec![1.0],
        friends: FriendLaw::poisson(4.0),
    }
}

fn sim(reps: usize, horizon: f64, pop_cap: u64, checkpoints: Vec<f64>, seed: u64) -> SimConfig {
    SimConfig {
        replications: reps,
        horizon,
        pop_cap,
        checkpoints,
        seed,
        convention: ShareConvention::Recipient,
    }
}

/// `(lost, undecided)` for provider `k`: a path that stopped with fewer than
/// 100 carriers still alive could yet lose the post.
fn provider_fate(est: &SimEstimate, k: usize) -> (usize, usize) {
    let lost = est.paths.iter().filter(|p| p.lost[k].is_some()).count();
    let open = est
        .paths
        .iter()
        .filter(|p| p.lost[k].is_none() && p.carriers[k] < 100)
        .count();
    (lost, open)
}

fn brackets(q: f64, lost: usize, open: usize, n: usize) -> bool {
    let n = n as f64;
    let sigma = (q * (1.0 - q) / n).sqrt();
    lost as f64 / n - 3.0 * sigma <= q && q <= (lost + open) as f64 / n + 3.0 * sigma
}

fn criterion_5() -> Outcome {
    let start = Instant::now();
    let reps = 20_000;
    let mut ok = true;
    let mut parts = vec![];

    let p = three_level();
    let q = solve_single(&p).unwrap().q;
    let proc = Process::single(&p).unwrap();
    let cfg = sim(reps, 1e9, 2_000, vec![], 5);
    for (l, ql) in q.iter().enumerate() {
        let est = run_ensemble(&proc, &start_at(3, l), &cfg).unwrap();
        let (lost, open) = provider_fate(&est, 0);
        let good = brackets(*ql, lost, open, reps);
        ok &= good;
        parts.push(format!(
            "3-level l={} {:.4}/{:.4}",
            l + 1,
            lost as f64 / reps as f64,
            ql
        ));
    }

    let p = competing_pair(0.6);
    let proc = Process::two_cp(&p).unwrap();
    for cp in [Cp::One, Cp::Two] {
        let e = solve_two_cp(&p, cp).unwrap();
        let starts = [
            (
                TwoCpType::Mixed {
                    top: Cp::One,
                    level: 0,
                },
                e.q_mx1[0],
            ),
            (
                TwoCpType::Mixed {
                    top: Cp::Two,
                    level: 0,
                },
                e.q_mx2[0],
            ),
            (TwoCpType::Exclusive { cp, level: 0 }, e.q_ex[0]),
            (TwoCpType::Exclusive { cp, level: 1 }, e.q_ex[1]),
        ];
        for (ty, qt) in starts {
            let est = run_ensemble(&proc, &start_two_cp(&p, ty), &cfg).unwrap();
            let (lost, open) = provider_fate(&est, cp.index());
            let good = brackets(qt, lost, open, reps);
            ok &= good;
            if !good {
                parts.push(format!(
                    "CP{} {} {:.4}/{:.4}",
                    cp.index() + 1,
                    ty.label(),
                    lost as f64 / reps as f64,
                    qt
                ));
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        ok && secs < 120.0,
        format!("{} + two-CP N=2 (8 starts), {secs:.1}s", parts.join(", ")),
    )
}

/// RK4 on the backward equation of expected shares (seed counted once):
/// `y_l' = (lambda+nu) [theta y_{l+1} + (1-theta)(1 + r_l m eta y.rho) - y_l]`
/// with `y_{N+1} = 1`.
fn rk4_shares(p: &ModelParams, t_end: f64, steps: usize) -> Vec<f64> {
    let n = p.levels();
    let theta = p.theta();
    let m_eta = p.friends.mean_shares(p.eta);
    let f = |y: &[f64]| -> Vec<f64> {
        let yr: f64 = y.iter().zip(&p.level_probs).map(|(a, b)| a * b).sum();
        (0..n)
            .map(|l| {
                let next = if l + 1 < n { y[l + 1] } else { 1.0 };
                p.rate()
                    * (theta * next + (1.0 - theta) * (1.0 + p.view_probs[l] * m_eta * yr) - y[l])
            })
            .collect()
    };
    let h = t_end / steps as f64;
    let mut y = vec![1.0; n];
    let axpy = |y: &[f64], k: &[f64], c: f64| -> Vec<f64> {
        y.iter().zip(k).map(|(a, b)| a + c * b).collect()
    };
    for _ in 0..steps {
        let k1 = f(&y);
        let k2 = f(&axpy(&y, &k1, h / 2.0));
        let k3 = f(&axpy(&y, &k2, h / 2.0));
        let k4 = f(&axpy(&y, &k3, h));
        for l in 0..n {
            y[l] += h / 6.0 * (k1[l] + 2.0 * k2[l] + 2.0 * k3[l] + k4[l]);
        }
    }
    y
}

fn criterion_6() -> Outcome {
    let start = Instant::now();
    let p = three_level();
    let mut worst = 0.0f64;
    for k in 1..=10 {
        let t = 0.5 * k as f64;
        let exact = exact_trajectory(&p, &[t], ShareConvention::Recipient)
            .unwrap()
            .y[0]
            .clone();
        let rk = rk4_shares(&p, t, 2000 * k);
        for (a, b) in exact.iter().zip(&rk) {
            worst = worst.max((a - b).abs() / b.abs());
        }
    }

    let cfg = ExperimentConfig::parse(
        &std::fs::read_to_string(repo_root().join("experiments/shares_single_mc.json")).unwrap(),
    )
    .unwrap();
    let m = cfg.model.clone().unwrap();
    let sc = cfg.sim.clone().unwrap();
    let times = cfg.times.clone().unwrap();
    let sc = SimConfig {
        checkpoints: times.clone(),
        ..sc
    };
    let est = run_ensemble(&Process::single(&m).unwrap(), &start_at(2, 0), &sc).unwrap();
    let theory = exact_trajectory(&m, &times, ShareConvention::Recipient).unwrap();
    let missed = est
        .checkpoints
        .iter()
        .enumerate()
        .filter(|(k, c)| (c.mean_shares[0] - theory.y[*k][0]).abs() > c.half_width[0])
        .count();
    let secs = start.elapsed().as_secs_f64();
    outcome(
        worst <= 1e-6 && missed == 0 && secs < 180.0,
        format!(
            "expm vs RK4 max rel {worst:.1e}; MC {} paths, {missed}/{} checkpoints outside 95% band; {secs:.1}s",
            sc.replications,
            times.len()
        ),
    )
}

fn slope(ts: &[f64], ys: &[f64]) -> f64 {
    let n = ts.len() as f64;
    let (mt, my) = (ts.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let num: f64 = ts.iter().zip(ys).map(|(t, y)| (t - mt) * (y - my)).sum();
    let den: f64 = ts.iter().map(|t| (t - mt).powi(2)).sum();
    num / den
}

fn criterion_7() -> Outcome {
    let p = three_level();
    let s = perron(&build_single(&p)).unwrap();
    let times: Vec<f64> = (0..=8).map(|k| 0.5 * k as f64).collect();
    let cfg = sim(4000, 4.0, 100_000_000, times.clone(), 7);
    let est = run_ensemble(&Process::single(&p).unwrap(), &start_at(3, 0), &cfg).unwrap();
    let late: Vec<f64> = times[4..].to_vec();
    let mut log_shares = vec![];
    let mut log_vx = vec![];
    for k in 4..times.len() {
        let alive: Vec<_> = est
            .paths
            .iter()
            .filter(|p| p.status != Status::Extinct)
            .filter_map(|p| p.snapshots[k].as_ref())
            .collect();
        let n = alive.len() as f64;
        log_shares.push((alive.iter().map(|x| x.shares[0] as f64).sum::<f64>() / n).ln());
        let vx: f64 = alive
            .iter()
            .map(|x| {
                x.counts
                    .iter()
                    .zip(&s.v)
                    .map(|(&c, v)| c as f64 * v)
                    .sum::<f64>()
            })
            .sum();
        log_vx.push((vx / n).ln());
    }
    let rel_shares = (slope(&late, &log_shares) / s.alpha - 1.0).abs();
    let rel_vx = (slope(&late, &log_vx) / s.alpha - 1.0).abs();

    let z = bonferroni_z(times.len());
    let mart = martingale(&est, &cfg, &s.v, s.alpha);
    // At t = 0 every path has the same weight, so only rounding separates it from v_1.
    let worst_mart = mart
        .iter()
        .map(|m| (m.mean - s.v[0]).abs() / (m.half_width / z).max(1e-9))
        .fold(0.0, f64::max);

    let comp = survivor_composition(&est, times.len() - 1);
    let u = s.u_first();
    let total: f64 = u.iter().sum();
    let worst_comp = comp
        .iter()
        .zip(&u)
        .map(|(c, u)| (c - u / total).abs())
        .fold(0.0, f64::max);
    outcome(
        rel_shares <= 0.05 && rel_vx <= 0.05 && worst_mart <= 3.0 && worst_comp <= 0.02,
        format!(
            "log-slope rel err shares {rel_shares:.3}, v.X {rel_vx:.3}; martingale worst {worst_mart:.2} sigma; \
             composition max dev {worst_comp:.4}"
        ),
    )
}

fn criterion_8() -> Outcome {
    let mut sub = three_level();
    sub.friends = FriendLaw::poisson(0.8);
    let y = nonviral_expected(&sub).unwrap();
    let residual = nonviral_residual(&y.y, &sub);

    let geometric = |n: usize| ModelParams {
        lambda: 1.0,
        nu: 1.0,
        eta: 1.0,
        view_probs: (1..=n).map(|l| 0.5f64.powi(l as i32)).collect(),
        level_probs: geo(n, 0.5),
        friends: FriendLaw::poisson(0.8),
    };
    let lim = nonviral_geometric_limit(&geometric(80), 1.0, 0.5, 0.5).unwrap();
    let gap = (nonviral_expected(&geometric(80)).unwrap().y_dot_rho - lim.y_dot_rho).abs();

    let proc = Process::single(&sub).unwrap();
    let cfg = sim(20_000, 60.0, 1_000_000, vec![60.0], 8);
    let z = bonferroni_z(1);
    let mut worst = 0.0f64;
    for l in 0..3 {
        let est = run_ensemble(&proc, &start_at(3, l), &cfg).unwrap();
        let c = &est.checkpoints[0];
        worst = worst.max((c.mean_shares[0] - 1.0 - y.y[l]).abs() / (c.half_width[0] / z));
    }
    outcome(
        residual <= 1e-12 && gap <= 1e-3 && worst <= 3.0,
        format!("recursion residual {residual:.1e}; N=80 limit gap {gap:.1e}; MC worst {worst:.2} sigma"),
    )
}

/// Least-squares fit of `d + e exp(a t)`: `d, e` solved for each trial `a`.
fn fit_two_term(ts: &[f64], ys: &[f64], ws: &[f64], lo: f64, hi: f64) -> f64 {
    let sse = |a: f64| {
        let (mut s11, mut s12, mut s22, mut b1, mut b2) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for ((t, y), w) in ts.iter().zip(ys).zip(ws) {
            let x = (a * t).exp();
            s11 += w;
            s12 += w * x;
            s22 += w * x * x;
            b1 += w * y;
            b2 += w * x * y;
        }
        let det = s11 * s22 - s12 * s12;
        let d = (b1 * s22 - b2 * s12) / det;
        let e = (s11 * b2 - s12 * b1) / det;
        Ok(ts
            .iter()
            .zip(ys)
            .zip(ws)
            .map(|((t, y), w)| w * (y - d - e * (a * t).exp()).powi(2))
            .sum::<f64>())
    };
    minimize_scalar(sse, lo, hi).unwrap().0
}

fn criterion_9() -> Outcome {
    let start = Instant::now();
    let times: Vec<f64> = (1..=10).map(|k| 0.5 * k as f64).collect();
    let mixed = TwoCpType::Mixed {
        top: Cp::One,
        level: 0,
    };

    let p = competing_pair(0.6);
    let c = two_cp_coefficients(&p, Cp::One).unwrap();
    let est = run_ensemble(
        &Process::two_cp(&p).unwrap(),
        &start_two_cp(&p, mixed),
        &sim(7500, 5.0, 10_000_000, times.clone(), 9),
    )
    .unwrap();
    let ys: Vec<f64> = est.checkpoints.iter().map(|c| c.mean_shares[0]).collect();
    let ws: Vec<f64> = est
        .checkpoints
        .iter()
        .map(|c| (c.half_width[0]).powi(-2))
        .collect();
    let a = fit_two_term(&times, &ys, &ws, 0.1 * c.alpha_cp, 3.0 * c.alpha_cp);
    let rel_two = (a / c.alpha_cp - 1.0).abs();
    let e_at = |ty: TwoCpType| c.e[c.types.iter().position(|&x| x == ty).unwrap()];
    let e_ex = e_at(TwoCpType::Exclusive {
        cp: Cp::One,
        level: 0,
    });
    let e_mx = e_at(mixed);
    let two_ok = c.regime == CoefficientRegime::TwoTerm && rel_two <= 0.10 && e_ex > e_mx;

    let p3 = TwoCpParams {
        lambda: 0.5,
        nu: 0.5,
        eta1: 0.6,
        eta2: 0.6,
        delta: 0.9,
        friends: FriendLaw::poisson(8.0),
        ..competing_pair(0.9)
    };
    let c3 = two_cp_coefficients(&p3, Cp::One).unwrap();
    let target = c3.alpha_cp.max(c3.alpha_star);
    let late: Vec<f64> = (0..=6).map(|k| 2.0 + 0.25 * k as f64).collect();
    let est3 = run_ensemble(
        &Process::two_cp(&p3).unwrap(),
        &start_two_cp(&p3, mixed),
        &sim(7500, 3.5, 100_000_000, late.clone(), 19),
    )
    .unwrap();
    let logs: Vec<f64> = est3
        .checkpoints
        .iter()
        .map(|c| c.mean_shares[0].ln())
        .collect();
    let rel_three = (slope(&late, &logs) / target - 1.0).abs();
    let three_ok = c3.regime == CoefficientRegime::ThreeTerm && rel_three <= 0.10;
    let secs = start.elapsed().as_secs_f64();
    outcome(
        two_ok && three_ok && secs < 300.0,
        format!(
            "two-term: fitted rate rel err {rel_two:.3}, e(1,0)={e_ex:.4} > e(1,2)={e_mx:.4}; \
             three-term: late slope rel err {rel_three:.3} vs max(alpha_1, alpha*)={target:.4}; {secs:.1}s"
        ),
    )
}

fn subcritical_two_cp(n: usize) -> TwoCpParams {
    TwoCpParams {
        lambda: 1.0,
        nu: 1.0,
        eta1: 0.9,
        eta2: 0.7,
        w1: 1.0,
        w2: 1.0,
        delta: 0.7,
        p: 0.4,
        view_probs: (1..=n).map(|l| 0.5f64.powi(l as i32)).collect(),
        level_probs: geo(n, 0.5),
        mixed_level_probs: geo(n - 1, 0.5),
        friends: FriendLaw::poisson(0.9),
    }
}

fn criterion_10() -> Outcome {
    let p = subcritical_two_cp(4);
    let closed = two_cp_nonviral_closed_form(&p, Cp::One).unwrap();
    let proc = Process::two_cp(&p).unwrap();
    let cfg = sim(200_000, 80.0, 1_000_000, vec![80.0], 10);
    let z = bonferroni_z(1);
    let (mut mean, mut var) = (0.0, 0.0);
    for top in [Cp::One, Cp::Two] {
        let dist: Vec<f64> = (0..p.dim())
            .map(|i| match TwoCpType::from_index(i, p.levels()) {
                TwoCpType::Mixed { top: t, level } if t == top => p.mixed_level_probs[level],
                _ => 0.0,
            })
            .collect();
        let est = run_ensemble(&proc, &dist, &cfg).unwrap();
        let c = &est.checkpoints[0];
        mean += c.mean_shares[0] - 1.0;
        var += (c.half_width[0] / z).powi(2);
    }
    let sigmas = (mean - closed).abs() / var.sqrt();

    let big = subcritical_two_cp(80);
    let exact = two_cp_nonviral(&big, Cp::One).unwrap().y_mx_dot;
    let lim = two_cp_nonviral_limit(&big, Cp::One, 1.0, 0.5, 0.5, 0.5)
        .unwrap()
        .y_mx_dot;
    let gap = (exact - lim).abs();
    outcome(
        sigmas <= 3.0 && gap <= 1e-3,
        format!(
            "closed form {closed:.5} vs MC {mean:.5} ({sigmas:.2} sigma); N=80 limit gap {gap:.1e}"
        ),
    )
}

fn load(name: &str) -> ExperimentConfig {
    let text = std::fs::read_to_string(repo_root().join("experiments").join(name)).unwrap();
    ExperimentConfig::parse(&text).unwrap()
}

fn column(t: &viral_timeline::cli::Table, name: &str) -> Vec<f64> {
    let i = t.header.iter().position(|h| h == name).unwrap();
    t.rows
        .iter()
        .map(|r| r[i].parse().unwrap_or(f64::NAN))
        .collect()
}

fn criterion_11() -> Outcome {
    let start = Instant::now();
    let out = execute(
        Command::Sweep,
        &load("extinction_vs_m.json"),
        &Options::default(),
    )
    .unwrap();
    let m = column(&out.tables[0], "m");
    let q = column(&out.tables[0], "q_rho");
    let (k, min) = q.iter().enumerate().fold(
        (0, f64::INFINITY),
        |a, (i, &x)| if x < a.1 { (i, x) } else { a },
    );
    let secs = start.elapsed().as_secs_f64();
    let ok = min < q[0] && min < q[q.len() - 1] && secs < 60.0;
    outcome(
        ok,
        format!(
            "q.rho {:.4} at m={} -> min {min:.4} at m={} -> {:.4} at m={}; {secs:.2}s",
            q[0],
            m[0],
            m[k],
            q[q.len() - 1],
            m[m.len() - 1]
        ),
    )
}

fn criterion_12() -> Outcome {
    let start = Instant::now();
    let out = execute(
        Command::Sweep,
        &load("nash_extinction_theta.json"),
        &Options::default(),
    )
    .unwrap();
    let t = &out.tables[0];
    let (theta, e1, e2, pm1, eps) = (
        column(t, "theta"),
        column(t, "eta1"),
        column(t, "eta2"),
        column(t, "pm1"),
        column(t, "epsilon"),
    );
    let target = 1.0 / 1.2;
    let mut ne_ok = true;
    for i in 0..theta.len() {
        if theta[i] <= 0.75 + 1e-9 {
            ne_ok &=
                (e1[i] - 1.0).abs() <= 1e-4 && (e2[i] - target).abs() <= 1e-4 && eps[i] <= 1e-3;
        }
    }
    let collapse = e2.iter().position(|&x| x < 0.1);
    let jump_ok = match collapse {
        Some(i) if i > 0 => {
            let jump = pm1[i] - pm1[i - 1];
            let before = (1..i)
                .map(|j| (pm1[j] - pm1[j - 1]).abs())
                .fold(0.0, f64::max);
            (e1[i] - 1.0).abs() <= 1e-4 && jump > before
        }
        _ => false,
    };

    let f5 = execute(
        Command::Sweep,
        &load("nash_shares_psi.json"),
        &Options::default(),
    )
    .unwrap();
    let t5 = &f5.tables[0];
    let (psi, s1, s2) = (column(t5, "psi"), column(t5, "pm1"), column(t5, "eta2"));
    let steps: Vec<f64> = s1.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    let (kmax, big) = steps
        .iter()
        .enumerate()
        .fold((0, 0.0), |a, (i, &x)| if x > a.1 { (i, x) } else { a });
    let mut rest: Vec<f64> = steps.clone();
    rest.remove(kmax);
    let second = rest.iter().cloned().fold(0.0, f64::max);
    let weaker_falls = s2[s2.len() - 1] < 0.5 * s2[0];
    let psi_ok = big > 3.0 * second && weaker_falls;
    let secs = start.elapsed().as_secs_f64();
    outcome(
        ne_ok && jump_ok && psi_ok && secs < 300.0,
        format!(
            "NE (1, 1/1.2) for theta<=0.75: {ne_ok}; eta2 collapses at theta={:.2} with pm1 jump {}; \
             psi sweep: CP1 shares jump {big:.3} between psi={:.2} and {:.2} (next largest step {second:.3}); {secs:.1}s",
            collapse.map_or(f64::NAN, |i| theta[i]),
            jump_ok,
            psi[kmax],
            psi[kmax + 1]
        ),
    )
}

#[derive(Deserialize)]
struct Run {
    config: String,
    command: Command,
}

fn criterion_13() -> Outcome {
    let root = repo_root().join("experiments");
    let runs: Vec<Run> =
        serde_json::from_str(&std::fs::read_to_string(root.join("manifest.json")).unwrap())
            .unwrap();
    let (mut differ, mut golden_differ, mut files) = (vec![], vec![], 0);
    for r in &runs {
        let cfg = load(&r.config);
        let a = execute(r.command, &cfg, &Options::default()).unwrap();
        let b = execute(r.command, &cfg, &Options::default()).unwrap();
        let stem = format!("{}-{:?}", r.config.trim_end_matches(".json"), r.command).to_lowercase();
        for (x, y) in a.tables.iter().zip(&b.tables) {
            files += 1;
            let body = x.to_csv().unwrap();
            if body != y.to_csv().unwrap() {
                differ.push(format!("{stem}/{}", x.name));
            }
            let golden = std::fs::read_to_string(root.join("golden").join(&stem).join(&x.name))
                .unwrap_or_default();
            if body != golden {
                golden_differ.push(format!("{stem}/{}", x.name));
            }
        }
    }
    outcome(
        differ.is_empty() && golden_differ.is_empty(),
        format!(
            "{} runs, {files} CSVs; rerun differs: {:?}; golden differs: {:?}",
            runs.len(),
            differ,
            golden_differ
        ),
    )
}

fn main() {
    let names = [
        "spectral bounds",
        "eigenstructure",
        "asymptotic threshold",
        "extinction dichotomy",
        "simulated extinction",
        "shares trajectory",
        "viral growth rate",
        "subcritical totals",
        "two-provider coefficients",
        "two-provider subcritical shares",
        "extinction vs mean friends",
        "Nash equilibrium",
        "determinism",
    ];
    let (c1, c2) = criteria_1_2();
    let rest: Vec<fn() -> Outcome> = vec![
        criterion_3,
        criterion_4,
        criterion_5,
        criterion_6,
        criterion_7,
        criterion_8,
        criterion_9,
        criterion_10,
        criterion_11,
        criterion_12,
        criterion_13,
    ];
    let mut results = vec![c1, c2];
    let mut failed = 0;
    let mut report = |i: usize, o: &Outcome| {
        println!(
            "{} {:>2} {}: {}",
            if o.ok { "PASS" } else { "FAIL" },
            i + 1,
            names[i],
            o.detail
        );
        if !o.ok {
            failed += 1;
        }
    };
    report(0, &results[0]);
    report(1, &results[1]);
    for (k, f) in rest.iter().enumerate() {
        let o = f();
        report(k + 2, &o);
        results.push(o);
    }
    println!("{} of {} criteria pass", names.len() - failed, names.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
