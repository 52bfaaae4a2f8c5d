//! Dense helpers: matrix exponential, guarded linear solves, RK4.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

const RCOND_MIN: f64 = 1e-12;

fn norm1(a: &DMatrix<f64>) -> f64 {
    a.column_iter()
        .map(|c| c.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub fn norm_inf(a: &DMatrix<f64>) -> f64 {
    a.row_iter()
        .map(|r| r.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

const B3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const B5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const B7: [f64; 8] = [
    17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0,
];
const B9: [f64; 10] = [
    17643225600.0,
    8821612800.0,
    2075673600.0,
    302702400.0,
    30270240.0,
    2162160.0,
    110880.0,
    3960.0,
    90.0,
    1.0,
];
const B13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];
const THETA: [(f64, usize); 4] = [
    (1.495585217958292e-2, 3),
    (2.539398330063230e-1, 5),
    (9.504178996162932e-1, 7),
    (2.097847961257068, 9),
];
const THETA13: f64 = 5.371920351148152;

/// `e^A` by scaling and squaring with diagonal Padé approximants of degree ≤ 13.
pub fn expm(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let id = DMatrix::<f64>::identity(n, n);
    let norm = norm1(a);
    for &(theta, m) in &THETA {
        if norm <= theta {
            let b: &[f64] = match m {
                3 => &B3,
                5 => &B5,
                7 => &B7,
                _ => &B9,
            };
            let a2 = a * a;
            let mut pow = id.clone();
            let mut u = &id * b[1];
            let mut v = &id * b[0];
            for k in 1..=m / 2 {
                pow = &pow * &a2;
                u += &pow * b[2 * k + 1];
                v += &pow * b[2 * k];
            }
            let u = a * u;
            return pade_solve(&u, &v);
        }
    }
    let s = if norm > THETA13 {
        (norm / THETA13).log2().ceil() as i32
    } else {
        0
    };
    let a = a / 2f64.powi(s);
    let b = &B13;
    let a2 = &a * &a;
    let a4 = &a2 * &a2;
    let a6 = &a2 * &a4;
    let u_inner = &a6 * (&a6 * b[13] + &a4 * b[11] + &a2 * b[9]);
    let u = &a * (u_inner + &a6 * b[7] + &a4 * b[5] + &a2 * b[3] + &id * b[1]);
    let v = &a6 * (&a6 * b[12] + &a4 * b[10] + &a2 * b[8])
        + &a6 * b[6]
        + &a4 * b[4]
        + &a2 * b[2]
        + &id * b[0];
    let mut x = pade_solve(&u, &v);
    for _ in 0..s {
        x = &x * &x;
    }
    x
}

fn pade_solve(u: &DMatrix<f64>, v: &DMatrix<f64>) -> DMatrix<f64> {
    let p = v + u;
    let q = v - u;
    q.lu()
        .solve(&p)
        .expect("Pade denominator is nonsingular for scaled arguments")
}

/// Solves `A x = b` by partial-pivot LU, refusing ill-conditioned systems.
pub fn solve(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    let lu = a.clone().lu();
    let inv = lu.try_inverse().ok_or(Error::Singular { rcond: 0.0 })?;
    let rcond = 1.0 / (norm1(a) * norm1(&inv));
    if !(rcond >= RCOND_MIN) {
        return Err(Error::Singular { rcond });
    }
    lu.solve(b).ok_or(Error::Singular { rcond })
}

/// Classical fourth-order Runge–Kutta with fixed step, returning the state at
/// every time in `grid` (which must be increasing and start at or after `t0`).
pub fn rk4<F>(f: F, y0: &[f64], t0: f64, grid: &[f64], step: f64) -> Vec<Vec<f64>>
where
    F: Fn(f64, &[f64]) -> Vec<f64>,
{
    let axpy = |y: &[f64], k: &[f64], h: f64| -> Vec<f64> {
        y.iter().zip(k).map(|(a, b)| a + h * b).collect()
    };
    let mut t = t0;
    let mut y = y0.to_vec();
    let mut out = Vec::with_capacity(grid.len());
    for &target in grid {
        while t < target {
            let h = step.min(target - t);
            let k1 = f(t, &y);
            let k2 = f(t + h / 2.0, &axpy(&y, &k1, h / 2.0));
            let k3 = f(t + h / 2.0, &axpy(&y, &k2, h / 2.0));
            let k4 = f(t + h, &axpy(&y, &k3, h));
            for i in 0..y.len() {
                y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
            t = if target - t <= step { target } else { t + h };
        }
        out.push(y.clone());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel_err(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
        (a - b).abs().max() / b.abs().max()
    }

    #[test]
    fn expm_of_diagonal_and_nilpotent() {
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![-3.0, 0.5, 12.0]));
        let e = expm(&a);
        for (i, x) in [-3.0f64, 0.5, 12.0].iter().enumerate() {
            assert!((e[(i, i)] / x.exp() - 1.0).abs() < 1e-13);
        }
        let n = DMatrix::from_row_slice(3, 3, &[0.0, 2.0, 0.0, 0.0, 0.0, 3.0, 0.0, 0.0, 0.0]);
        let e = expm(&n);
        let expect = DMatrix::from_row_slice(3, 3, &[1.0, 2.0, 3.0, 0.0, 1.0, 3.0, 0.0, 0.0, 1.0]);
        assert!(rel_err(&e, &expect) < 1e-15);
    }

    #[test]
    fn expm_matches_reference_across_scales() {
        let base = DMatrix::from_row_slice(
            4,
            4,
            &[
                -2.0, 1.0, 0.3, 0.0, 0.5, -1.0, 0.2, 0.1, 0.0, 0.7, -3.0, 1.5, 0.4, 0.0, 0.9, -0.5,
            ],
        );
        for scale in [1e-3, 0.1, 0.5, 1.0, 3.0, 20.0] {
            let a = &base * scale;
            let reference = a.clone().exp();
            assert!(rel_err(&expm(&a), &reference) < 1e-12, "scale {scale}");
        }
    }

    #[test]
    fn solve_refuses_singular() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        let b = DVector::from_vec(vec![1.0, 1.0]);
        assert!(matches!(solve(&a, &b), Err(Error::Singular { .. })));
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 3.0]);
        let x = solve(&a, &b).unwrap();
        assert!((&a * &x - &b).amax() < 1e-15);
    }

    #[test]
    fn rk4_exponential() {
        let out = rk4(|_, y| vec![-y[0]], &[1.0], 0.0, &[0.5, 1.0, 2.0], 1e-3);
        for (y, t) in out.iter().zip([0.5f64, 1.0, 2.0]) {
            assert!((y[0] - (-t).exp()).abs() < 1e-12);
        }
    }
}
