//! Dense matrix exponentials.
//!
//! [`matrix_exp`] is the general scaling-and-squaring routine with diagonal
//! Padé approximants of degree 3, 5, 7, 9 or 13 (Higham, "The scaling and
//! squaring method for the matrix exponential revisited", 2005). The two
//! structured variants are exact closed forms used as independent checks.

use nalgebra::DMatrix;

use super::rate::MAX_DENSE_SIDE;
use crate::{Error, Result};

const THETA_3: f64 = 1.495585217958292e-2;
const THETA_5: f64 = 2.539398330063230e-1;
const THETA_7: f64 = 9.504178996162932e-1;
const THETA_9: f64 = 2.097847961257068;
const THETA_13: f64 = 5.371920351148152;

const PADE_3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const PADE_5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const PADE_7: [f64; 8] = [
    17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0,
];
const PADE_9: [f64; 10] = [
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
const PADE_13: [f64; 14] = [
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

fn one_norm(a: &DMatrix<f64>) -> f64 {
    a.column_iter()
        .map(|c| c.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// `e^A` for a square matrix with finite entries.
pub fn matrix_exp(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::Shape(format!(
            "matrix exponential needs a square matrix, got {}x{}",
            n,
            a.ncols()
        )));
    }
    if n > MAX_DENSE_SIDE {
        return Err(Error::Shape(format!(
            "side {n} exceeds the dense exponential cap of {MAX_DENSE_SIDE}"
        )));
    }
    if let Some(bad) = a.iter().find(|x| !x.is_finite()) {
        return Err(Error::NonFinite(format!("matrix entry {bad}")));
    }
    if n == 0 {
        return Ok(DMatrix::zeros(0, 0));
    }

    let norm = one_norm(a);
    let id = DMatrix::<f64>::identity(n, n);
    if norm == 0.0 {
        return Ok(id);
    }

    let a2 = a * a;
    let (u, v) = if norm <= THETA_3 {
        pade_low(a, &a2, &PADE_3, &id)
    } else if norm <= THETA_5 {
        pade_low(a, &a2, &PADE_5, &id)
    } else if norm <= THETA_7 {
        pade_low(a, &a2, &PADE_7, &id)
    } else if norm <= THETA_9 {
        pade_low(a, &a2, &PADE_9, &id)
    } else {
        let s = (norm / THETA_13).log2().ceil().max(0.0) as i32;
        let scale = 2f64.powi(-s);
        let a_s = a * scale;
        let a2_s = &a2 * (scale * scale);
        let (u, v) = pade_13(&a_s, &a2_s, &id);
        let mut r = solve_pade(&u, &v)?;
        for _ in 0..s {
            r = &r * &r;
        }
        return Ok(r);
    };
    solve_pade(&u, &v)
}

/// Odd part `U` and even part `V` of a low-degree Padé approximant.
fn pade_low(
    a: &DMatrix<f64>,
    a2: &DMatrix<f64>,
    b: &[f64],
    id: &DMatrix<f64>,
) -> (DMatrix<f64>, DMatrix<f64>) {
    let mut power = id.clone();
    let mut odd = id * b[1];
    let mut even = id * b[0];
    let mut k = 2;
    while k < b.len() {
        power = &power * a2;
        even += &power * b[k];
        if k + 1 < b.len() {
            odd += &power * b[k + 1];
        }
        k += 2;
    }
    (a * odd, even)
}

fn pade_13(
    a: &DMatrix<f64>,
    a2: &DMatrix<f64>,
    id: &DMatrix<f64>,
) -> (DMatrix<f64>, DMatrix<f64>) {
    let b = &PADE_13;
    let a4 = a2 * a2;
    let a6 = &a4 * a2;
    let inner_u = &a6 * b[13] + &a4 * b[11] + a2 * b[9];
    let u = a * (&a6 * inner_u + &a6 * b[7] + &a4 * b[5] + a2 * b[3] + id * b[1]);
    let inner_v = &a6 * b[12] + &a4 * b[10] + a2 * b[8];
    let v = &a6 * inner_v + &a6 * b[6] + &a4 * b[4] + a2 * b[2] + id * b[0];
    (u, v)
}

fn solve_pade(u: &DMatrix<f64>, v: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let p = v + u;
    let q = v - u;
    q.lu()
        .solve(&p)
        .ok_or_else(|| Error::Degenerate("singular Padé denominator".into()))
}

/// Last column of `e^A` where `A` is zero except for its last column `v`.
///
/// Equals `e_n + v (e^{v_n} - 1) / v_n`.
pub fn rank_one_exp_last_column(v: &[f64]) -> Result<Vec<f64>> {
    let n = v.len();
    let vn = *v
        .last()
        .ok_or_else(|| Error::Shape("empty vector".into()))?;
    if vn.abs() <= 1e-14 {
        return Err(Error::Degenerate(format!(
            "last entry {vn:e} too close to zero for the rank-one formula"
        )));
    }
    let coeff = vn.exp_m1() / vn;
    let mut col: Vec<f64> = v.iter().map(|x| x * coeff).collect();
    col[n - 1] += 1.0;
    Ok(col)
}

/// `e^A = I + A (e^{v_n} - 1) / v_n` for the matrix whose only nonzero column
/// is the last one, equal to `v`.
pub fn matrix_exp_rank_one(v: &[f64]) -> Result<DMatrix<f64>> {
    if let Some(bad) = v.iter().find(|x| !x.is_finite()) {
        return Err(Error::NonFinite(format!("vector entry {bad}")));
    }
    let col = rank_one_exp_last_column(v)?;
    let n = v.len();
    let mut out = DMatrix::<f64>::identity(n, n);
    out.column_mut(n - 1).copy_from_slice(&col);
    Ok(out)
}

/// `exp(alpha * A)` for `A = [[0,a,b,0],[0,-1,0,c],[0,0,-1,d],[0,0,0,-2]]`.
pub fn matrix_exp_block4(a: f64, b: f64, c: f64, d: f64, alpha: f64) -> DMatrix<f64> {
    let e1 = (-alpha).exp();
    let e2 = (-2.0 * alpha).exp();
    let one_minus = -(-alpha).exp_m1();
    // (e^alpha - 1) e^{-2 alpha} = (1 - e^{-alpha}) e^{-alpha}
    let cross = one_minus * e1;
    let corner = (a * c + b * d) * one_minus * one_minus / 2.0;
    #[rustfmt::skip]
    let m = DMatrix::from_row_slice(4, 4, &[
        1.0, a * one_minus, b * one_minus, corner,
        0.0, e1,            0.0,           c * cross,
        0.0, 0.0,           e1,            d * cross,
        0.0, 0.0,           0.0,           e2,
    ]);
    m
}
