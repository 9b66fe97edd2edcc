//! Matrix exponential by scaling and squaring of diagonal Padé approximants
//! (Higham 2005). Degrees 3, 5, 7, 9, 13 are selected from the 1-norm.

use super::{CMatrix, C64};
use crate::error::{Error, Result};

const THETA: [(usize, f64); 5] = [
    (3, 1.495585217958292e-2),
    (5, 2.539398330063230e-1),
    (7, 9.504178996162932e-1),
    (9, 2.097847961257068e0),
    (13, 5.371920351148152e0),
];

const B3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const B5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const B7: [f64; 8] = [17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0];
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

// exp of anything with 1-norm above this overflows f64 for some entry
const MAX_NORM: f64 = 700.0 * 1024.0;

fn one_norm(a: &CMatrix) -> f64 {
    a.column_iter()
        .map(|c| c.iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

fn real(x: f64) -> C64 {
    C64::new(x, 0.0)
}

fn pade_low(a: &CMatrix, b: &[f64]) -> (CMatrix, CMatrix) {
    let n = a.nrows();
    let id = CMatrix::identity(n, n);
    let a2 = a * a;
    let mut power = id.clone();
    let mut u_inner = &id * real(b[1]);
    let mut v = &id * real(b[0]);
    let m = b.len() - 1;
    for k in 1..=m / 2 {
        power = &power * &a2;
        v += &power * real(b[2 * k]);
        u_inner += &power * real(b[2 * k + 1]);
    }
    (a * u_inner, v)
}

fn pade13(a: &CMatrix) -> (CMatrix, CMatrix) {
    let b = &B13;
    let n = a.nrows();
    let id = CMatrix::identity(n, n);
    let a2 = a * a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let inner_u = &a6 * real(b[13]) + &a4 * real(b[11]) + &a2 * real(b[9]);
    let u = a * (&a6 * inner_u + &a6 * real(b[7]) + &a4 * real(b[5]) + &a2 * real(b[3]) + &id * real(b[1]));
    let inner_v = &a6 * real(b[12]) + &a4 * real(b[10]) + &a2 * real(b[8]);
    let v = &a6 * inner_v + &a6 * real(b[6]) + &a4 * real(b[4]) + &a2 * real(b[2]) + &id * real(b[0]);
    (u, v)
}

/// `exp(m)` for a square complex matrix.
pub fn matrix_exponential(m: &CMatrix) -> Result<CMatrix> {
    let n = m.nrows();
    assert_eq!(n, m.ncols(), "matrix_exponential needs a square matrix");
    if n == 0 {
        return Ok(m.clone());
    }
    let norm = one_norm(m);
    if !norm.is_finite() || norm > MAX_NORM {
        return Err(Error::ExpOverflow { norm });
    }

    let mut squarings = 0u32;
    let (u, v) = match THETA.iter().find(|(_, theta)| norm <= *theta) {
        Some(&(3, _)) => pade_low(m, &B3),
        Some(&(5, _)) => pade_low(m, &B5),
        Some(&(7, _)) => pade_low(m, &B7),
        Some(&(9, _)) => pade_low(m, &B9),
        _ => {
            let theta13 = THETA[4].1;
            if norm > theta13 {
                squarings = (norm / theta13).log2().ceil() as u32;
            }
            let scaled = m * real(0.5f64.powi(squarings as i32));
            pade13(&scaled)
        }
    };

    let p = &v + &u;
    let q = &v - &u;
    let mut r = q
        .lu()
        .solve(&p)
        .ok_or(Error::ExpOverflow { norm })?;
    for _ in 0..squarings {
        r = &r * &r;
    }
    if r.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::ExpOverflow { norm });
    }
    Ok(r)
}
