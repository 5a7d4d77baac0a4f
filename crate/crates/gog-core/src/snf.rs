//! Exact integer Smith normal form and small lattice utilities.
//!
//! Everything here is arbitrary-precision; no floating point anywhere.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};

pub type Matrix = Vec<Vec<BigInt>>;

pub fn identity(n: usize) -> Matrix {
    (0..n)
        .map(|i| (0..n).map(|j| if i == j { BigInt::one() } else { BigInt::zero() }).collect())
        .collect()
}

pub fn mat_mul(a: &Matrix, b: &Matrix) -> Matrix {
    let n = a.len();
    let m = if n == 0 { 0 } else { a[0].len() };
    let p = if b.is_empty() { 0 } else { b[0].len() };
    debug_assert_eq!(m, b.len());
    let mut out = vec![vec![BigInt::zero(); p]; n];
    for i in 0..n {
        for k in 0..m {
            if a[i][k].is_zero() {
                continue;
            }
            for j in 0..p {
                let t = &a[i][k] * &b[k][j];
                out[i][j] += t;
            }
        }
    }
    out
}

/// Smith normal form with transform tracking: returns (d, u, v) with
/// u * m * v = d, u and v unimodular, d diagonal with divisibility order.
pub fn smith_with_transforms(mut m: Matrix) -> (Matrix, Matrix, Matrix) {
    let rows = m.len();
    let cols = if rows == 0 { 0 } else { m[0].len() };
    let mut u = identity(rows);
    let mut v = identity(cols);

    let mut k = 0;
    while k < rows.min(cols) {
        // Find the entry of least nonzero absolute value in the trailing block.
        let mut pivot: Option<(usize, usize)> = None;
        for i in k..rows {
            for j in k..cols {
                if m[i][j].is_zero() {
                    continue;
                }
                match pivot {
                    None => pivot = Some((i, j)),
                    Some((pi, pj)) => {
                        if m[i][j].abs() < m[pi][pj].abs() {
                            pivot = Some((i, j));
                        }
                    }
                }
            }
        }
        let Some((pi, pj)) = pivot else { break };
        m.swap(k, pi);
        u.swap(k, pi);
        for row in m.iter_mut() {
            row.swap(k, pj);
        }
        for row in v.iter_mut() {
            row.swap(k, pj);
        }

        let mut clean = true;
        for i in k + 1..rows {
            if m[i][k].is_zero() {
                continue;
            }
            let q = div_nearest(&m[i][k], &m[k][k]);
            if !q.is_zero() {
                for j in 0..cols {
                    let t = &q * &m[k][j];
                    m[i][j] -= t;
                }
                for j in 0..rows {
                    let t = &q * &u[k][j];
                    u[i][j] -= t;
                }
            }
            if !m[i][k].is_zero() {
                clean = false;
            }
        }
        for j in k + 1..cols {
            if m[k][j].is_zero() {
                continue;
            }
            let q = div_nearest(&m[k][j], &m[k][k]);
            if !q.is_zero() {
                for i in 0..rows {
                    let t = &q * &m[i][k];
                    m[i][j] -= t;
                }
                for i in 0..cols {
                    let t = &q * &v[i][k];
                    v[i][j] -= t;
                }
            }
            if !m[k][j].is_zero() {
                clean = false;
            }
        }
        if !clean {
            continue; // smaller remainders exist; pick a new pivot
        }
        // Row and column k are clear. Enforce divisibility of the rest.
        let mut offender = None;
        'scan: for i in k + 1..rows {
            for j in k + 1..cols {
                if !(&m[i][j] % &m[k][k]).is_zero() {
                    offender = Some(i);
                    break 'scan;
                }
            }
        }
        if let Some(i) = offender {
            // add row i to row k and restart the pivot round
            for j in 0..cols {
                let t = m[i][j].clone();
                m[k][j] += t;
            }
            for j in 0..rows {
                let t = u[i][j].clone();
                u[k][j] += t;
            }
            continue;
        }
        if m[k][k].is_negative() {
            for j in 0..cols {
                m[k][j] = -m[k][j].clone();
            }
            for j in 0..rows {
                u[k][j] = -u[k][j].clone();
            }
        }
        k += 1;
    }
    (m, u, v)
}

/// Nearest-integer division, biasing remainders small in absolute value.
fn div_nearest(a: &BigInt, b: &BigInt) -> BigInt {
    let (q, r) = a.div_rem(b);
    let two_r = 2 * r.abs();
    if two_r > b.abs() {
        if (a.is_negative()) ^ (b.is_negative()) {
            q - 1
        } else {
            q + 1
        }
    } else {
        q
    }
}

/// Nonzero diagonal entries of the Smith form, in divisibility order.
pub fn invariant_factors(m: Matrix) -> Vec<BigInt> {
    let (d, _, _) = smith_with_transforms(m);
    let mut out = Vec::new();
    for (i, row) in d.iter().enumerate() {
        if i < row.len() && !row[i].is_zero() {
            out.push(row[i].clone());
        }
    }
    out
}

/// Solve x * m = target over the integers (x a row vector), if possible.
pub fn solve_left(m: &Matrix, target: &[BigInt]) -> Option<Vec<BigInt>> {
    let rows = m.len();
    let cols = if rows == 0 { 0 } else { m[0].len() };
    if target.len() != cols {
        return None;
    }
    let (d, u, v) = smith_with_transforms(m.clone());
    // x m = t  <=>  (x u^-1)(u m v) = t v  <=>  z d = t v with x = z u.
    let tv: Vec<BigInt> = (0..cols)
        .map(|j| (0..cols).map(|i| &target[i] * &v[i][j]).sum())
        .collect();
    let mut z = vec![BigInt::zero(); rows];
    for j in 0..cols {
        let dj = if j < rows { d[j][j].clone() } else { BigInt::zero() };
        if dj.is_zero() {
            if !tv[j].is_zero() {
                return None;
            }
        } else {
            let (q, r) = tv[j].div_rem(&dj);
            if !r.is_zero() {
                return None;
            }
            z[j] = q;
        }
    }
    let x: Vec<BigInt> = (0..rows)
        .map(|j| (0..rows).map(|i| &z[i] * &u[i][j]).sum())
        .collect();
    Some(x)
}

/// Row-style basis of the saturation of the row lattice of `m` in Z^cols,
/// together with the index of the lattice inside its saturation (product of
/// nonzero invariant factors).
pub fn row_lattice_saturation(m: &Matrix) -> (Matrix, BigInt) {
    let cols = if m.is_empty() { 0 } else { m[0].len() };
    let (d, _, v) = smith_with_transforms(m.clone());
    // rows of m span { z * d * v^-1 } ... the saturation is spanned by the
    // first r rows of v^-1 where r = rank. v is unimodular; v^-1 rows are
    // obtained by solving. Compute v inverse exactly via adjugate-free
    // elimination over Q is overkill; instead note (u m v) = d so
    // m = u^-1 d v^-1, and the row space of m equals row space of d v^-1.
    // Saturation basis: rows e_i v^-1 for i < rank.
    let rank = (0..d.len().min(cols)).take_while(|&i| !d[i][i].is_zero()).count();
    let vinv = invert_unimodular(&v);
    let basis: Matrix = (0..rank).map(|i| vinv[i].clone()).collect();
    let mut index = BigInt::one();
    for i in 0..rank {
        index *= d[i][i].clone();
    }
    (basis, index)
}

/// Invert a unimodular integer matrix exactly.
pub fn invert_unimodular(m: &Matrix) -> Matrix {
    let n = m.len();
    // Gauss-Jordan over the integers using unimodular row operations is not
    // generally possible; use the Smith machinery: for unimodular m,
    // u m v = I, so m^-1 = v u.
    let (d, u, v) = smith_with_transforms(m.clone());
    for i in 0..n {
        debug_assert!(d[i][i].abs().is_one(), "matrix is not unimodular");
    }
    // d has +/-1 entries; fold signs into u.
    let mut su = u;
    for i in 0..n {
        if d[i][i].is_negative() {
            for j in 0..n {
                su[i][j] = -su[i][j].clone();
            }
        }
    }
    mat_mul(&v, &su)
}

/// Extend a primitive row vector to a square integer matrix with that first
/// row and determinant +/-1, via extended-gcd column reduction.
pub fn primitive_extend(v: &[i64]) -> Result<Matrix, BigInt> {
    let n = v.len();
    assert!(n > 0, "empty vector");
    let mut row: Vec<BigInt> = v.iter().map(|&x| BigInt::from(x)).collect();
    let mut minv = identity(n); // accumulates E^-1; its first row ends as v
    // Column-reduce `row` to (g, 0, ..., 0). Each column op C applied to the
    // row updates minv := C^-1 * minv (a row operation).
    loop {
        let mut j = None;
        for i in 1..n {
            if !row[i].is_zero() {
                j = Some(i);
                break;
            }
        }
        let Some(j) = j else { break };
        if row[0].is_zero() {
            // swap columns 0 and j <-> swap rows 0 and j of minv
            row.swap(0, j);
            minv.swap(0, j);
            continue;
        }
        let q = div_nearest(&row[j], &row[0]);
        if q.is_zero() {
            // row[j] smaller than row[0]: swap to make progress
            row.swap(0, j);
            minv.swap(0, j);
            continue;
        }
        // col_j -= q * col_0 ; C^-1 has +q at (0, j): row_0 += q * row_j
        let t = &q * &row[0];
        row[j] -= t;
        for c in 0..n {
            let t = &q * &minv[j][c];
            minv[0][c] += t;
        }
    }
    if row[0].is_negative() {
        row[0] = -row[0].clone();
        for c in 0..n {
            minv[0][c] = -minv[0][c].clone();
        }
    }
    if !row[0].is_one() {
        return Err(row[0].clone());
    }
    Ok(minv)
}

pub fn determinant(m: &Matrix) -> BigInt {
    // Bareiss would be fine; the Smith form already gives |det| and we only
    // need it for small matrices, so use fraction-free elimination.
    let n = m.len();
    let mut a = m.clone();
    let mut det = BigInt::one();
    let mut sign = BigInt::one();
    for k in 0..n {
        let mut piv = None;
        for i in k..n {
            if !a[i][k].is_zero() {
                piv = Some(i);
                break;
            }
        }
        let Some(p) = piv else { return BigInt::zero() };
        if p != k {
            a.swap(p, k);
            sign = -sign;
        }
        for i in k + 1..n {
            // fraction-free: rows scaled; track via det divisions (Bareiss)
            let (akk, aik) = (a[k][k].clone(), a[i][k].clone());
            for j in k..n {
                a[i][j] = &a[i][j] * &akk - &aik * &a[k][j];
            }
            if k > 0 {
                let prev = a[k - 1][k - 1].clone();
                for j in k..n {
                    a[i][j] = &a[i][j] / &prev;
                }
            }
        }
    }
    if n > 0 {
        det = a[n - 1][n - 1].clone();
    }
    sign * det
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: &[&[i64]]) -> Matrix {
        rows.iter().map(|r| r.iter().map(|&x| BigInt::from(x)).collect()).collect()
    }

    #[test]
    fn invariant_factors_known_matrix() {
        let a = m(&[
            &[-6, 111, -36, 6],
            &[5, -672, 210, 74],
            &[0, -255, 81, 24],
            &[-7, 255, -81, -10],
        ]);
        let f = invariant_factors(a);
        assert_eq!(f, vec![BigInt::from(1), BigInt::from(3), BigInt::from(21)]);
    }

    #[test]
    fn transforms_reconstruct() {
        let a = m(&[&[2, 4, 4], &[-6, 6, 12], &[10, 4, 16]]);
        let (d, u, v) = smith_with_transforms(a.clone());
        assert_eq!(mat_mul(&mat_mul(&u, &a), &v), d);
        // divisibility chain
        let mut prev: Option<BigInt> = None;
        for i in 0..3 {
            if !d[i][i].is_zero() {
                if let Some(p) = &prev {
                    assert!((&d[i][i] % p).is_zero());
                }
                prev = Some(d[i][i].clone());
            }
        }
    }

    #[test]
    fn solve_left_simple() {
        let a = m(&[&[2, 0], &[0, 3]]);
        let x = solve_left(&a, &[BigInt::from(4), BigInt::from(9)]).unwrap();
        assert_eq!(x, vec![BigInt::from(2), BigInt::from(3)]);
        assert!(solve_left(&a, &[BigInt::from(1), BigInt::from(0)]).is_none());
    }

    #[test]
    fn primitive_extend_examples() {
        assert_eq!(primitive_extend(&[1, 0, 0]).unwrap(), identity(3));
        let e = primitive_extend(&[2, 3]).unwrap();
        assert_eq!(e[0], vec![BigInt::from(2), BigInt::from(3)]);
        assert_eq!(determinant(&e).abs(), BigInt::one());
        assert!(primitive_extend(&[2, 4]).is_err());
    }

    #[test]
    fn invert_unimodular_roundtrip() {
        let e = primitive_extend(&[3, 5, 7]).unwrap();
        let inv = invert_unimodular(&e);
        assert_eq!(mat_mul(&e, &inv), identity(3));
    }
}
