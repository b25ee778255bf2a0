//! Small dense linear-algebra kernels over [`Real`] scalars.
//!
//! Matrices here are at most a few hundred rows, so plain cyclic Jacobi and
//! partial-pivoting elimination are accurate and fast enough.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis, Zip};

use crate::error::{Error, Result};
use crate::scalar::Real;

const MAX_SWEEPS: usize = 100;

/// Row count above which [`mat_vec`] splits rows across threads.
const PARALLEL_ROWS: usize = 1024;

/// `m v`. Large products run row-parallel; each row is still a single
/// sequential dot product, so the result does not depend on thread count.
pub fn mat_vec<T: Real>(m: ArrayView2<T>, v: ArrayView1<T>) -> Array1<T> {
    if m.nrows() < PARALLEL_ROWS {
        return m.dot(&v);
    }
    let mut out = Array1::zeros(m.nrows());
    Zip::from(&mut out).and(m.rows()).par_for_each(|o, row| *o = row.dot(&v));
    out
}

/// Eigendecomposition of a real symmetric matrix.
///
/// Returns eigenvalues in ascending order and the matching orthonormal
/// eigenvectors as the columns of the second matrix. Only the symmetric part
/// of the input is meaningful; callers are expected to check symmetry.
pub fn symmetric_eigen<T: Real>(a: ArrayView2<T>) -> Result<(Array1<T>, Array2<T>)> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::NotSquare { rows: n, cols: a.ncols() });
    }
    let mut m = a.to_owned();
    let mut v = Array2::<T>::eye(n);
    let scale = m.iter().map(|x| *x * *x).sum::<T>().sqrt();
    let stop = T::epsilon() * scale;

    let mut converged = n <= 1;
    for _ in 0..MAX_SWEEPS {
        let off = off_diagonal_norm(&m);
        if off <= stop || off == T::zero() {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[[p, q]];
                if apq == T::zero() {
                    continue;
                }
                let theta = (m[[q, q]] - m[[p, p]]) / (T::lit(2.0) * apq);
                let sign = if theta >= T::zero() { T::one() } else { -T::one() };
                let t = sign / (theta.abs() + (theta * theta + T::one()).sqrt());
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                rotate_columns(&mut m, p, q, c, s);
                rotate_rows(&mut m, p, q, c, s);
                rotate_columns(&mut v, p, q, c, s);
                m[[p, q]] = T::zero();
                m[[q, p]] = T::zero();
            }
        }
    }
    if !converged && off_diagonal_norm(&m) > stop {
        return Err(Error::NoConvergence(MAX_SWEEPS));
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[[i, i]].partial_cmp(&m[[j, j]]).expect("finite eigenvalues"));
    let values = Array1::from_iter(order.iter().map(|&i| m[[i, i]]));
    let vectors = v.select(Axis(1), &order);
    Ok((values, vectors))
}

fn off_diagonal_norm<T: Real>(m: &Array2<T>) -> T {
    let mut acc = T::zero();
    for ((i, j), x) in m.indexed_iter() {
        if i != j {
            acc += *x * *x;
        }
    }
    acc.sqrt()
}

fn rotate_columns<T: Real>(m: &mut Array2<T>, p: usize, q: usize, c: T, s: T) {
    for k in 0..m.nrows() {
        let mkp = m[[k, p]];
        let mkq = m[[k, q]];
        m[[k, p]] = c * mkp - s * mkq;
        m[[k, q]] = s * mkp + c * mkq;
    }
}

fn rotate_rows<T: Real>(m: &mut Array2<T>, p: usize, q: usize, c: T, s: T) {
    for k in 0..m.ncols() {
        let mpk = m[[p, k]];
        let mqk = m[[q, k]];
        m[[p, k]] = c * mpk - s * mqk;
        m[[q, k]] = s * mpk + c * mqk;
    }
}

/// Solves `a x = b` by Gaussian elimination with partial pivoting.
pub fn solve<T: Real>(a: ArrayView2<T>, b: &Array1<T>) -> Result<Array1<T>> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::NotSquare { rows: n, cols: a.ncols() });
    }
    let mut m = a.to_owned();
    let mut x = b.clone();
    let scale = m.iter().fold(T::zero(), |acc, v| acc.max(v.abs()));
    let tiny = T::epsilon() * scale * T::from_count(n.max(1));

    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| m[[i, col]].abs().partial_cmp(&m[[j, col]].abs()).unwrap())
            .expect("non-empty range");
        if m[[pivot, col]].abs() <= tiny {
            return Err(Error::Singular);
        }
        if pivot != col {
            for k in 0..n {
                m.swap([pivot, k], [col, k]);
            }
            x.swap(pivot, col);
        }
        for row in (col + 1)..n {
            let factor = m[[row, col]] / m[[col, col]];
            if factor == T::zero() {
                continue;
            }
            for k in col..n {
                let v = m[[col, k]];
                m[[row, k]] -= factor * v;
            }
            let xc = x[col];
            x[row] -= factor * xc;
        }
    }
    for col in (0..n).rev() {
        let mut acc = x[col];
        for k in (col + 1)..n {
            acc -= m[[col, k]] * x[k];
        }
        x[col] = acc / m[[col, col]];
    }
    Ok(x)
}

/// Largest singular value, from the top eigenvalue of `mᵀm`.
pub fn spectral_norm<T: Real>(m: ArrayView2<T>) -> Result<T> {
    let gram = m.t().dot(&m);
    let (values, _) = symmetric_eigen(gram.view())?;
    Ok(values.iter().fold(T::zero(), |acc, v| acc.max(*v)).max(T::zero()).sqrt())
}

pub fn max_abs_diff<T: Real>(a: ArrayView2<T>, b: ArrayView2<T>) -> T {
    assert_eq!(a.dim(), b.dim(), "shape mismatch");
    a.iter().zip(b.iter()).fold(T::zero(), |acc, (x, y)| acc.max((*x - *y).abs()))
}

/// Max-abs deviation of `m` from the identity.
pub fn identity_residual<T: Real>(m: ArrayView2<T>) -> T {
    let mut worst = T::zero();
    for ((i, j), x) in m.indexed_iter() {
        let target = if i == j { T::one() } else { T::zero() };
        worst = worst.max((*x - target).abs());
    }
    worst
}

/// Max-abs asymmetry `|m_ij - m_ji|`.
pub fn asymmetry<T: Real>(m: ArrayView2<T>) -> T {
    max_abs_diff(m, m.t())
}

/// Integer power by repeated multiplication; `t = 0` gives the identity.
pub fn matrix_power<T: Real>(m: ArrayView2<T>, t: usize) -> Array2<T> {
    let mut acc = Array2::<T>::eye(m.nrows());
    for _ in 0..t {
        acc = m.dot(&acc);
    }
    acc
}
