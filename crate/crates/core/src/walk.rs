//! Szegedy walk on the bipartite double cover.
//!
//! The walk lives in `H^n ⊗ H^n` with basis `|x, y>`; the pair `(x, y)` is
//! stored at flat index `x * n + y` in every vector and matrix of this module.

use std::fmt::Write as _;

use ndarray::{Array1, Array2, ArrayView1};

use crate::error::{Error, Result};
use crate::graph::TransitionMatrix;
use crate::linalg;
use crate::scalar::Real;

#[inline]
pub fn pair_index(n: usize, x: usize, y: usize) -> usize {
    x * n + y
}

/// Real unit vector over the `n²` pairs `|x, y>`.
#[derive(Clone, Debug, PartialEq)]
pub struct WalkState<T> {
    n: usize,
    amplitudes: Array1<T>,
}

impl<T: Real> WalkState<T> {
    pub fn new(n: usize, amplitudes: Array1<T>) -> Result<Self> {
        if amplitudes.len() != n * n {
            return Err(Error::InvalidArgument(format!(
                "state has {} amplitudes, expected {}",
                amplitudes.len(),
                n * n
            )));
        }
        let norm = amplitudes.dot(&amplitudes).sqrt();
        if (norm - T::one()).abs() > T::lit(1e-10).max(T::tolerance()) {
            return Err(Error::InvalidArgument(format!("state norm is {norm}, expected 1")));
        }
        Ok(Self { n, amplitudes })
    }

    /// Basis state `|x, y>`.
    pub fn basis(n: usize, x: usize, y: usize) -> Self {
        let mut amplitudes = Array1::zeros(n * n);
        amplitudes[pair_index(n, x, y)] = T::one();
        Self { n, amplitudes }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn amplitudes(&self) -> ArrayView1<'_, T> {
        self.amplitudes.view()
    }

    pub fn amplitude(&self, x: usize, y: usize) -> T {
        self.amplitudes[pair_index(self.n, x, y)]
    }

    pub fn into_amplitudes(self) -> Array1<T> {
        self.amplitudes
    }

    pub fn norm(&self) -> T {
        self.amplitudes.dot(&self.amplitudes).sqrt()
    }

    /// `index,x,y,amplitude` rows, one per basis pair.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("index,x,y,amplitude\n");
        for (i, a) in self.amplitudes.iter().enumerate() {
            let _ = writeln!(out, "{},{},{},{}", i, i / self.n, i % self.n, crate::report::fmt_float(*a));
        }
        out
    }
}

/// `|Φ_x> = |x> ⊗ Σ_y √p_xy |y>`.
pub fn phi_state<T: Real>(x: usize, p: &TransitionMatrix<T>) -> Result<WalkState<T>> {
    let n = p.n();
    if x >= n {
        return Err(Error::VertexOutOfRange { vertex: x, n });
    }
    let mut amplitudes = Array1::zeros(n * n);
    for y in 0..n {
        amplitudes[pair_index(n, x, y)] = p.get(x, y).sqrt();
    }
    Ok(WalkState { n, amplitudes })
}

/// `|Ψ_y> = (Σ_x √p_yx |x>) ⊗ |y>`.
pub fn psi_state<T: Real>(y: usize, p: &TransitionMatrix<T>) -> Result<WalkState<T>> {
    let n = p.n();
    if y >= n {
        return Err(Error::VertexOutOfRange { vertex: y, n });
    }
    let mut amplitudes = Array1::zeros(n * n);
    for x in 0..n {
        amplitudes[pair_index(n, x, y)] = p.get(y, x).sqrt();
    }
    Ok(WalkState { n, amplitudes })
}

/// `|ψ(0)> = n^{-1/2} Σ_{x,y} √p_xy |x, y>`, always built from the unmarked chain.
pub fn initial_state<T: Real>(p: &TransitionMatrix<T>) -> WalkState<T> {
    let n = p.n();
    let scale = T::from_count(n).sqrt().recip();
    let amplitudes = Array1::from_shape_fn(n * n, |i| p.get(i / n, i % n).sqrt() * scale);
    WalkState { n, amplitudes }
}

/// Evolution operator `U = R_B R_A` together with its isometry factors.
///
/// The reflections `R_A = 2AAᵀ - I` and `R_B = 2BBᵀ - I` are `n² × n²` and are
/// materialized on demand only.
#[derive(Clone, Debug)]
pub struct WalkOperator<T> {
    n: usize,
    u: Array2<T>,
    a: Array2<T>,
    b: Array2<T>,
}

/// Max-abs residuals of the operator identities.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OperatorResiduals<T> {
    pub orthogonality: T,
    pub reflection_a: T,
    pub reflection_b: T,
    pub isometry_a: T,
    pub isometry_b: T,
    pub factorization: T,
}

impl<T: Real> OperatorResiduals<T> {
    pub fn max(&self) -> T {
        [self.orthogonality, self.reflection_a, self.reflection_b, self.isometry_a, self.isometry_b, self.factorization]
            .into_iter()
            .fold(T::zero(), T::max)
    }
}

impl<T: Real> WalkOperator<T> {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn matrix(&self) -> &Array2<T> {
        &self.u
    }

    pub fn a(&self) -> &Array2<T> {
        &self.a
    }

    pub fn b(&self) -> &Array2<T> {
        &self.b
    }

    pub fn reflection_a(&self) -> Array2<T> {
        reflection(&self.a)
    }

    pub fn reflection_b(&self) -> Array2<T> {
        reflection(&self.b)
    }

    pub fn apply(&self, v: ArrayView1<T>) -> Array1<T> {
        linalg::mat_vec(self.u.view(), v)
    }

    /// Dense residual check; costs `O(n⁶)`, intended for small `n`.
    pub fn residuals(&self) -> OperatorResiduals<T> {
        let ra = self.reflection_a();
        let rb = self.reflection_b();
        OperatorResiduals {
            orthogonality: linalg::identity_residual(self.u.t().dot(&self.u).view()),
            reflection_a: linalg::identity_residual(ra.dot(&ra).view()),
            reflection_b: linalg::identity_residual(rb.dot(&rb).view()),
            isometry_a: linalg::identity_residual(self.a.t().dot(&self.a).view()),
            isometry_b: linalg::identity_residual(self.b.t().dot(&self.b).view()),
            factorization: linalg::max_abs_diff(rb.dot(&ra).view(), self.u.view()),
        }
    }
}

fn reflection<T: Real>(factor: &Array2<T>) -> Array2<T> {
    let mut r = factor.dot(&factor.t());
    r.mapv_inplace(|v| v + v);
    for i in 0..r.nrows() {
        r[[i, i]] -= T::one();
    }
    r
}

/// Assembles `A`, `B` and `U = R_B R_A` for a row-stochastic `P`.
///
/// `U` is filled entrywise from the expansion
/// `U = 4 B Cᵀ Aᵀ − 2 BBᵀ − 2 AAᵀ + I` with `C = AᵀB`, `C_xy = √(p_xy p_yx)`,
/// which is `O(n⁴)` instead of the `O(n⁶)` dense product.
pub fn build_walk_operator<T: Real>(p: &TransitionMatrix<T>) -> WalkOperator<T> {
    let n = p.n();
    let n2 = n * n;
    let s = p.view().mapv(|v| v.sqrt());
    let c = Array2::from_shape_fn((n, n), |(y, x)| s[[y, x]] * s[[x, y]]);

    let mut a = Array2::zeros((n2, n));
    let mut b = Array2::zeros((n2, n));
    for x in 0..n {
        for y in 0..n {
            a[[pair_index(n, x, y), x]] = s[[x, y]];
            b[[pair_index(n, x, y), y]] = s[[y, x]];
        }
    }

    let two = T::lit(2.0);
    let four = T::lit(4.0);
    let mut u = Array2::zeros((n2, n2));
    for x in 0..n {
        for y in 0..n {
            let row = pair_index(n, x, y);
            let syx = s[[y, x]];
            let sxy = s[[x, y]];
            let mut out = u.row_mut(row);
            for xp in 0..n {
                let lead = four * syx * c[[y, xp]];
                let byy = two * syx * s[[y, xp]];
                for yp in 0..n {
                    let mut v = lead * s[[xp, yp]];
                    if yp == y {
                        v -= byy;
                    }
                    if xp == x {
                        v -= two * sxy * s[[x, yp]];
                    }
                    if xp == x && yp == y {
                        v += T::one();
                    }
                    out[pair_index(n, xp, yp)] = v;
                }
            }
        }
    }
    WalkOperator { n, u, a, b }
}

/// `Uᵗ s` by repeated matrix-vector products.
pub fn evolve<T: Real>(u: &WalkOperator<T>, s: &WalkState<T>, t: usize) -> WalkState<T> {
    let mut v = s.amplitudes.clone();
    for _ in 0..t {
        v = u.apply(v.view());
    }
    WalkState { n: s.n, amplitudes: v }
}

/// Marginal on `X`: `prob(x) = Σ_y amplitude(x, y)²`.
pub fn position_distribution<T: Real>(s: &WalkState<T>) -> Array1<T> {
    let n = s.n;
    Array1::from_shape_fn(n, |x| (0..n).map(|y| s.amplitude(x, y).powi(2)).sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{apply_marking, build_transition_matrix, Graph, MarkedSet};
    use approx::assert_abs_diff_eq;

    fn k(n: usize) -> TransitionMatrix<f64> {
        build_transition_matrix(&Graph::complete(n).unwrap())
    }

    fn marked_k3() -> TransitionMatrix<f64> {
        apply_marking(&k(3), &MarkedSet::new(3, [0]).unwrap()).unwrap()
    }

    #[test]
    fn phi_and_psi_on_triangle() {
        let h = 0.5f64.sqrt();
        let phi = phi_state(0, &k(3)).unwrap();
        assert_abs_diff_eq!(phi.amplitude(0, 1), h, epsilon = 1e-15);
        assert_abs_diff_eq!(phi.amplitude(0, 2), h, epsilon = 1e-15);
        assert_abs_diff_eq!(phi.norm(), 1.0, epsilon = 1e-15);
        let psi = psi_state(0, &k(3)).unwrap();
        assert_abs_diff_eq!(psi.amplitude(1, 0), h, epsilon = 1e-15);
        assert_abs_diff_eq!(psi.amplitude(2, 0), h, epsilon = 1e-15);
        assert_eq!(phi_state(0, &marked_k3()).unwrap(), WalkState::basis(3, 0, 0));
        assert_eq!(psi_state(0, &marked_k3()).unwrap(), WalkState::basis(3, 0, 0));
        assert!(phi_state(3, &k(3)).is_err());
    }

    #[test]
    fn psi_is_swapped_phi_for_symmetric_chains() {
        let p = k(4);
        for v in 0..4 {
            let phi = phi_state(v, &p).unwrap();
            let psi = psi_state(v, &p).unwrap();
            for x in 0..4 {
                for y in 0..4 {
                    assert_eq!(psi.amplitude(x, y), phi.amplitude(y, x));
                }
            }
        }
    }

    #[test]
    fn isolated_vertex_phi() {
        let p: TransitionMatrix<f64> = build_transition_matrix(&Graph::new(3, [(0, 1)]).unwrap());
        assert_eq!(phi_state(2, &p).unwrap(), WalkState::basis(3, 2, 2));
    }

    #[test]
    fn initial_state_amplitudes() {
        let s = initial_state(&k(3));
        for x in 0..3 {
            for y in 0..3 {
                let expect = if x == y { 0.0 } else { 1.0 / 6f64.sqrt() };
                assert_abs_diff_eq!(s.amplitude(x, y), expect, epsilon = 1e-15);
            }
        }
        let s = initial_state(&k(4));
        assert_abs_diff_eq!(s.amplitude(1, 3), 1.0 / (2.0 * 3f64.sqrt()), epsilon = 1e-15);
        assert_abs_diff_eq!(s.norm(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn operator_invariants_on_triangle() {
        let u = build_walk_operator(&k(3));
        assert_eq!(u.matrix().dim(), (9, 9));
        let r = u.residuals();
        assert!(r.max() < 1e-14, "{r:?}");
        let s = initial_state(&k(3));
        let moved = evolve(&u, &s, 7);
        let diff = &moved.amplitudes - &s.amplitudes;
        assert!(diff.dot(&diff).sqrt() < 1e-13);
    }

    #[test]
    fn identity_chain_gives_identity_walk() {
        let id = apply_marking(&k(3), &MarkedSet::first(3, 3).unwrap()).unwrap();
        let u = build_walk_operator(&id);
        for x in 0..3 {
            assert_eq!(u.a()[[pair_index(3, x, x), x]], 1.0);
            assert_eq!(u.b()[[pair_index(3, x, x), x]], 1.0);
            assert_eq!(u.a().column(x).sum(), 1.0);
        }
        // (2Π - I)² = I on the whole space, in particular on span{|x,x>}.
        assert!(linalg::identity_residual(u.matrix().view()) < 1e-15);
    }

    #[test]
    fn marked_triangle_moves_the_initial_state() {
        // Oracle: build U as the explicit product R_B R_A and compare the one-step
        // displacement to the value frozen from that computation.
        let u = build_walk_operator(&marked_k3());
        let product = u.reflection_b().dot(&u.reflection_a());
        let s = initial_state(&k(3));
        let oracle = product.dot(&s.amplitudes) - &s.amplitudes;
        let fast = evolve(&u, &s, 1).amplitudes - &s.amplitudes;
        assert_abs_diff_eq!(oracle.dot(&oracle), fast.dot(&fast), epsilon = 1e-13);
        assert_abs_diff_eq!(fast.dot(&fast), 8.0 / 3.0, epsilon = 1e-13);
    }

    #[test]
    fn evolve_zero_and_composition() {
        let u = build_walk_operator(&marked_k3());
        let s = initial_state(&k(3));
        assert_eq!(evolve(&u, &s, 0), s);
        let split = evolve(&u, &evolve(&u, &s, 4), 5);
        let whole = evolve(&u, &s, 9);
        let d = &split.amplitudes - &whole.amplitudes;
        assert!(d.iter().all(|v| v.abs() < 1e-12));
        assert_abs_diff_eq!(whole.norm(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn position_marginals() {
        let dist = position_distribution(&initial_state(&k(3)));
        for v in dist.iter() {
            assert_abs_diff_eq!(*v, 1.0 / 3.0, epsilon = 1e-15);
        }
        let dist = position_distribution(&WalkState::<f64>::basis(3, 0, 1));
        assert_eq!(dist.to_vec(), vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn csv_layout() {
        let csv = WalkState::<f64>::basis(2, 1, 0).to_csv();
        let lines: Vec<_> = csv.lines().collect();
        assert_eq!(lines[0], "index,x,y,amplitude");
        assert!(lines[3].starts_with("2,1,0,1.0000000000000000e0"));
    }

    #[test]
    fn single_precision_operator() {
        let p: TransitionMatrix<f32> = build_transition_matrix(&Graph::complete(4).unwrap());
        let r = build_walk_operator(&p).residuals();
        assert!(r.max() < 1e-5);
    }
}
