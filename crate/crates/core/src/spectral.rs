//! Spectral data of the unmarked block `P_M` and the closed-form hitting-time
//! bounds built from it.
//!
//! Every bound is a ν-weighted sum over the eigenvalues `λ'_k` of `P_M`, where
//! `ν_k` is the overlap of the eigenvector `v'_k` with `û = n^{-1/2}·1`.
//! Degenerate eigenvalues are handled by summing squared overlaps inside each
//! eigenspace, so the results do not depend on the basis the eigensolver picks.

use ndarray::{Array1, Array2};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::{apply_marking, submatrix_pm, MarkedSet, TransitionMatrix};
use crate::linalg;
use crate::scalar::Real;
use crate::walk::pair_index;

/// Overlap mass below which an eigenvalue-1 group is treated as absent.
const NEGLIGIBLE_MASS: f64 = 1e-12;
/// Distance from 1 below which an eigenvalue counts as 1.
const UNIT_EIGENVALUE: f64 = 1e-12;

/// `C = AᵀB` with entries `√(p_xy p_yx)`.
pub fn build_c<T: Real>(p: &TransitionMatrix<T>) -> Array2<T> {
    let n = p.n();
    Array2::from_shape_fn((n, n), |(x, y)| (p.get(x, y) * p.get(y, x)).sqrt())
}

/// Reorders rows and columns so unmarked vertices come first (in order),
/// followed by the marked ones.
pub fn permute_marked_last<T: Real>(m: &Array2<T>, marked: &MarkedSet) -> Array2<T> {
    let mut order = marked.unmarked();
    order.extend_from_slice(marked.members());
    Array2::from_shape_fn(m.dim(), |(i, j)| m[[order[i], order[j]]])
}

/// Max-abs deviation of the permuted `C` of the marked chain from
/// `blkdiag(P_M, I_m)`.
pub fn block_structure_residual<T: Real>(p: &TransitionMatrix<T>, marked: &MarkedSet) -> Result<T> {
    let c = permute_marked_last(&build_c(&apply_marking(p, marked)?), marked);
    let pm = submatrix_pm(p, marked)?;
    let k = pm.nrows();
    let mut expect = Array2::<T>::eye(p.n());
    expect.slice_mut(ndarray::s![..k, ..k]).assign(&pm);
    Ok(linalg::max_abs_diff(c.view(), expect.view()))
}

/// One distinct eigenvalue of `P_M` with the `û` mass of its eigenspace.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EigenGroup<T> {
    pub lambda: T,
    pub multiplicity: usize,
    pub nu_sq: T,
}

#[derive(Clone, Debug)]
pub struct SpectralData<T> {
    /// Ascending eigenvalues of `P_M`, clamped to `[-1, 1]`.
    pub lambdas: Array1<T>,
    /// Raw overlaps `ν_k = <v'_k|û>`; individual values are basis dependent
    /// inside degenerate eigenspaces.
    pub nus: Array1<T>,
    /// `θ_k = arccos λ'_k`.
    pub thetas: Array1<T>,
    /// Eigenvectors of `P_M` as columns, matching `lambdas`.
    pub eigenvectors: Array2<T>,
    pub groups: Vec<EigenGroup<T>>,
    pub epsilon: T,
    pub lambda_max_abs: T,
}

/// Eigendecomposition of `P_M` and the overlaps with `û`.
///
/// Requires a symmetric `P` and a non-empty marked set.
pub fn spectral_data<T: Real>(p: &TransitionMatrix<T>, marked: &MarkedSet) -> Result<SpectralData<T>> {
    if !p.is_symmetric() {
        return Err(Error::NotSymmetric);
    }
    if marked.is_empty() {
        return Err(Error::EmptyMarkedSet);
    }
    let pm = submatrix_pm(p, marked)?;
    let (raw, vectors) = linalg::symmetric_eigen(pm.view())?;
    let u_hat = Array1::from_elem(pm.nrows(), T::from_count(p.n()).sqrt().recip());
    let nus = vectors.t().dot(&u_hat);
    Ok(SpectralData::assemble(marked.epsilon(), raw, nus, vectors))
}

impl<T: Real> SpectralData<T> {
    /// Builds spectral data from explicit eigenvalues and overlaps, for
    /// synthetic spectra that do not come from a graph.
    pub fn from_eigenpairs(epsilon: T, lambdas: Vec<T>, nus: Vec<T>) -> Result<Self> {
        if lambdas.len() != nus.len() || lambdas.is_empty() {
            return Err(Error::InvalidArgument("need matching, non-empty eigenvalue and overlap lists".into()));
        }
        let k = lambdas.len();
        let mut pairs: Vec<(T, T)> = lambdas.into_iter().zip(nus).collect();
        pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite eigenvalues"));
        let (l, v): (Vec<T>, Vec<T>) = pairs.into_iter().unzip();
        Ok(Self::assemble(epsilon, Array1::from(l), Array1::from(v), Array2::eye(k)))
    }

    fn assemble(epsilon: T, raw: Array1<T>, nus: Array1<T>, eigenvectors: Array2<T>) -> Self {
        let lambdas = raw.mapv(|l| l.max(-T::one()).min(T::one()));
        let thetas = lambdas.mapv(|l| l.acos());
        let lambda_max_abs = lambdas.iter().fold(T::zero(), |acc, l| acc.max(l.abs()));
        let gap = T::lit(1e-9).max(T::epsilon().sqrt());

        let mut groups: Vec<EigenGroup<T>> = Vec::new();
        for (&lambda, &nu) in lambdas.iter().zip(nus.iter()) {
            match groups.last_mut() {
                Some(g) if (lambda - g.lambda).abs() <= gap => {
                    let k = T::from_count(g.multiplicity);
                    g.lambda = (g.lambda * k + lambda) / (k + T::one());
                    g.multiplicity += 1;
                    g.nu_sq += nu * nu;
                }
                _ => groups.push(EigenGroup { lambda, multiplicity: 1, nu_sq: nu * nu }),
            }
        }
        Self { lambdas, nus, thetas, eigenvectors, groups, epsilon, lambda_max_abs }
    }

    /// `Σ_k ν_k²`, which equals `1 - m/n` for data built from a graph.
    pub fn total_mass(&self) -> T {
        self.groups.iter().map(|g| g.nu_sq).sum()
    }

    /// `Σ ν² f(λ)` over eigenvalue groups. Groups at `λ = 1` contribute
    /// nothing when their mass vanishes and make the sum infinite otherwise.
    fn weighted_sum(&self, f: impl Fn(T) -> T) -> Result<T> {
        let mut acc = T::zero();
        for g in &self.groups {
            if T::one() - g.lambda <= T::lit(UNIT_EIGENVALUE) {
                if g.nu_sq <= T::lit(NEGLIGIBLE_MASS) {
                    continue;
                }
                return Err(Error::BoundInfinite { lambda: g.lambda.as_f64(), nu_sq: g.nu_sq.as_f64() });
            }
            acc += g.nu_sq * f(g.lambda);
        }
        Ok(acc)
    }

    /// `S = Σ ν_k² / √(1 - λ'_k)`.
    pub fn sqrt_gap_sum(&self) -> Result<T> {
        self.weighted_sum(|l| (T::one() - l).sqrt().recip())
    }

    fn one_minus_eps(&self) -> T {
        T::one() - self.epsilon
    }

    /// `100/(1 - m/n) · S`.
    pub fn szegedy_bound(&self) -> Result<T> {
        Ok(T::lit(100.0) * (self.sqrt_gap_sum()? / self.one_minus_eps()))
    }

    /// `E = 1/(1 - m/n) · Σ ν_k² / arccos λ'_k`.
    pub fn e_quantity(&self) -> Result<T> {
        Ok(self.weighted_sum(|l| l.acos().recip())? / self.one_minus_eps())
    }

    /// Largest percolation probability covered by the decoherent bound,
    /// `1/(300 a_c E)`.
    pub fn p_threshold(&self, a_c: usize) -> Result<T> {
        Ok((T::lit(300.0) * T::from_count(a_c) * self.e_quantity()?).recip())
    }

    /// `8 S/(1-ε) + 942 a_c p (S/(1-ε))²`.
    pub fn dqht_bound(&self, a_c: usize, p: T) -> Result<T> {
        let lead = self.sqrt_gap_sum()? / self.one_minus_eps();
        Ok(T::lit(8.0) * lead + T::lit(942.0) * T::from_count(a_c) * p * lead * lead)
    }

    /// `16 S + 3768 a_c p S²`, without the `1/(1-ε)` factors.
    pub fn detection_bound(&self, a_c: usize, p: T) -> Result<T> {
        let s = self.sqrt_gap_sum()?;
        Ok(T::lit(16.0) * s + T::lit(3768.0) * T::from_count(a_c) * p * s * s)
    }

    /// `dqht_bound(p_threshold) · √(1 - |λ|_max)`: stays bounded across a
    /// graph family when the decoherent hitting time scales as
    /// `1/√(1 - |λ|_max)`. The edge-slot count cancels out of this product.
    pub fn corollary_scaling(&self) -> Result<T> {
        if T::one() - self.lambda_max_abs <= T::lit(UNIT_EIGENVALUE) {
            return Err(Error::SpectralRadiusOne(self.lambda_max_abs.as_f64()));
        }
        let p = self.p_threshold(1)?;
        Ok(self.dqht_bound(1, p)? * (T::one() - self.lambda_max_abs).sqrt())
    }
}

/// Every closed-form bound evaluated at one `(a_c, p)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundReport<T> {
    pub szegedy_bound: T,
    #[serde(rename = "E")]
    pub e: T,
    pub p_threshold: T,
    pub dqht_bound: T,
    pub detection_bound: T,
    pub a_c: usize,
    pub lambda_max_abs: T,
}

impl<T: Real> BoundReport<T> {
    pub fn new(sd: &SpectralData<T>, a_c: usize, p: T) -> Result<Self> {
        Ok(Self {
            szegedy_bound: sd.szegedy_bound()?,
            e: sd.e_quantity()?,
            p_threshold: sd.p_threshold(a_c)?,
            dqht_bound: sd.dqht_bound(a_c, p)?,
            detection_bound: sd.detection_bound(a_c, p)?,
            a_c,
            lambda_max_abs: sd.lambda_max_abs,
        })
    }
}

/// `ψ(0) = ψ_{M⊥} + ψ_M`, unnormalized halves.
#[derive(Clone, Debug)]
pub struct InitialStateSplit<T> {
    /// Amplitudes on rows `x ∉ M`.
    pub perp: Array1<T>,
    /// Amplitudes on rows `x ∈ M`; squared norm `m/n`.
    pub marked: Array1<T>,
}

pub fn split_initial_state<T: Real>(p: &TransitionMatrix<T>, marked: &MarkedSet) -> InitialStateSplit<T> {
    let n = p.n();
    let scale = T::from_count(n).sqrt().recip();
    let mut perp = Array1::zeros(n * n);
    let mut mk = Array1::zeros(n * n);
    for x in 0..n {
        let target = if marked.contains(x) { &mut mk } else { &mut perp };
        for y in 0..n {
            target[pair_index(n, x, y)] = p.get(x, y).sqrt() * scale;
        }
    }
    InitialStateSplit { perp, marked: mk }
}
