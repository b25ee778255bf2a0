//! Coherent and decoherent quantum hitting times.
//!
//! `F(T)` is the time-averaged squared distance between the evolved state and
//! `ψ(0)`; the hitting time is the first `T` with `F(T) ≥ 1 - m/n`. Under
//! decoherence the average over noise sequences reduces to inner products
//! with powers of the averaged operator, so only `Ū_dec` is ever needed.

use ndarray::{Array1, ArrayView1};
use serde::ser::Serializer;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::{apply_marking, submatrix_pm, MarkedSet, TransitionMatrix};
use crate::linalg;
use crate::percolation::{
    build_averaged_operator_exact, build_averaged_operator_mc, AveragedOperator, OperatorMode, PercolationModel,
    Variant,
};
use crate::report::fmt_float;
use crate::scalar::Real;
use crate::spectral::{spectral_data, split_initial_state, BoundReport};
use crate::walk::{build_walk_operator, initial_state};

/// Scan length used when no closed-form bound applies.
pub const FALLBACK_TCAP: usize = 1000;

/// Coherent `F(0..=t_max)` in the norm form, one operator application per step.
pub fn coherent_f_curve<T: Real>(p: &TransitionMatrix<T>, marked: &MarkedSet, t_max: usize) -> Result<Vec<T>> {
    let psi0 = initial_state(p).into_amplitudes();
    let u = build_walk_operator(&apply_marking(p, marked)?);
    let mut v = psi0.clone();
    let mut sum = T::zero();
    let mut curve = Vec::with_capacity(t_max + 1);
    for t in 0..=t_max {
        if t > 0 {
            v = u.apply(v.view());
        }
        sum += (&v - &psi0).mapv(|d| d * d).sum();
        curve.push(sum / T::from_count(t + 1));
    }
    Ok(curve)
}

/// `2/(T+1) Σ_t (<ψ|ψ> - <ψ|M^t ψ>)`, the inner-product form of `F`.
///
/// Using `<ψ|ψ>` instead of the literal 1 makes the `t = 0` term vanish
/// exactly.
fn inner_product_curve<T: Real>(
    psi0: ArrayView1<T>,
    apply: impl Fn(ArrayView1<T>) -> Array1<T>,
    t_max: usize,
) -> Vec<T> {
    let norm_sq = psi0.dot(&psi0);
    let two = T::lit(2.0);
    let mut v = psi0.to_owned();
    let mut sum = T::zero();
    let mut curve = Vec::with_capacity(t_max + 1);
    for t in 0..=t_max {
        if t > 0 {
            v = apply(v.view());
        }
        sum += norm_sq - psi0.dot(&v);
        curve.push(two * sum / T::from_count(t + 1));
    }
    curve
}

/// `F_dec(0..=t_max)` from `Ū_dec` and the unmarked base chain `p`.
pub fn decoherent_f_curve<T: Real>(ubar: &AveragedOperator<T>, p: &TransitionMatrix<T>, t_max: usize) -> Vec<T> {
    let psi0 = initial_state(p).into_amplitudes();
    inner_product_curve(psi0.view(), |v| linalg::mat_vec(ubar.matrix().view(), v), t_max)
}

/// First crossing of a hitting-time scan.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TStar {
    Reached(usize),
    NotReached { t_max: usize },
}

impl TStar {
    pub fn value(&self) -> Option<usize> {
        match self {
            Self::Reached(t) => Some(*t),
            Self::NotReached { .. } => None,
        }
    }
}

impl Serialize for TStar {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Self::Reached(t) => s.serialize_u64(*t as u64),
            Self::NotReached { .. } => s.serialize_str("not reached"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum HittingMode {
    Coherent,
    Decoherent { p: f64, variant: Variant, operator: OperatorMode },
}

#[derive(Clone, Debug)]
pub struct HittingTimeReport<T> {
    pub f_curve: Vec<T>,
    pub threshold: T,
    pub t_star: TStar,
    /// The bound the scan is compared with: Szegedy's for coherent runs,
    /// the decoherent bound otherwise.
    pub bound: Option<T>,
    pub bound_report: Option<BoundReport<T>>,
    /// Whether `p ≤ p_threshold` (decoherent runs only).
    pub within_threshold: Option<bool>,
    pub mode: HittingMode,
}

/// JSON summary of one scan.
#[derive(Clone, Debug, Serialize)]
#[allow(non_snake_case)]
pub struct HittingSummary {
    pub T_star: TStar,
    pub T_max: usize,
    pub threshold: f64,
    pub p: f64,
    pub variant: Option<Variant>,
    pub mode: HittingMode,
    pub bound: Option<f64>,
    pub within_bound: Option<bool>,
    pub within_threshold: Option<bool>,
}

impl<T: Real> HittingTimeReport<T> {
    fn from_curve(f_curve: Vec<T>, threshold: T, mode: HittingMode) -> Self {
        let t_star = match f_curve.iter().position(|&f| f >= threshold) {
            Some(t) => TStar::Reached(t),
            None => TStar::NotReached { t_max: f_curve.len() - 1 },
        };
        Self { f_curve, threshold, t_star, bound: None, bound_report: None, within_threshold: None, mode }
    }

    pub fn t_max(&self) -> usize {
        self.f_curve.len() - 1
    }

    /// `T_star ≤ bound`; `None` without a bound, `false` when not reached.
    pub fn within_bound(&self) -> Option<bool> {
        let bound = self.bound?;
        Some(match self.t_star {
            TStar::Reached(t) => T::from_count(t) <= bound,
            TStar::NotReached { .. } => false,
        })
    }

    pub fn summary(&self) -> HittingSummary {
        let (p, variant) = match &self.mode {
            HittingMode::Coherent => (0.0, None),
            HittingMode::Decoherent { p, variant, .. } => (*p, Some(*variant)),
        };
        HittingSummary {
            T_star: self.t_star,
            T_max: self.t_max(),
            threshold: self.threshold.as_f64(),
            p,
            variant,
            mode: self.mode.clone(),
            bound: self.bound.map(Real::as_f64),
            within_bound: self.within_bound(),
            within_threshold: self.within_threshold,
        }
    }

    /// Columns `T,F,threshold,crossed`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("T,F,threshold,crossed\n");
        let th = fmt_float(self.threshold);
        for (t, &f) in self.f_curve.iter().enumerate() {
            out.push_str(&format!("{t},{},{th},{}\n", fmt_float(f), f >= self.threshold));
        }
        out
    }
}

fn cap_from_bound<T: Real>(bound: Option<T>) -> usize {
    bound.and_then(|b| b.ceil().to_usize()).filter(|&c| c > 0).unwrap_or(FALLBACK_TCAP)
}

/// Coherent quantum hitting time.
///
/// Without `t_cap` the scan runs to `⌈szegedy_bound⌉`, or to
/// [`FALLBACK_TCAP`] when the bound is unavailable (empty `M`, asymmetric `P`).
pub fn coherent_qht<T: Real>(
    p: &TransitionMatrix<T>,
    marked: &MarkedSet,
    t_cap: Option<usize>,
) -> Result<HittingTimeReport<T>> {
    let bound = spectral_data(p, marked).and_then(|sd| sd.szegedy_bound()).ok();
    let t_max = t_cap.unwrap_or_else(|| cap_from_bound(bound));
    let curve = coherent_f_curve(p, marked, t_max)?;
    let mut report = HittingTimeReport::from_curve(curve, T::one() - marked.epsilon(), HittingMode::Coherent);
    report.bound = bound;
    Ok(report)
}

/// Decoherent quantum hitting time.
///
/// Without `t_cap` the scan runs to `⌈dqht_bound(p)⌉` when `p` is below the
/// threshold and to [`FALLBACK_TCAP`] otherwise.
pub fn decoherent_qht<T: Real>(
    model: &PercolationModel<T>,
    marked: &MarkedSet,
    mode: OperatorMode,
    t_cap: Option<usize>,
    enum_cap: u64,
) -> Result<HittingTimeReport<T>> {
    let ubar = match mode {
        OperatorMode::Exact => build_averaged_operator_exact(model, marked, enum_cap)?,
        OperatorMode::MonteCarlo { samples, seed } => build_averaged_operator_mc(model, marked, samples, seed)?,
    };
    decoherent_qht_with(&ubar, model, t_cap)
}

/// As [`decoherent_qht`] with a prebuilt averaged operator.
pub fn decoherent_qht_with<T: Real>(
    ubar: &AveragedOperator<T>,
    model: &PercolationModel<T>,
    t_cap: Option<usize>,
) -> Result<HittingTimeReport<T>> {
    let marked = ubar.marked();
    let p = crate::graph::build_transition_matrix::<T>(model.base());
    let bounds = spectral_data(&p, marked).and_then(|sd| BoundReport::new(&sd, model.a_c(), model.p())).ok();
    let within_threshold = bounds.as_ref().map(|b| model.p() <= b.p_threshold);
    let bound = bounds.as_ref().map(|b| b.dqht_bound);
    let t_max = t_cap.unwrap_or_else(|| cap_from_bound(bound.filter(|_| within_threshold == Some(true))));

    let curve = decoherent_f_curve(ubar, &p, t_max);
    let mode = HittingMode::Decoherent { p: model.p().as_f64(), variant: model.variant(), operator: ubar.mode() };
    let mut report = HittingTimeReport::from_curve(curve, T::one() - marked.epsilon(), mode);
    report.bound = bound;
    report.bound_report = bounds;
    report.within_threshold = within_threshold;
    Ok(report)
}

/// Split of `F_dec` into marked, cross and unmarked contributions.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GTermReport<T> {
    #[serde(rename = "T")]
    pub t: usize,
    #[serde(rename = "G_M")]
    pub g_m: T,
    #[serde(rename = "G_MMbot")]
    pub g_m_mbot: T,
    #[serde(rename = "G_Mbot")]
    pub g_mbot: T,
    pub epsilon: T,
    /// `F_dec(T)` from the inner-product form, for the identity check.
    pub f_dec: T,
}

impl<T: Real> GTermReport<T> {
    /// `|F_dec - (2 - 2ΣG)|`.
    pub fn identity_residual(&self) -> T {
        (self.f_dec - (T::lit(2.0) - T::lit(2.0) * (self.g_m + self.g_m_mbot + self.g_mbot))).abs()
    }
}

pub fn g_term_decomposition<T: Real>(ubar: &AveragedOperator<T>, p: &TransitionMatrix<T>, t: usize) -> GTermReport<T> {
    let marked = ubar.marked();
    let split = split_initial_state(p, marked);
    let (mut vm, mut vp) = (split.marked.clone(), split.perp.clone());
    let (mut g_m, mut cross, mut g_mbot) = (T::zero(), T::zero(), T::zero());
    for step in 0..=t {
        if step > 0 {
            vm = linalg::mat_vec(ubar.matrix().view(), vm.view());
            vp = linalg::mat_vec(ubar.matrix().view(), vp.view());
        }
        g_m += split.marked.dot(&vm);
        cross += split.marked.dot(&vp) + split.perp.dot(&vm);
        g_mbot += split.perp.dot(&vp);
    }
    let k = T::from_count(t + 1);
    let f_dec = *decoherent_f_curve(ubar, p, t).last().expect("non-empty curve");
    GTermReport { t, g_m: g_m / k, g_m_mbot: cross / k, g_mbot: g_mbot / k, epsilon: marked.epsilon(), f_dec }
}

/// Classical hitting time averaged over a uniform start: solves
/// `(I - P_M) h = 1` and returns `Σ h / n`, marked starts counting zero.
pub fn classical_hitting_time<T: Real>(p: &TransitionMatrix<T>, marked: &MarkedSet) -> Result<T> {
    if marked.is_empty() {
        return Err(Error::EmptyMarkedSet);
    }
    if marked.m() == p.n() {
        return Ok(T::zero());
    }
    let pm = submatrix_pm(p, marked)?;
    let k = pm.nrows();
    let system = ndarray::Array2::<T>::eye(k) - &pm;
    let h = linalg::solve(system.view(), &Array1::from_elem(k, T::one()))?;
    Ok(h.sum() / T::from_count(p.n()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_transition_matrix, Graph};
    use crate::percolation::DEFAULT_ENUMERATION_CAP;
    use approx::assert_abs_diff_eq;

    fn k(n: usize) -> TransitionMatrix<f64> {
        build_transition_matrix(&Graph::complete(n).unwrap())
    }

    #[test]
    fn empty_marked_set_never_hits() {
        let curve = coherent_f_curve(&k(4), &MarkedSet::empty(4), 50).unwrap();
        assert!(curve.iter().all(|f| f.abs() < 1e-12));
        let r = coherent_qht(&k(4), &MarkedSet::empty(4), None).unwrap();
        assert_eq!(r.t_star, TStar::NotReached { t_max: FALLBACK_TCAP });
        assert_eq!(serde_json::to_value(r.summary()).unwrap()["T_star"], "not reached");
    }

    #[test]
    fn coherent_forms_agree() {
        let p = k(3);
        let marked = MarkedSet::new(3, [0]).unwrap();
        let curve = coherent_f_curve(&p, &marked, 40).unwrap();
        assert_eq!(curve[0], 0.0);
        let u = build_walk_operator(&apply_marking(&p, &marked).unwrap());
        let psi0 = initial_state(&p).into_amplitudes();
        let mut v = psi0.clone();
        let mut overlap = 0.0;
        for (t, f) in curve.iter().enumerate() {
            if t > 0 {
                v = u.apply(v.view());
            }
            overlap += psi0.dot(&v);
            assert_abs_diff_eq!(*f, 2.0 - 2.0 * overlap / (t + 1) as f64, epsilon = 1e-10);
            assert!((0.0..=4.0).contains(f));
        }
    }

    #[test]
    fn k3_hitting_time_is_within_szegedy_bound() {
        let r = coherent_qht(&k(3), &MarkedSet::new(3, [0]).unwrap(), None).unwrap();
        assert_eq!(r.t_max(), 142);
        let t = r.t_star.value().unwrap();
        assert!(t <= 142);
        for f in &r.f_curve[..t] {
            assert!(*f < r.threshold);
        }
        assert!(r.f_curve[t] >= r.threshold);
        assert_eq!(r.within_bound(), Some(true));
    }

    #[test]
    fn decoherent_at_zero_matches_coherent() {
        for n in [3, 4] {
            let g = Graph::complete(n).unwrap();
            let marked = MarkedSet::new(n, [0]).unwrap();
            let model = PercolationModel::new(g.clone(), 0.0, Variant::BondFlip).unwrap();
            let d = decoherent_qht(&model, &marked, OperatorMode::Exact, Some(60), DEFAULT_ENUMERATION_CAP).unwrap();
            let c = coherent_qht(&build_transition_matrix(&g), &marked, Some(60)).unwrap();
            assert_eq!(d.t_star, c.t_star);
            for (a, b) in d.f_curve.iter().zip(&c.f_curve) {
                assert_abs_diff_eq!(a, b, epsilon = 1e-12);
            }
            assert_eq!(d.within_threshold, Some(true));
        }
    }

    #[test]
    fn full_flip_freezes_the_walk() {
        let model = PercolationModel::new(Graph::complete(3).unwrap(), 1.0, Variant::BondFlip).unwrap();
        let marked = MarkedSet::new(3, [0]).unwrap();
        let r = decoherent_qht(&model, &marked, OperatorMode::Exact, None, DEFAULT_ENUMERATION_CAP).unwrap();
        assert_eq!(r.within_threshold, Some(false));
        assert_eq!(r.t_star, TStar::NotReached { t_max: FALLBACK_TCAP });
        assert!(r.f_curve.iter().all(|f: &f64| f.abs() <= 1e-10));
    }

    #[test]
    fn below_threshold_respects_bound() {
        let g = Graph::complete(3).unwrap();
        let marked = MarkedSet::new(3, [0]).unwrap();
        let p_th: f64 = spectral_data(&build_transition_matrix(&g), &marked).unwrap().p_threshold(3).unwrap();
        let model = PercolationModel::new(g, p_th / 2.0, Variant::BondFlip).unwrap();
        let r = decoherent_qht(&model, &marked, OperatorMode::Exact, None, DEFAULT_ENUMERATION_CAP).unwrap();
        assert_eq!(r.within_threshold, Some(true));
        assert_eq!(r.within_bound(), Some(true));
    }

    #[test]
    fn g_terms() {
        let g = Graph::complete(3).unwrap();
        let p = build_transition_matrix::<f64>(&g);
        for (prob, marked) in
            [(0.0, MarkedSet::new(3, [0]).unwrap()), (0.3, MarkedSet::new(3, [0]).unwrap()), (0.3, MarkedSet::empty(3))]
        {
            let model = PercolationModel::new(g.clone(), prob, Variant::BondFlip).unwrap();
            let ubar = build_averaged_operator_exact(&model, &marked, DEFAULT_ENUMERATION_CAP).unwrap();
            for t in 0..6 {
                let r = g_term_decomposition(&ubar, &p, t);
                assert!(r.identity_residual() <= 1e-10);
                assert!(r.g_m <= r.epsilon + 1e-10);
                if marked.is_empty() {
                    assert_eq!((r.g_m, r.g_m_mbot), (0.0, 0.0));
                }
            }
        }
        let model = PercolationModel::new(g, 0.0, Variant::BondFlip).unwrap();
        let marked = MarkedSet::new(3, [0]).unwrap();
        let ubar = build_averaged_operator_exact(&model, &marked, DEFAULT_ENUMERATION_CAP).unwrap();
        let r = g_term_decomposition(&ubar, &p, 0);
        assert_abs_diff_eq!(r.g_m, 1.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(r.g_mbot, 2.0 / 3.0, epsilon = 1e-15);
        assert_eq!(r.g_m_mbot, 0.0);
    }

    #[test]
    fn classical_hitting_times() {
        let one = |n| MarkedSet::new(n, [0]).unwrap();
        assert_abs_diff_eq!(classical_hitting_time(&k(3), &one(3)).unwrap(), 4.0 / 3.0, epsilon = 1e-14);
        assert_abs_diff_eq!(classical_hitting_time(&k(4), &one(4)).unwrap(), 9.0 / 4.0, epsilon = 1e-14);
        for n in 5..10 {
            let expect = ((n - 1) * (n - 1)) as f64 / n as f64;
            assert_abs_diff_eq!(classical_hitting_time(&k(n), &one(n)).unwrap(), expect, epsilon = 1e-12);
        }
        assert_eq!(classical_hitting_time(&k(3), &MarkedSet::first(3, 3).unwrap()).unwrap(), 0.0);
        assert!(classical_hitting_time(&k(3), &MarkedSet::empty(3)).is_err());
    }

    #[test]
    fn csv_layout() {
        let r = coherent_qht(&k(3), &MarkedSet::new(3, [0]).unwrap(), Some(3)).unwrap();
        let csv = r.to_csv();
        let lines: Vec<_> = csv.lines().collect();
        assert_eq!(lines[0], "T,F,threshold,crossed");
        assert_eq!(lines.len(), 5);
        assert!(lines[1].starts_with("0,0.0000000000000000e0,"));
    }
}
