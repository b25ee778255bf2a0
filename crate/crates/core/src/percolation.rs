//! Bond-percolation decoherence.
//!
//! Before every step each edge slot of the model is independently altered
//! with probability `p`: in the bond-flip variant every pair of the complete
//! graph toggles its presence relative to the base graph, in the removal-only
//! variant only base edges can disappear. The walker then takes one Szegedy
//! step on the (marked) chain of the resulting graph. Averaging the step
//! operators over the graph distribution gives `Ū_dec`.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{all_pairs, apply_marking, build_transition_matrix, Graph, MarkedSet};
use crate::linalg;
use crate::rng;
use crate::scalar::Real;
use crate::walk::{build_walk_operator, WalkOperator};

/// Default limit on the number of candidate graphs enumerated exactly.
pub const DEFAULT_ENUMERATION_CAP: u64 = 1 << 10;
/// Default Monte Carlo sample count.
pub const DEFAULT_SAMPLES: u64 = 10_000;
/// Default limit on enumerated step sequences for the sequence-level checks.
pub const DEFAULT_SEQUENCE_BUDGET: u64 = 1 << 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Variant {
    #[serde(rename = "bond-flip")]
    BondFlip,
    #[serde(rename = "removal")]
    RemovalOnly,
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bond-flip" | "bond_flip" => Ok(Self::BondFlip),
            "removal" | "removal-only" | "removal_only" => Ok(Self::RemovalOnly),
            _ => Err(Error::InvalidArgument(format!("unknown variant `{s}` (bond-flip|removal)"))),
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::BondFlip => "bond-flip",
            Self::RemovalOnly => "removal",
        })
    }
}

#[derive(Clone, Debug)]
pub struct PercolationModel<T> {
    base: Graph,
    p: T,
    variant: Variant,
    slots: Vec<(usize, usize)>,
}

impl<T: Real> PercolationModel<T> {
    pub fn new(base: Graph, p: T, variant: Variant) -> Result<Self> {
        if !(p >= T::zero() && p <= T::one()) {
            return Err(Error::InvalidArgument(format!("percolation probability {p} outside [0, 1]")));
        }
        let slots = match variant {
            Variant::BondFlip => all_pairs(base.n()).collect(),
            Variant::RemovalOnly => base.edges().to_vec(),
        };
        Ok(Self { base, p, variant, slots })
    }

    pub fn base(&self) -> &Graph {
        &self.base
    }

    pub fn p(&self) -> T {
        self.p
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    /// Number of edge slots that may change: `n(n-1)/2` for bond-flip,
    /// `|E|` for removal-only.
    pub fn a_c(&self) -> usize {
        self.slots.len()
    }

    pub fn with_p(&self, p: T) -> Result<Self> {
        Self::new(self.base.clone(), p, self.variant)
    }

    /// Graph obtained by altering the slots whose flag is set.
    pub(crate) fn graph_from_flips(&self, flips: &[bool]) -> Graph {
        let edges = self.slots.iter().zip(flips).filter_map(|(&(i, j), &flip)| {
            let present = match self.variant {
                Variant::BondFlip => self.base.has_edge(i, j) ^ flip,
                Variant::RemovalOnly => !flip,
            };
            present.then_some((i, j))
        });
        Graph::new(self.base.n(), edges).expect("slots are valid edges")
    }

    pub(crate) fn sample_flips<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<bool> {
        let p = self.p.as_f64();
        self.slots.iter().map(|_| rng.gen::<f64>() < p).collect()
    }

    pub fn sample_percolated_graph<R: Rng + ?Sized>(&self, rng: &mut R) -> Graph {
        let flips = self.sample_flips(rng);
        self.graph_from_flips(&flips)
    }

    /// `(1-p)^{a_c - a_d} p^{a_d}` where `a_d` counts altered slots.
    fn weight(&self, altered: usize) -> T {
        let p = self.p;
        (T::one() - p).powi((self.a_c() - altered) as i32) * p.powi(altered as i32)
    }

    pub fn occurrence_probability(&self, candidate: &Graph) -> Result<T> {
        if candidate.n() != self.base.n() {
            return Err(Error::InvalidArgument("candidate has a different vertex count".into()));
        }
        let altered = match self.variant {
            Variant::BondFlip => {
                self.slots.iter().filter(|&&(i, j)| self.base.has_edge(i, j) != candidate.has_edge(i, j)).count()
            }
            Variant::RemovalOnly => {
                if !candidate.is_subgraph_of(&self.base) {
                    return Err(Error::NotSubgraph);
                }
                self.base.edge_count() - candidate.edge_count()
            }
        };
        Ok(self.weight(altered))
    }

    /// Every candidate graph with non-zero probability, in slot-mask order.
    /// At `p = 0` and `p = 1` the single deterministic outcome is returned
    /// regardless of `cap`.
    pub fn candidates(&self, cap: u64) -> Result<Vec<(Graph, T)>> {
        let a_c = self.a_c();
        if self.p == T::zero() || self.p == T::one() {
            let flips = vec![self.p == T::one(); a_c];
            return Ok(vec![(self.graph_from_flips(&flips), T::one())]);
        }
        let required = 2f64.powi(a_c as i32);
        if a_c >= 63 || required > cap as f64 {
            return Err(Error::EnumerationCap { required, cap });
        }
        let out = (0..1u64 << a_c)
            .filter_map(|mask| {
                let flips: Vec<bool> = (0..a_c).map(|k| mask >> k & 1 == 1).collect();
                let w = self.weight(mask.count_ones() as usize);
                (w != T::zero()).then(|| (self.graph_from_flips(&flips), w))
            })
            .collect();
        Ok(out)
    }
}

/// Walk operator of the marked chain on graph `g`, with the transition matrix
/// rebuilt from `g`'s own degrees.
pub fn marked_walk_operator<T: Real>(g: &Graph, marked: &MarkedSet) -> Result<WalkOperator<T>> {
    let p = build_transition_matrix::<T>(g);
    Ok(build_walk_operator(&apply_marking(&p, marked)?))
}

/// Candidate step operators with their probabilities.
pub fn enumerate_operators<T: Real>(
    model: &PercolationModel<T>,
    marked: &MarkedSet,
    cap: u64,
) -> Result<Vec<(T, WalkOperator<T>)>> {
    model.candidates(cap)?.into_par_iter().map(|(g, w)| Ok((w, marked_walk_operator(&g, marked)?))).collect()
}

/// Sum of `f(lo) + ... + f(hi-1)` with a fixed balanced tree, so the
/// floating-point result does not depend on the number of worker threads.
fn pairwise_sum<T, F>(lo: usize, hi: usize, f: &F) -> Array2<T>
where
    T: Real,
    F: Fn(usize) -> Array2<T> + Sync,
{
    if hi - lo == 1 {
        return f(lo);
    }
    let mid = lo + (hi - lo) / 2;
    let (a, b) = rayon::join(|| pairwise_sum(lo, mid, f), || pairwise_sum(mid, hi, f));
    a + b
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OperatorMode {
    Exact,
    MonteCarlo { samples: u64, seed: u64 },
}

/// `Ū_dec` with its provenance.
#[derive(Clone, Debug)]
pub struct AveragedOperator<T> {
    matrix: Array2<T>,
    mode: OperatorMode,
    marked: MarkedSet,
    p: T,
    variant: Variant,
    a_c: usize,
    weight_total: T,
    distinct_graphs: usize,
    std_err: Option<Array2<T>>,
}

/// JSON header written next to an operator dump.
#[derive(Clone, Debug, Serialize)]
pub struct Provenance {
    pub mode: &'static str,
    pub p: f64,
    pub variant: Variant,
    pub samples: Option<u64>,
    pub seed: Option<u64>,
    pub a_c: usize,
}

impl<T: Real> AveragedOperator<T> {
    pub fn matrix(&self) -> &Array2<T> {
        &self.matrix
    }

    pub fn mode(&self) -> OperatorMode {
        self.mode
    }

    pub fn marked(&self) -> &MarkedSet {
        &self.marked
    }

    pub fn p(&self) -> T {
        self.p
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn a_c(&self) -> usize {
        self.a_c
    }

    /// Sum of the mixture weights: exactly the enumerated probability mass in
    /// exact mode, 1 in Monte Carlo mode.
    pub fn weight_total(&self) -> T {
        self.weight_total
    }

    pub fn distinct_graphs(&self) -> usize {
        self.distinct_graphs
    }

    /// Per-entry standard error of the Monte Carlo mean.
    pub fn standard_errors(&self) -> Option<&Array2<T>> {
        self.std_err.as_ref()
    }

    pub fn operator_norm(&self) -> Result<T> {
        linalg::spectral_norm(self.matrix.view())
    }

    pub fn provenance(&self) -> Provenance {
        let (mode, samples, seed) = match self.mode {
            OperatorMode::Exact => ("exact", None, None),
            OperatorMode::MonteCarlo { samples, seed } => ("monte_carlo", Some(samples), Some(seed)),
        };
        Provenance { mode, p: self.p.as_f64(), variant: self.variant, samples, seed, a_c: self.a_c }
    }
}

/// `Ū_dec = Σ_G Pr(G) U_{G'}` over every candidate graph.
pub fn build_averaged_operator_exact<T: Real>(
    model: &PercolationModel<T>,
    marked: &MarkedSet,
    cap: u64,
) -> Result<AveragedOperator<T>> {
    let terms = enumerate_operators(model, marked, cap)?;
    let matrix = pairwise_sum(0, terms.len(), &|i| terms[i].1.matrix() * terms[i].0);
    let weight_total = terms.iter().map(|(w, _)| *w).sum();
    Ok(AveragedOperator {
        matrix,
        mode: OperatorMode::Exact,
        marked: marked.clone(),
        p: model.p(),
        variant: model.variant(),
        a_c: model.a_c(),
        weight_total,
        distinct_graphs: terms.len(),
        std_err: None,
    })
}

/// Empirical mean of `U_{G'}` over `samples` i.i.d. graphs.
///
/// Sample `i` draws from stream `(seed, i)`. Identical graphs are grouped and
/// each distinct operator is built once; the weighted sum runs over the
/// distinct graphs in sorted order.
pub fn build_averaged_operator_mc<T: Real>(
    model: &PercolationModel<T>,
    marked: &MarkedSet,
    samples: u64,
    seed: u64,
) -> Result<AveragedOperator<T>> {
    if samples == 0 {
        return Err(Error::InvalidArgument("Monte Carlo needs at least one sample".into()));
    }
    let draws: Vec<Vec<bool>> =
        (0..samples).into_par_iter().map(|i| model.sample_flips(&mut rng::stream(seed, i))).collect();
    let mut counts: BTreeMap<Vec<bool>, u64> = BTreeMap::new();
    for d in draws {
        *counts.entry(d).or_default() += 1;
    }
    let groups: Vec<(T, WalkOperator<T>)> = counts
        .into_iter()
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|(flips, count)| {
            let w = T::from_count(count as usize) / T::from_count(samples as usize);
            Ok((w, marked_walk_operator(&model.graph_from_flips(&flips), marked)?))
        })
        .collect::<Result<_>>()?;

    let mean = pairwise_sum(0, groups.len(), &|i| groups[i].1.matrix() * groups[i].0);
    let second = pairwise_sum(0, groups.len(), &|i| groups[i].1.matrix().mapv(|v| v * v) * groups[i].0);
    let nf = T::from_count(samples as usize);
    let std_err = ndarray::Zip::from(&second).and(&mean).map_collect(|&s, &m| ((s - m * m).max(T::zero()) / nf).sqrt());
    Ok(AveragedOperator {
        matrix: mean,
        mode: OperatorMode::MonteCarlo { samples, seed },
        marked: marked.clone(),
        p: model.p(),
        variant: model.variant(),
        a_c: model.a_c(),
        weight_total: groups.iter().map(|(w, _)| *w).sum(),
        distinct_graphs: groups.len(),
        std_err: Some(std_err),
    })
}

/// Visits every step sequence of length `len` over `k` candidates, passing
/// the candidate indices in step order. Odometer order, last step fastest.
pub fn for_each_sequence(k: usize, len: usize, mut visit: impl FnMut(&[usize])) {
    let mut seq = vec![0usize; len];
    loop {
        visit(&seq);
        let mut pos = len;
        loop {
            if pos == 0 {
                return;
            }
            pos -= 1;
            seq[pos] += 1;
            if seq[pos] < k {
                break;
            }
            seq[pos] = 0;
        }
    }
}

pub(crate) fn check_sequence_budget(k: usize, len: usize, budget: u64) -> Result<()> {
    let required = (k as f64).powi(len as i32);
    if required > budget as f64 {
        return Err(Error::EnumerationCap { required, cap: budget });
    }
    Ok(())
}

/// Max-abs deviation between `Σ_{P_T} Pr(P_T) U_{P_t}` (enumerating every
/// length-`horizon` sequence) and `Ū_dec^t`.
pub fn verify_ensemble_average<T: Real>(
    model: &PercolationModel<T>,
    marked: &MarkedSet,
    t: usize,
    horizon: usize,
    budget: u64,
) -> Result<T> {
    if t > horizon {
        return Err(Error::InvalidArgument(format!("t = {t} exceeds T = {horizon}")));
    }
    let ops = enumerate_operators(model, marked, DEFAULT_ENUMERATION_CAP.max(budget))?;
    check_sequence_budget(ops.len(), horizon, budget)?;
    let dim = model.base().n().pow(2);

    // Neumaier-compensated accumulation: the ensemble can hold ~10⁶ terms.
    let mut ensemble = Array2::<T>::zeros((dim, dim));
    let mut carry = Array2::<T>::zeros((dim, dim));
    for_each_sequence(ops.len(), horizon, |seq| {
        let prob = seq.iter().map(|&i| ops[i].0).fold(T::one(), |a, b| a * b);
        let mut product = Array2::<T>::eye(dim);
        for &i in &seq[..t] {
            product = ops[i].1.matrix().dot(&product);
        }
        ndarray::Zip::from(&mut ensemble).and(&mut carry).and(&product).for_each(|s, c, &x| {
            let term = prob * x;
            let next = *s + term;
            *c += if s.abs() >= term.abs() { (*s - next) + term } else { (term - next) + *s };
            *s = next;
        });
    });
    ensemble += &carry;

    let ubar = pairwise_sum(0, ops.len(), &|i| ops[i].1.matrix() * ops[i].0);
    let power = linalg::matrix_power(ubar.view(), t);
    Ok(linalg::max_abs_diff(ensemble.view(), power.view()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn k3() -> Graph {
        Graph::complete(3).unwrap()
    }

    #[test]
    fn endpoint_samples() {
        let base = Graph::cycle(5).unwrap();
        let mut r = rng::stream(1, 0);
        let zero = PercolationModel::new(base.clone(), 0.0, Variant::BondFlip).unwrap();
        let flip = PercolationModel::new(base.clone(), 1.0, Variant::BondFlip).unwrap();
        let strip = PercolationModel::new(base.clone(), 1.0, Variant::RemovalOnly).unwrap();
        for _ in 0..20 {
            assert_eq!(zero.sample_percolated_graph(&mut r), base);
            assert_eq!(flip.sample_percolated_graph(&mut r), base.complement());
            assert_eq!(strip.sample_percolated_graph(&mut r), Graph::empty(5).unwrap());
        }
    }

    #[test]
    fn occurrence_probabilities() {
        let m = PercolationModel::new(k3(), 0.1, Variant::BondFlip).unwrap();
        assert_abs_diff_eq!(m.occurrence_probability(&k3()).unwrap(), 0.729, epsilon = 1e-15);
        let minus = Graph::new(3, [(0, 1), (1, 2)]).unwrap();
        assert_abs_diff_eq!(m.occurrence_probability(&minus).unwrap(), 0.081, epsilon = 1e-15);

        let r = PercolationModel::new(Graph::path(3).unwrap(), 0.1, Variant::RemovalOnly).unwrap();
        assert!(matches!(r.occurrence_probability(&k3()), Err(Error::NotSubgraph)));
    }

    #[test]
    fn probabilities_sum_to_one_exhaustively() {
        for n in 3..=5 {
            for variant in [Variant::BondFlip, Variant::RemovalOnly] {
                let base = Graph::cycle(n).unwrap();
                let m = PercolationModel::new(base, 0.37, variant).unwrap();
                let cands = m.candidates(1 << 10).unwrap();
                assert_eq!(cands.len(), 1 << m.a_c());
                let total: f64 = cands.iter().map(|(_, w)| *w).sum();
                assert_abs_diff_eq!(total, 1.0, epsilon = 1e-12);
                for (g, w) in &cands {
                    assert_abs_diff_eq!(m.occurrence_probability(g).unwrap(), *w, epsilon = 1e-15);
                }
            }
        }
    }

    #[test]
    fn enumeration_cap() {
        let m = PercolationModel::new(Graph::complete(6).unwrap(), 0.1, Variant::BondFlip).unwrap();
        assert!(matches!(m.candidates(DEFAULT_ENUMERATION_CAP), Err(Error::EnumerationCap { .. })));
        let zero = m.with_p(0.0).unwrap().candidates(DEFAULT_ENUMERATION_CAP).unwrap();
        assert_eq!(zero, vec![(Graph::complete(6).unwrap(), 1.0)]);
        let one = m.with_p(1.0).unwrap().candidates(DEFAULT_ENUMERATION_CAP).unwrap();
        assert_eq!(one, vec![(Graph::empty(6).unwrap(), 1.0)]);
    }

    #[test]
    fn exact_operator_at_the_endpoints() {
        let marked = MarkedSet::new(3, [0]).unwrap();
        let m = PercolationModel::new(k3(), 0.0, Variant::BondFlip).unwrap();
        let ubar = build_averaged_operator_exact(&m, &marked, DEFAULT_ENUMERATION_CAP).unwrap();
        let direct = marked_walk_operator::<f64>(&k3(), &marked).unwrap();
        assert!(linalg::max_abs_diff(ubar.matrix().view(), direct.matrix().view()) <= 1e-14);
        assert_eq!(ubar.weight_total(), 1.0);

        let m = m.with_p(1.0).unwrap();
        let ubar = build_averaged_operator_exact(&m, &marked, DEFAULT_ENUMERATION_CAP).unwrap();
        let direct = marked_walk_operator::<f64>(&k3().complement(), &marked).unwrap();
        assert!(linalg::max_abs_diff(ubar.matrix().view(), direct.matrix().view()) <= 1e-14);
    }

    #[test]
    fn averaged_operator_is_a_contraction_but_not_orthogonal() {
        let m = PercolationModel::new(k3(), 0.3f64, Variant::BondFlip).unwrap();
        let ubar = build_averaged_operator_exact(&m, &MarkedSet::empty(3), DEFAULT_ENUMERATION_CAP).unwrap();
        assert_eq!(ubar.distinct_graphs(), 8);
        assert_abs_diff_eq!(ubar.weight_total(), 1.0, epsilon = 1e-12);
        assert!(ubar.operator_norm().unwrap() <= 1.0 + 1e-9);
        let gram = ubar.matrix().t().dot(ubar.matrix());
        assert!(linalg::identity_residual(gram.view()) > 0.01);
    }

    #[test]
    fn monte_carlo_is_deterministic_and_degenerate_at_zero() {
        let marked = MarkedSet::new(3, [0]).unwrap();
        let m = PercolationModel::new(k3(), 0.0, Variant::BondFlip).unwrap();
        let mc = build_averaged_operator_mc(&m, &marked, 50, 9).unwrap();
        let direct = marked_walk_operator::<f64>(&k3(), &marked).unwrap();
        assert_eq!(mc.matrix(), direct.matrix());

        let m = m.with_p(0.3).unwrap();
        let a = build_averaged_operator_mc(&m, &marked, 2000, 42).unwrap();
        let b = build_averaged_operator_mc(&m, &marked, 2000, 42).unwrap();
        assert_eq!(a.matrix(), b.matrix());
        let c = build_averaged_operator_mc(&m, &marked, 2000, 43).unwrap();
        assert_ne!(a.matrix(), c.matrix());
        assert!(build_averaged_operator_mc(&m, &marked, 0, 1).is_err());
    }

    #[test]
    fn monte_carlo_within_five_standard_errors() {
        let m = PercolationModel::new(k3(), 0.3f64, Variant::BondFlip).unwrap();
        let none = MarkedSet::empty(3);
        let exact = build_averaged_operator_exact(&m, &none, DEFAULT_ENUMERATION_CAP).unwrap();
        let mc = build_averaged_operator_mc(&m, &none, 100_000, 2024).unwrap();
        let se = mc.standard_errors().unwrap();
        for ((e, x), s) in exact.matrix().iter().copied().zip(mc.matrix().iter().copied()).zip(se.iter().copied()) {
            assert!((e - x).abs() <= 5.0 * s + 1e-15, "deviation {} vs se {}", (e - x).abs(), s);
        }
    }

    #[test]
    fn monte_carlo_error_shrinks_with_samples() {
        let m = PercolationModel::new(k3(), 0.3f64, Variant::BondFlip).unwrap();
        let none = MarkedSet::empty(3);
        let exact = build_averaged_operator_exact(&m, &none, DEFAULT_ENUMERATION_CAP).unwrap();
        let mean_dev = |samples| {
            let mc = build_averaged_operator_mc(&m, &none, samples, 5).unwrap();
            let total: f64 = exact.matrix().iter().zip(mc.matrix()).map(|(a, b): (&f64, &f64)| (a - b).abs()).sum();
            total / 81.0
        };
        let coarse = mean_dev(1_000);
        let fine = mean_dev(100_000);
        // Expected ratio is √100 = 10.
        assert!(coarse / fine > 3.0 && coarse / fine < 30.0, "{coarse} / {fine}");
    }

    #[test]
    fn bond_flip_self_duality() {
        let g = Graph::new(4, [(0, 1), (1, 2), (2, 0), (2, 3)]).unwrap();
        let none = MarkedSet::empty(4);
        let a = PercolationModel::new(g.clone(), 0.2, Variant::BondFlip).unwrap();
        let b = PercolationModel::new(g.complement(), 0.8, Variant::BondFlip).unwrap();
        let ua = build_averaged_operator_exact(&a, &none, DEFAULT_ENUMERATION_CAP).unwrap();
        let ub = build_averaged_operator_exact(&b, &none, DEFAULT_ENUMERATION_CAP).unwrap();
        assert!(linalg::max_abs_diff(ua.matrix().view(), ub.matrix().view()) < 1e-14);
    }

    #[test]
    fn removal_edge_counts_are_binomial() {
        let base = Graph::complete(6).unwrap();
        let p = 0.3;
        let m = PercolationModel::new(base.clone(), p, Variant::RemovalOnly).unwrap();
        let trials = 10_000;
        let total: usize = (0..trials).map(|i| m.sample_percolated_graph(&mut rng::stream(77, i)).edge_count()).sum();
        let e = base.edge_count() as f64;
        let mean = total as f64 / trials as f64;
        let sigma = (e * p * (1.0 - p) / trials as f64).sqrt();
        assert!((mean - e * (1.0 - p)).abs() <= 4.0 * sigma, "mean {mean}");
    }

    #[test]
    fn ensemble_average_cases() {
        let marked = MarkedSet::new(3, [0]).unwrap();
        let m = PercolationModel::new(k3(), 0.3f64, Variant::BondFlip).unwrap();
        assert!(verify_ensemble_average(&m, &marked, 2, 3, DEFAULT_SEQUENCE_BUDGET).unwrap() <= 1e-12);
        assert!(verify_ensemble_average(&m, &marked, 0, 2, DEFAULT_SEQUENCE_BUDGET).unwrap() <= 1e-12);
        let zero = m.with_p(0.0).unwrap();
        assert!(verify_ensemble_average(&zero, &marked, 3, 3, DEFAULT_SEQUENCE_BUDGET).unwrap() <= 1e-13);
        assert!(verify_ensemble_average(&m, &marked, 4, 3, DEFAULT_SEQUENCE_BUDGET).is_err());
        assert!(verify_ensemble_average(&m, &marked, 1, 7, 1000).is_err());
    }

    #[test]
    fn provenance_fields() {
        let m = PercolationModel::new(k3(), 0.25, Variant::RemovalOnly).unwrap();
        let mc = build_averaged_operator_mc(&m, &MarkedSet::empty(3), 10, 3).unwrap();
        let json = serde_json::to_value(mc.provenance()).unwrap();
        assert_eq!(json["mode"], "monte_carlo");
        assert_eq!(json["variant"], "removal");
        assert_eq!(json["samples"], 10);
        assert_eq!(json["seed"], 3);
        assert_eq!(json["a_c"], 3);
    }
}
