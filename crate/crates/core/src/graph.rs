//! Graphs, their degree-based stochastic matrices, and marked sets.
//!
//! Vertices are 0-based everywhere. A [`Graph`] keeps its edges as sorted
//! pairs `(i, j)` with `i < j`.

use std::collections::{BTreeSet, VecDeque};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::scalar::Real;

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Graph {
    n: usize,
    edges: Vec<(usize, usize)>,
}

#[derive(Serialize, Deserialize)]
struct GraphFile {
    n: usize,
    edges: Vec<[usize; 2]>,
}

impl Serialize for Graph {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        GraphFile { n: self.n, edges: self.edges.iter().map(|&(i, j)| [i, j]).collect() }.serialize(s)
    }
}

impl Graph {
    /// Builds a graph, rejecting self-loops, duplicate edges and out-of-range
    /// endpoints. Edge orientation is normalized to `i < j`.
    pub fn new(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidGraph(format!("need at least 2 vertices, got {n}")));
        }
        let mut set = BTreeSet::new();
        for (i, j) in edges {
            if i >= n || j >= n {
                return Err(Error::VertexOutOfRange { vertex: i.max(j), n });
            }
            if i == j {
                return Err(Error::InvalidGraph(format!("self-loop at vertex {i}")));
            }
            if !set.insert((i.min(j), i.max(j))) {
                return Err(Error::InvalidGraph(format!("duplicate edge {{{i}, {j}}}")));
            }
        }
        Ok(Self { n, edges: set.into_iter().collect() })
    }

    pub fn empty(n: usize) -> Result<Self> {
        Self::new(n, [])
    }

    pub fn complete(n: usize) -> Result<Self> {
        Self::new(n, all_pairs(n))
    }

    pub fn cycle(n: usize) -> Result<Self> {
        if n < 3 {
            return Err(Error::InvalidGraph(format!("a cycle needs at least 3 vertices, got {n}")));
        }
        Self::new(n, (0..n).map(|i| (i, (i + 1) % n)))
    }

    pub fn path(n: usize) -> Result<Self> {
        Self::new(n, (1..n).map(|i| (i - 1, i)))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.edges.binary_search(&(i.min(j), i.max(j))).is_ok()
    }

    pub fn degree(&self, x: usize) -> usize {
        self.edges.iter().filter(|&&(i, j)| i == x || j == x).count()
    }

    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n];
        for &(i, j) in &self.edges {
            adj[i].push(j);
            adj[j].push(i);
        }
        adj
    }

    pub fn complement(&self) -> Self {
        let edges = all_pairs(self.n).filter(|&(i, j)| !self.has_edge(i, j)).collect();
        Self { n: self.n, edges }
    }

    pub fn is_subgraph_of(&self, other: &Graph) -> bool {
        self.n == other.n && self.edges.iter().all(|&(i, j)| other.has_edge(i, j))
    }

    pub fn is_connected(&self) -> bool {
        let adj = self.adjacency();
        let mut seen = vec![false; self.n];
        let mut queue = VecDeque::from([0]);
        seen[0] = true;
        while let Some(x) = queue.pop_front() {
            for &y in &adj[x] {
                if !seen[y] {
                    seen[y] = true;
                    queue.push_back(y);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }

    /// Two-colouring by BFS over every component.
    pub fn is_bipartite(&self) -> bool {
        let adj = self.adjacency();
        let mut colour: Vec<Option<bool>> = vec![None; self.n];
        for start in 0..self.n {
            if colour[start].is_some() {
                continue;
            }
            colour[start] = Some(false);
            let mut queue = VecDeque::from([start]);
            while let Some(x) = queue.pop_front() {
                let cx = colour[x].unwrap();
                for &y in &adj[x] {
                    match colour[y] {
                        None => {
                            colour[y] = Some(!cx);
                            queue.push_back(y);
                        }
                        Some(cy) if cy == cx => return false,
                        Some(_) => {}
                    }
                }
            }
        }
        true
    }

    /// Base graphs for hitting-time experiments must be connected and
    /// non-bipartite. Percolated samples never go through this check.
    pub fn validate_base(&self) -> Result<()> {
        if !self.is_connected() {
            return Err(Error::InvalidGraph("base graph is disconnected".into()));
        }
        if self.is_bipartite() {
            return Err(Error::InvalidGraph("base graph is bipartite".into()));
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("graph serializes")
    }

    /// Parses `{"n": <int>, "edges": [[i, j], ...]}` with `i < j`.
    pub fn from_json(text: &str) -> Result<Self> {
        let file: GraphFile = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        if let Some(bad) = file.edges.iter().find(|[i, j]| i >= j) {
            return Err(Error::Parse(format!("edge [{}, {}] must satisfy i < j", bad[0], bad[1])));
        }
        Self::new(file.n, file.edges.into_iter().map(|[i, j]| (i, j)))
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }
}

/// Unordered vertex pairs of `K_n` in lexicographic order.
pub fn all_pairs(n: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..n).flat_map(move |i| ((i + 1)..n).map(move |j| (i, j)))
}

/// Named graph families accepted on the command line.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum GraphFamily {
    Complete(usize),
    OddCycle(usize),
    FromFile(PathBuf),
}

impl FromStr for GraphFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (kind, arg) =
            s.split_once(':').ok_or_else(|| Error::Parse(format!("graph spec `{s}` must look like kind:arg")))?;
        let count = || arg.parse::<usize>().map_err(|_| Error::Parse(format!("`{arg}` is not a vertex count")));
        match kind {
            "complete" => Ok(Self::Complete(count()?)),
            "cycle" => Ok(Self::OddCycle(count()?)),
            "file" => Ok(Self::FromFile(PathBuf::from(arg))),
            _ => Err(Error::Parse(format!("unknown graph family `{kind}`"))),
        }
    }
}

impl fmt::Display for GraphFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Complete(n) => write!(f, "complete:{n}"),
            Self::OddCycle(n) => write!(f, "cycle:{n}"),
            Self::FromFile(p) => write!(f, "file:{}", p.display()),
        }
    }
}

pub fn generate_graph(family: &GraphFamily) -> Result<Graph> {
    match *family {
        GraphFamily::Complete(n) => {
            if n < 3 {
                return Err(Error::InvalidGraph(format!("complete(n) needs n >= 3, got {n}")));
            }
            Graph::complete(n)
        }
        GraphFamily::OddCycle(n) => {
            if n < 3 || n % 2 == 0 {
                return Err(Error::InvalidGraph(format!("odd_cycle(n) needs odd n >= 3, got {n}")));
            }
            Graph::cycle(n)
        }
        GraphFamily::FromFile(ref path) => Graph::from_file(path),
    }
}

/// Row-stochastic matrix with entries in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct TransitionMatrix<T> {
    entries: Array2<T>,
    symmetric: bool,
}

impl<T: Real> TransitionMatrix<T> {
    /// Validates a raw matrix. Errors name the first offending row or entry.
    pub fn new(entries: Array2<T>) -> Result<Self> {
        let (rows, cols) = entries.dim();
        if rows != cols {
            return Err(Error::NotSquare { rows, cols });
        }
        let tol = T::tolerance();
        for ((row, col), &value) in entries.indexed_iter() {
            if !(value >= T::zero() && value <= T::one()) {
                return Err(Error::EntryOutOfRange { row, col, value: value.as_f64() });
            }
        }
        for (row, r) in entries.rows().into_iter().enumerate() {
            let sum = r.sum();
            if (sum - T::one()).abs() > tol {
                return Err(Error::NotStochastic { row, sum: sum.as_f64() });
            }
        }
        let symmetric = linalg::asymmetry(entries.view()) <= tol;
        Ok(Self { entries, symmetric })
    }

    pub fn n(&self) -> usize {
        self.entries.nrows()
    }

    pub fn get(&self, x: usize, y: usize) -> T {
        self.entries[[x, y]]
    }

    pub fn view(&self) -> ArrayView2<'_, T> {
        self.entries.view()
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn into_inner(self) -> Array2<T> {
        self.entries
    }
}

/// `p_xy = 1/deg(x)` on edges; an isolated vertex keeps all its mass (`p_xx = 1`).
pub fn build_transition_matrix<T: Real>(g: &Graph) -> TransitionMatrix<T> {
    let n = g.n();
    let mut p = Array2::<T>::zeros((n, n));
    for (x, neighbours) in g.adjacency().into_iter().enumerate() {
        if neighbours.is_empty() {
            p[[x, x]] = T::one();
            continue;
        }
        let w = T::one() / T::from_count(neighbours.len());
        for y in neighbours {
            p[[x, y]] = w;
        }
    }
    TransitionMatrix::new(p).expect("degree-based matrix is stochastic")
}

/// Set of marked vertices of an `n`-vertex chain.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MarkedSet {
    n: usize,
    members: Vec<usize>,
}

impl MarkedSet {
    pub fn new(n: usize, members: impl IntoIterator<Item = usize>) -> Result<Self> {
        let set: BTreeSet<usize> = members.into_iter().collect();
        if let Some(&v) = set.iter().find(|&&v| v >= n) {
            return Err(Error::VertexOutOfRange { vertex: v, n });
        }
        Ok(Self { n, members: set.into_iter().collect() })
    }

    pub fn empty(n: usize) -> Self {
        Self { n, members: Vec::new() }
    }

    /// Marks vertices `0..m`.
    pub fn first(n: usize, m: usize) -> Result<Self> {
        Self::new(n, 0..m)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn members(&self) -> &[usize] {
        &self.members
    }

    pub fn m(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, x: usize) -> bool {
        self.members.binary_search(&x).is_ok()
    }

    /// Unmarked vertices in increasing order.
    pub fn unmarked(&self) -> Vec<usize> {
        (0..self.n).filter(|&x| !self.contains(x)).collect()
    }

    /// `m / n`.
    pub fn epsilon<T: Real>(&self) -> T {
        T::from_count(self.m()) / T::from_count(self.n)
    }
}

fn check_dims<T: Real>(p: &TransitionMatrix<T>, marked: &MarkedSet) -> Result<()> {
    if p.n() != marked.n() {
        return Err(Error::InvalidArgument(format!(
            "marked set is over {} vertices but the chain has {}",
            marked.n(),
            p.n()
        )));
    }
    Ok(())
}

/// Replaces each marked row by the basis row `e_x` (marked vertices absorb).
pub fn apply_marking<T: Real>(p: &TransitionMatrix<T>, marked: &MarkedSet) -> Result<TransitionMatrix<T>> {
    check_dims(p, marked)?;
    let mut entries = p.view().to_owned();
    for &x in marked.members() {
        entries.row_mut(x).fill(T::zero());
        entries[[x, x]] = T::one();
    }
    Ok(TransitionMatrix::new(entries).expect("marking keeps rows stochastic"))
}

/// `P_M`: `P` with the rows and columns of marked vertices deleted.
pub fn submatrix_pm<T: Real>(p: &TransitionMatrix<T>, marked: &MarkedSet) -> Result<Array2<T>> {
    check_dims(p, marked)?;
    let keep = marked.unmarked();
    if keep.is_empty() {
        return Err(Error::AllMarked);
    }
    Ok(Array2::from_shape_fn((keep.len(), keep.len()), |(i, j)| p.get(keep[i], keep[j])))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;

    fn k(n: usize) -> TransitionMatrix<f64> {
        build_transition_matrix(&Graph::complete(n).unwrap())
    }

    #[test]
    fn triangle_matrix() {
        let p = k(3);
        for x in 0..3 {
            for y in 0..3 {
                assert_eq!(p.get(x, y), if x == y { 0.0 } else { 0.5 });
            }
        }
        assert!(p.is_symmetric());
    }

    #[test]
    fn k4_is_j_minus_i_over_three() {
        let p = k(4);
        for x in 0..4 {
            for y in 0..4 {
                assert_eq!(p.get(x, y), if x == y { 0.0 } else { 1.0 / 3.0 });
            }
        }
    }

    #[test]
    fn isolated_vertex_keeps_its_mass() {
        let g = Graph::new(3, [(0, 1)]).unwrap();
        let p: TransitionMatrix<f64> = build_transition_matrix(&g);
        assert_eq!(p.view(), array![[0.0, 1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]]);
    }

    #[test]
    fn marking_rows() {
        let p = k(3);
        let none = apply_marking(&p, &MarkedSet::empty(3)).unwrap();
        assert_eq!(none, p);
        let one = apply_marking(&p, &MarkedSet::new(3, [0]).unwrap()).unwrap();
        assert_eq!(one.view(), array![[1.0, 0.0, 0.0], [0.5, 0.0, 0.5], [0.5, 0.5, 0.0]]);
        let all = apply_marking(&p, &MarkedSet::first(3, 3).unwrap()).unwrap();
        assert_eq!(all.view(), Array2::<f64>::eye(3));
    }

    #[test]
    fn submatrix_examples() {
        let pm = submatrix_pm(&k(3), &MarkedSet::new(3, [0]).unwrap()).unwrap();
        assert_eq!(pm, array![[0.0, 0.5], [0.5, 0.0]]);
        let pm = submatrix_pm(&k(4), &MarkedSet::new(4, [0, 1]).unwrap()).unwrap();
        assert_eq!(pm, array![[0.0, 1.0 / 3.0], [1.0 / 3.0, 0.0]]);
        let pm = submatrix_pm(&k(4), &MarkedSet::empty(4)).unwrap();
        assert_eq!(pm, k(4).into_inner());
        assert!(matches!(submatrix_pm(&k(3), &MarkedSet::first(3, 3).unwrap()), Err(Error::AllMarked)));
    }

    #[test]
    fn families() {
        assert_eq!(generate_graph(&"complete:4".parse().unwrap()).unwrap().edge_count(), 6);
        let c5 = generate_graph(&GraphFamily::OddCycle(5)).unwrap();
        for i in 0..5 {
            assert!(c5.has_edge(i, (i + 1) % 5));
        }
        assert_eq!(c5.edge_count(), 5);
        assert!(generate_graph(&GraphFamily::OddCycle(6)).is_err());
        assert!(generate_graph(&GraphFamily::Complete(2)).is_err());
        assert!("torus:3".parse::<GraphFamily>().is_err());
    }

    #[test]
    fn json_round_trip_and_rejections() {
        let g = Graph::from_json(r#"{"n": 3, "edges": [[0,1],[0,2],[1,2]]}"#).unwrap();
        assert_eq!(g, Graph::complete(3).unwrap());
        assert_eq!(Graph::from_json(&g.to_json()).unwrap(), g);
        assert!(Graph::from_json(r#"{"n": 3, "edges": [[0,1],[0,1]]}"#).is_err());
        assert!(Graph::from_json(r#"{"n": 3, "edges": [[1,0]]}"#).is_err());
        assert!(Graph::from_json(r#"{"n": 3, "edges": [[0,3]]}"#).is_err());
        assert!(Graph::from_json(r#"{"n": 3, "edges": [[0,1]"#).is_err());
    }

    #[test]
    fn validity_checks() {
        assert!(Graph::complete(3).unwrap().validate_base().is_ok());
        assert!(Graph::cycle(5).unwrap().validate_base().is_ok());
        assert!(Graph::cycle(4).unwrap().validate_base().is_err());
        assert!(Graph::path(3).unwrap().is_bipartite());
        assert!(Graph::new(4, [(0, 1), (2, 3)]).unwrap().validate_base().is_err());
    }

    #[test]
    fn transition_matrix_rejects_bad_rows() {
        let bad = array![[0.5, 0.5], [0.3, 0.6]];
        match TransitionMatrix::new(bad) {
            Err(Error::NotStochastic { row, .. }) => assert_eq!(row, 1),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            TransitionMatrix::new(array![[1.5, -0.5], [0.0, 1.0]]),
            Err(Error::EntryOutOfRange { row: 0, col: 0, .. })
        ));
    }

    fn arb_graph() -> impl Strategy<Value = Graph> {
        (2usize..9).prop_flat_map(|n| {
            let slots: Vec<_> = all_pairs(n).collect();
            proptest::collection::vec(any::<bool>(), slots.len()).prop_map(move |keep| {
                let edges = slots.iter().zip(keep).filter(|(_, k)| *k).map(|(e, _)| *e);
                Graph::new(n, edges).unwrap()
            })
        })
    }

    proptest! {
        #[test]
        fn rows_are_stochastic(g in arb_graph()) {
            let p: TransitionMatrix<f64> = build_transition_matrix(&g);
            for r in p.view().rows() {
                prop_assert!((r.sum() - 1.0).abs() <= 1e-12);
            }
        }

        #[test]
        fn regular_graphs_give_symmetric_matrices(n in 3usize..12) {
            let p: TransitionMatrix<f64> = build_transition_matrix(&Graph::complete(n).unwrap());
            prop_assert!(p.is_symmetric());
            let c: TransitionMatrix<f64> = build_transition_matrix(&Graph::cycle(n).unwrap());
            prop_assert!(c.is_symmetric());
        }

        #[test]
        fn marking_is_idempotent_and_keeps_the_retained_block(
            g in arb_graph(), bits in proptest::collection::vec(any::<bool>(), 9)
        ) {
            let n = g.n();
            let marked = MarkedSet::new(n, (0..n).filter(|&i| bits[i])).unwrap();
            let p: TransitionMatrix<f64> = build_transition_matrix(&g);
            let once = apply_marking(&p, &marked).unwrap();
            prop_assert_eq!(&apply_marking(&once, &marked).unwrap(), &once);
            if marked.m() < n {
                prop_assert_eq!(submatrix_pm(&once, &marked).unwrap(), submatrix_pm(&p, &marked).unwrap());
            }
        }
    }
}
