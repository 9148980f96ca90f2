//! Branch-time matrices, non-degenerate shapes and genealogical skeletons.
//!
//! Matrix rows are 0-based; shape leaves are labelled `1..=K`, the root is
//! `0` and branch vertices get labels `K+1..=2K-1` in order of first
//! appearance along the root-to-leaf walks for leaves `1, 2, …, K`. Edge
//! `e_v` joins `v` to its parent.
//!
//! Text form of a shape (children ordered by smallest leaf below, branch
//! vertices tagged with their lexicographically least leaf pair):
//!
//! ```text
//! ((1:1,(2:2,3:3)<2,3>:3)<1,2>:2)0;
//! ```
//!
//! Lengths (`:x`) are omitted for bare shapes.

use crate::scalar::{FieldScalar, Scalar};
use crate::treegen::{DiscretePath, GenTree, SpatialTree};
use rand::Rng;
use std::cmp::Ordering;
use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SkeletonError {
    #[error("invalid branch matrix: {0}")]
    InvalidMatrix(String),
    #[error("K = {k} exceeds the enumeration limit {max}")]
    KTooLarge { k: usize, max: usize },
    #[error("cannot parse shape: {0}")]
    Parse(String),
    #[error("point out of range: {0}")]
    OutOfRange(String),
}

/// Symmetric `K×K` matrix of branch times with lifetimes on the diagonal.
#[derive(Clone, Debug, PartialEq)]
pub struct BranchMatrix<S> {
    k: usize,
    data: Vec<S>,
}

impl<S: Scalar> BranchMatrix<S> {
    pub fn from_rows(rows: Vec<Vec<S>>) -> Result<Self, SkeletonError> {
        let k = rows.len();
        if k == 0 {
            return Err(SkeletonError::InvalidMatrix("empty matrix".into()));
        }
        if rows.iter().any(|r| r.len() != k) {
            return Err(SkeletonError::InvalidMatrix("matrix is not square".into()));
        }
        Ok(BranchMatrix {
            k,
            data: rows.into_iter().flatten().collect(),
        })
    }

    pub fn from_fn(k: usize, f: impl Fn(usize, usize) -> S) -> Self {
        let data = (0..k * k).map(|x| f(x / k, x % k)).collect();
        BranchMatrix { k, data }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn get(&self, i: usize, j: usize) -> &S {
        &self.data[i * self.k + j]
    }

    pub fn rows(&self) -> Vec<Vec<S>> {
        self.data.chunks(self.k).map(|r| r.to_vec()).collect()
    }

    pub fn map<T: Scalar>(&self, f: impl Fn(&S) -> T) -> BranchMatrix<T> {
        BranchMatrix {
            k: self.k,
            data: self.data.iter().map(f).collect(),
        }
    }

    /// Leading `j×j` block (the matrix of the first `j` paths).
    pub fn leading(&self, j: usize) -> Self {
        Self::from_fn(j, |a, b| self.get(a, b).clone())
    }

    /// Euclidean (Frobenius) distance.
    pub fn distance(&self, other: &Self) -> f64 {
        assert_eq!(self.k, other.k);
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a.as_f64() - b.as_f64()).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    /// Checks `0 ≤ τij = τji ≤ τii ∧ τjj` and `τij ∧ τjk ≤ τik`.
    pub fn validate(&self, tol: f64) -> Result<(), SkeletonError> {
        let k = self.k;
        let le = |a: &S, b: &S| a.tol_cmp(b, tol) != Ordering::Greater;
        for i in 0..k {
            for j in 0..k {
                let t = self.get(i, j);
                if !le(&S::zero(), t) {
                    return Err(SkeletonError::InvalidMatrix(format!(
                        "negative entry at ({i},{j})"
                    )));
                }
                if !t.tol_eq(self.get(j, i), tol) {
                    return Err(SkeletonError::InvalidMatrix(format!(
                        "asymmetric at ({i},{j})"
                    )));
                }
                if !le(t, self.get(i, i)) || !le(t, self.get(j, j)) {
                    return Err(SkeletonError::InvalidMatrix(format!(
                        "entry ({i},{j}) exceeds a lifetime"
                    )));
                }
            }
        }
        for i in 0..k {
            for j in 0..k {
                for l in 0..k {
                    let m = S::min_of(self.get(i, j), self.get(j, l));
                    if !le(&m, self.get(i, l)) {
                        return Err(SkeletonError::InvalidMatrix(format!(
                            "τ({i},{j}) ∧ τ({j},{l}) > τ({i},{l})"
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

impl<S: FieldScalar> BranchMatrix<S> {
    /// One third of the smallest positive gap between entries, if any.
    pub fn delta2(&self, tol: f64) -> Option<S> {
        let mut vals = self.data.clone();
        vals.sort_by(|a, b| a.partial_cmp(b).unwrap_or(Ordering::Equal));
        vals.windows(2)
            .filter(|w| w[1].tol_cmp(&w[0], tol) == Ordering::Greater)
            .map(|w| w[1].clone() - w[0].clone())
            .reduce(|a, b| S::min_of(&a, &b))
            .map(|g| g / S::from_i64(3))
    }
}

/// Why a branch matrix is degenerate (indices are 0-based rows).
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Degeneracy {
    /// `K = 1` with zero lifetime.
    ZeroLifetime { i: usize },
    /// `τij = 0`.
    RootBranch { i: usize, j: usize },
    /// `τij = τii ∧ τjj`: one path ends on the other.
    AncestralBranch { i: usize, j: usize },
    /// `τij = τik = τjk`.
    Trifurcation { i: usize, j: usize, k: usize },
}

pub fn check_nondegenerate<S: Scalar>(tau: &BranchMatrix<S>, tol: f64) -> Result<(), Degeneracy> {
    let k = tau.k();
    let zero = S::zero();
    if k == 1 && tau.get(0, 0).tol_eq(&zero, tol) {
        return Err(Degeneracy::ZeroLifetime { i: 0 });
    }
    for i in 0..k {
        for j in i + 1..k {
            let t = tau.get(i, j);
            if t.tol_cmp(&zero, tol) != Ordering::Greater {
                return Err(Degeneracy::RootBranch { i, j });
            }
            let life = S::min_of(tau.get(i, i), tau.get(j, j));
            if t.tol_cmp(&life, tol) != Ordering::Less {
                return Err(Degeneracy::AncestralBranch { i, j });
            }
        }
    }
    for i in 0..k {
        for j in i + 1..k {
            for l in j + 1..k {
                let t = tau.get(i, j);
                if t.tol_eq(tau.get(i, l), tol) && t.tol_eq(tau.get(j, l), tol) {
                    return Err(Degeneracy::Trifurcation { i, j, k: l });
                }
            }
        }
    }
    Ok(())
}

/// A non-degenerate shape: canonical parent array over `2K` vertices.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Shape {
    k: usize,
    parent: Vec<usize>,
}

impl Shape {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn num_vertices(&self) -> usize {
        self.parent.len()
    }

    pub fn parent(&self, v: usize) -> Option<usize> {
        (v != 0).then(|| self.parent[v])
    }

    pub fn parents(&self) -> &[usize] {
        &self.parent
    }

    pub fn is_leaf(&self, v: usize) -> bool {
        (1..=self.k).contains(&v)
    }

    /// Children ordered by their smallest leaf label.
    pub fn children(&self, v: usize) -> Vec<usize> {
        let mut c: Vec<usize> = (1..self.num_vertices())
            .filter(|&u| self.parent[u] == v)
            .collect();
        c.sort_by_key(|&u| self.min_leaf(u));
        c
    }

    /// `v` and its ancestors up to the root.
    pub fn ancestors(&self, v: usize) -> Vec<usize> {
        let mut out = vec![v];
        let mut u = v;
        while u != 0 {
            u = self.parent[u];
            out.push(u);
        }
        out
    }

    pub fn is_ancestor(&self, a: usize, v: usize) -> bool {
        self.ancestors(v).contains(&a)
    }

    pub fn mrca(&self, a: usize, b: usize) -> usize {
        let anc = self.ancestors(a);
        self.ancestors(b)
            .into_iter()
            .find(|u| anc.contains(u))
            .expect("root is a common ancestor")
    }

    pub fn leaves_below(&self, v: usize) -> Vec<usize> {
        (1..=self.k).filter(|&i| self.is_ancestor(v, i)).collect()
    }

    pub fn min_leaf(&self, v: usize) -> usize {
        if v == 0 {
            return 1;
        }
        (1..=self.k)
            .find(|&i| self.is_ancestor(v, i))
            .expect("every vertex has a leaf below")
    }

    /// Lexicographically least leaf pair `(i, j)` with `i ∧ j = v`.
    pub fn rep_pair(&self, v: usize) -> (usize, usize) {
        if v == 0 {
            return (0, 0);
        }
        if self.is_leaf(v) {
            return (v, v);
        }
        let c = self.children(v);
        let (a, b) = (self.min_leaf(c[0]), self.min_leaf(c[1]));
        (a.min(b), a.max(b))
    }

    /// Matrix row (0-based) of a leaf below `v`.
    pub fn row(&self, v: usize) -> usize {
        self.min_leaf(v) - 1
    }

    pub fn to_text(&self) -> String {
        render_with(self, &|_| None)
    }

    pub fn parse(text: &str) -> Result<Shape, SkeletonError> {
        let parsed = parse_tree_text(text)?;
        if parsed
            .nodes
            .iter()
            .any(|n| n.length.is_some() || n.extra.is_some())
        {
            return Err(SkeletonError::Parse("bare shapes carry no lengths".into()));
        }
        Ok(parsed.to_shape()?.0)
    }
}

/// Renders the text form, appending `extra(v)` after each non-root vertex.
pub(crate) fn render_with(shape: &Shape, extra: &dyn Fn(usize) -> Option<String>) -> String {
    fn node(s: &Shape, v: usize, extra: &dyn Fn(usize) -> Option<String>, out: &mut String) {
        if s.is_leaf(v) {
            write!(out, "{v}").unwrap();
        } else {
            let c = s.children(v);
            out.push('(');
            node(s, c[0], extra, out);
            out.push(',');
            node(s, c[1], extra, out);
            let (i, j) = s.rep_pair(v);
            write!(out, ")<{i},{j}>").unwrap();
        }
        if let Some(x) = extra(v) {
            out.push_str(&x);
        }
    }
    let mut out = String::from("(");
    node(shape, shape.children(0)[0], extra, &mut out);
    out.push_str(")0;");
    out
}

/// Canonically labels a rooted tree given by a parent array over arbitrary
/// node ids; `leaf_nodes[i]` is the node carrying leaf label `i + 1`.
/// Returns the shape and the label of every node.
pub fn canonicalize(
    parent: &[Option<usize>],
    leaf_nodes: &[usize],
) -> Result<(Shape, Vec<usize>), String> {
    let n = parent.len();
    let k = leaf_nodes.len();
    if k == 0 {
        return Err("no leaves".into());
    }
    let roots: Vec<usize> = (0..n).filter(|&v| parent[v].is_none()).collect();
    if roots.len() != 1 {
        return Err(format!("expected one root, found {}", roots.len()));
    }
    let root = roots[0];
    let mut nchildren = vec![0usize; n];
    for p in parent.iter().flatten() {
        nchildren[*p] += 1;
    }
    let mut is_leaf = vec![false; n];
    for &l in leaf_nodes {
        if l == root || is_leaf[l] {
            return Err("leaf labels must sit on distinct non-root nodes".into());
        }
        is_leaf[l] = true;
    }
    for v in 0..n {
        let want = if v == root {
            1
        } else if is_leaf[v] {
            0
        } else {
            2
        };
        if nchildren[v] != want {
            return Err(format!(
                "node {v} has {} children, expected {want}",
                nchildren[v]
            ));
        }
    }
    if n != 2 * k {
        return Err(format!("{n} nodes for {k} leaves"));
    }
    const UNSET: usize = usize::MAX;
    let mut label = vec![UNSET; n];
    label[root] = 0;
    for (i, &l) in leaf_nodes.iter().enumerate() {
        label[l] = i + 1;
    }
    let mut next = k + 1;
    for &l in leaf_nodes {
        let mut walk = Vec::new();
        let mut u = l;
        let mut steps = 0;
        while let Some(p) = parent[u] {
            walk.push(p);
            u = p;
            steps += 1;
            if steps > n {
                return Err("parent array has a cycle".into());
            }
        }
        for &v in walk.iter().rev() {
            if label[v] == UNSET {
                label[v] = next;
                next += 1;
            }
        }
    }
    if label.contains(&UNSET) {
        return Err("some nodes are not ancestors of a leaf".into());
    }
    let mut canon = vec![0usize; n];
    for v in 0..n {
        if let Some(p) = parent[v] {
            canon[label[v]] = label[p];
        }
    }
    Ok((Shape { k, parent: canon }, label))
}

/// A shape with vertex times; edge `e_v` has length `time(v) - time(parent)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ShapedTree<S> {
    shape: Shape,
    times: Vec<S>,
}

/// A point `[row, time]` of the tree `T(τ)`.
#[derive(Clone, Debug, PartialEq)]
pub struct TreePoint<S> {
    pub row: usize,
    pub time: S,
}

impl<S: Scalar> ShapedTree<S> {
    pub fn new(shape: Shape, times: Vec<S>) -> Result<Self, SkeletonError> {
        if times.len() != shape.num_vertices() || !times[0].is_zero() {
            return Err(SkeletonError::InvalidMatrix(
                "times must cover every vertex with root time 0".into(),
            ));
        }
        for v in 1..shape.num_vertices() {
            if times[v] <= times[shape.parent[v]] {
                return Err(SkeletonError::InvalidMatrix(format!(
                    "edge e_{v} has non-positive length"
                )));
            }
        }
        Ok(ShapedTree { shape, times })
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn k(&self) -> usize {
        self.shape.k
    }

    pub fn time(&self, v: usize) -> &S {
        &self.times[v]
    }

    pub fn times(&self) -> &[S] {
        &self.times
    }

    /// Length of edge `e_v` (`v ≠ 0`).
    pub fn length(&self, v: usize) -> S {
        self.times[v].clone() - self.times[self.shape.parent[v]].clone()
    }

    /// Edge lengths indexed by vertex, zero for the root.
    pub fn lengths(&self) -> Vec<S> {
        (0..self.shape.num_vertices())
            .map(|v| if v == 0 { S::zero() } else { self.length(v) })
            .collect()
    }

    /// The point of `T(τ)` represented by vertex `v`.
    pub fn point(&self, v: usize) -> TreePoint<S> {
        TreePoint {
            row: self.shape.row(v),
            time: self.times[v].clone(),
        }
    }

    /// Sum of edge lengths along the path from `a` to `b`.
    pub fn path_length(&self, a: usize, b: usize) -> S {
        let c = self.shape.mrca(a, b);
        let up = |mut v: usize| {
            let mut s = S::zero();
            while v != c {
                s = s + self.length(v);
                v = self.shape.parent[v];
            }
            s
        };
        up(a) + up(b)
    }

    /// Distance between points at absolute times `ta ∈ [time(π a), time(a)]`
    /// on edge `e_a` and `tb` on edge `e_b`.
    pub fn edge_point_distance(&self, a: usize, ta: &S, b: usize, tb: &S) -> S {
        if a == b || self.shape.is_ancestor(a, b) || self.shape.is_ancestor(b, a) {
            return ta.abs_diff(tb);
        }
        let c = self.shape.mrca(a, b);
        let tc = self.times[c].clone();
        (ta.clone() - tc.clone()) + (tb.clone() - tc)
    }

    /// `τij = time(i ∧ j)`, lifetimes on the diagonal.
    pub fn branch_matrix(&self) -> BranchMatrix<S> {
        BranchMatrix::from_fn(self.k(), |i, j| {
            self.times[self.shape.mrca(i + 1, j + 1)].clone()
        })
    }

    pub fn to_text(&self) -> String {
        render_with(&self.shape, &|v| Some(format!(":{}", self.length(v))))
    }

    pub fn parse(text: &str) -> Result<Self, SkeletonError> {
        let parsed = parse_tree_text(text)?;
        let (shape, label) = parsed.to_shape()?;
        let mut lengths = vec![S::zero(); shape.num_vertices()];
        for (node, &l) in parsed.nodes.iter().zip(&label) {
            if node.extra.is_some() {
                return Err(SkeletonError::Parse("unexpected embedding data".into()));
            }
            if l != 0 {
                let s = node
                    .length
                    .as_deref()
                    .ok_or_else(|| SkeletonError::Parse("missing edge length".into()))?;
                lengths[l] = S::parse_scalar(s)
                    .ok_or_else(|| SkeletonError::Parse(format!("bad length `{s}`")))?;
            }
        }
        Self::from_lengths(shape, &lengths)
    }

    /// Builds times from per-vertex edge lengths.
    pub fn from_lengths(shape: Shape, lengths: &[S]) -> Result<Self, SkeletonError> {
        let mut times = vec![S::zero(); shape.num_vertices()];
        for (v, t) in times.iter_mut().enumerate().skip(1) {
            *t = shape
                .ancestors(v)
                .iter()
                .filter(|&&u| u != 0)
                .fold(S::zero(), |s, &u| s + lengths[u].clone());
        }
        Self::new(shape, times)
    }
}

/// Result of [`build_shape`].
#[derive(Clone, Debug, PartialEq)]
pub enum BuiltShape<S> {
    Tree(ShapedTree<S>),
    Empty { k: usize, reason: Degeneracy },
}

impl<S> BuiltShape<S> {
    pub fn tree(&self) -> Option<&ShapedTree<S>> {
        match self {
            BuiltShape::Tree(t) => Some(t),
            BuiltShape::Empty { .. } => None,
        }
    }
}

/// Builds the shape and edge lengths of `T(τ)`, or `Empty` when `τ` is
/// degenerate. Entries within `tol` are identified (exact scalars ignore it).
pub fn build_shape<S: Scalar>(
    tau: &BranchMatrix<S>,
    tol: f64,
) -> Result<BuiltShape<S>, SkeletonError> {
    tau.validate(tol)?;
    if let Err(reason) = check_nondegenerate(tau, tol) {
        return Ok(BuiltShape::Empty { k: tau.k(), reason });
    }
    let k = tau.k();
    // Pair indices are 1-based; index 0 stands for the root with τ(i, 0) = 0.
    let t = |i: usize, j: usize| {
        if i == 0 || j == 0 {
            S::zero()
        } else {
            tau.get(i - 1, j - 1).clone()
        }
    };
    let same = |(i, j): (usize, usize), (a, b): (usize, usize)| {
        let u = t(a, b);
        t(i, j).tol_eq(&u, tol) && u.tol_cmp(&t(i, a), tol) != Ordering::Greater
    };
    let mut reps: Vec<(usize, usize)> = Vec::new();
    let class_of =
        |reps: &[(usize, usize)], p: (usize, usize)| reps.iter().position(|&r| same(p, r));
    for i in 1..=k {
        for j in i..=k {
            if class_of(&reps, (i, j)).is_none() {
                reps.push((i, j));
            }
        }
    }
    if reps.len() != 2 * k - 1 {
        return Err(SkeletonError::InvalidMatrix(format!(
            "{} vertex classes for K = {k}",
            reps.len()
        )));
    }
    // Node ids: classes 0..2K-1, root 2K-1.
    let root = reps.len();
    let mut parent = vec![None; root + 1];
    for (c, &(i, j)) in reps.iter().enumerate() {
        let tij = t(i, j);
        let mut best = 0;
        for m in 1..=k {
            let tim = t(i, m);
            if tim.tol_cmp(&tij, tol) == Ordering::Less
                && tim.tol_cmp(&t(i, best), tol) == Ordering::Greater
            {
                best = m;
            }
        }
        parent[c] = Some(if best == 0 {
            root
        } else {
            class_of(&reps, (i, best))
                .ok_or_else(|| SkeletonError::InvalidMatrix("parent class not found".into()))?
        });
    }
    let leaf_nodes: Vec<usize> = (1..=k)
        .map(|i| class_of(&reps, (i, i)).expect("diagonal classes exist"))
        .collect();
    let (shape, label) =
        canonicalize(&parent, &leaf_nodes).map_err(SkeletonError::InvalidMatrix)?;
    let mut times = vec![S::zero(); root + 1];
    for (c, &(i, j)) in reps.iter().enumerate() {
        times[label[c]] = t(i, j);
    }
    Ok(BuiltShape::Tree(ShapedTree::new(shape, times)?))
}

/// `d_τ([i,u],[j,v])`: `u + v - 2τij` when both points lie past the branch
/// time, `|u - v|` otherwise.
pub fn tree_metric<S: Scalar>(
    tau: &BranchMatrix<S>,
    x: &TreePoint<S>,
    y: &TreePoint<S>,
) -> Result<S, SkeletonError> {
    for p in [x, y] {
        if p.row >= tau.k() || p.time < S::zero() || p.time > *tau.get(p.row, p.row) {
            return Err(SkeletonError::OutOfRange(format!(
                "[{}, {}]",
                p.row, p.time
            )));
        }
    }
    let tij = tau.get(x.row, y.row).clone();
    let lo = S::min_of(&x.time, &y.time);
    if lo > tij {
        Ok(x.time.clone() + y.time.clone() - tij.clone() - tij)
    } else {
        Ok(x.time.abs_diff(&y.time))
    }
}

/// `|Σ_K| = ∏_{j=2}^{K} (2j - 3)`.
pub fn count_shapes(k: usize) -> u128 {
    (2..=k as u128).map(|j| 2 * j - 3).product()
}

pub const MAX_ENUMERATION_K: usize = 8;

/// Every shape in `Σ_K`, generated by inserting leaf `j` into each edge of
/// every shape on `j - 1` leaves.
pub fn enumerate_shapes(k: usize) -> Result<Vec<Shape>, SkeletonError> {
    if k > MAX_ENUMERATION_K {
        return Err(SkeletonError::KTooLarge {
            k,
            max: MAX_ENUMERATION_K,
        });
    }
    if k == 0 {
        return Ok(Vec::new());
    }
    // Raw trees: parent arrays with node 0 the root and leaf i at leaves[i-1].
    let mut raw: Vec<(Vec<Option<usize>>, Vec<usize>)> = vec![(vec![None, Some(0)], vec![1])];
    for _ in 2..=k {
        let mut next = Vec::with_capacity(raw.len() * 2 * raw[0].1.len());
        for (parent, leaves) in &raw {
            for v in 1..parent.len() {
                next.push(insert_leaf(parent, leaves, v));
            }
        }
        raw = next;
    }
    raw.into_iter()
        .map(|(p, l)| {
            canonicalize(&p, &l)
                .map(|(s, _)| s)
                .map_err(SkeletonError::InvalidMatrix)
        })
        .collect()
}

/// Subdivides edge `e_v` and hangs a new leaf from the new vertex.
fn insert_leaf(
    parent: &[Option<usize>],
    leaves: &[usize],
    v: usize,
) -> (Vec<Option<usize>>, Vec<usize>) {
    let mut p = parent.to_vec();
    let b = p.len();
    p.push(p[v]);
    p[v] = Some(b);
    p.push(Some(b));
    let mut l = leaves.to_vec();
    l.push(b + 1);
    (p, l)
}

/// A uniformly distributed shape in `Σ_K`.
pub fn random_shape<R: Rng + ?Sized>(k: usize, rng: &mut R) -> Shape {
    assert!(k >= 1);
    let mut parent = vec![None, Some(0)];
    let mut leaves = vec![1];
    for _ in 2..=k {
        let v = rng.random_range(1..parent.len());
        (parent, leaves) = insert_leaf(&parent, &leaves, v);
    }
    canonicalize(&parent, &leaves)
        .expect("insertion keeps shapes valid")
        .0
}

// ---- text parsing ----

pub(crate) struct ParsedNode {
    pub parent: Option<usize>,
    pub leaf: Option<usize>,
    pub pair: Option<(usize, usize)>,
    pub length: Option<String>,
    pub extra: Option<String>,
}

pub(crate) struct ParsedTree {
    pub nodes: Vec<ParsedNode>,
}

impl ParsedTree {
    /// Canonical shape and the label of every parsed node.
    pub fn to_shape(&self) -> Result<(Shape, Vec<usize>), SkeletonError> {
        let parent: Vec<Option<usize>> = self.nodes.iter().map(|n| n.parent).collect();
        let mut leaves: Vec<(usize, usize)> = self
            .nodes
            .iter()
            .enumerate()
            .filter_map(|(v, n)| n.leaf.map(|l| (l, v)))
            .collect();
        leaves.sort();
        if leaves.iter().enumerate().any(|(i, &(l, _))| l != i + 1) {
            return Err(SkeletonError::Parse("leaf labels must be 1..K".into()));
        }
        let leaf_nodes: Vec<usize> = leaves.iter().map(|&(_, v)| v).collect();
        let (shape, label) = canonicalize(&parent, &leaf_nodes).map_err(SkeletonError::Parse)?;
        for (n, &l) in self.nodes.iter().zip(&label) {
            if let Some(p) = n.pair {
                if shape.rep_pair(l) != p {
                    return Err(SkeletonError::Parse(format!(
                        "vertex tag <{},{}> does not match the tree",
                        p.0, p.1
                    )));
                }
            }
        }
        Ok((shape, label))
    }
}

pub(crate) fn parse_tree_text(text: &str) -> Result<ParsedTree, SkeletonError> {
    struct P<'a> {
        s: &'a [u8],
        i: usize,
        nodes: Vec<ParsedNode>,
    }
    impl P<'_> {
        fn err(&self, what: &str) -> SkeletonError {
            SkeletonError::Parse(format!("{what} at byte {}", self.i))
        }
        fn eat(&mut self, c: u8) -> Result<(), SkeletonError> {
            if self.s.get(self.i) == Some(&c) {
                self.i += 1;
                Ok(())
            } else {
                Err(self.err(&format!("expected `{}`", c as char)))
            }
        }
        fn number(&mut self) -> Result<usize, SkeletonError> {
            let st = self.i;
            while self.s.get(self.i).is_some_and(u8::is_ascii_digit) {
                self.i += 1;
            }
            std::str::from_utf8(&self.s[st..self.i])
                .unwrap()
                .parse()
                .map_err(|_| self.err("expected a number"))
        }
        fn until(&mut self, stops: &[u8]) -> String {
            let st = self.i;
            while self.s.get(self.i).is_some_and(|c| !stops.contains(c)) {
                self.i += 1;
            }
            String::from_utf8_lossy(&self.s[st..self.i]).into_owned()
        }
        fn node(&mut self, parent: usize) -> Result<usize, SkeletonError> {
            let id = self.nodes.len();
            self.nodes.push(ParsedNode {
                parent: Some(parent),
                leaf: None,
                pair: None,
                length: None,
                extra: None,
            });
            if self.s.get(self.i) == Some(&b'(') {
                self.i += 1;
                self.node(id)?;
                self.eat(b',')?;
                self.node(id)?;
                self.eat(b')')?;
                self.eat(b'<')?;
                let a = self.number()?;
                self.eat(b',')?;
                let b = self.number()?;
                self.eat(b'>')?;
                self.nodes[id].pair = Some((a, b));
            } else {
                let l = self.number()?;
                if l == 0 {
                    return Err(self.err("leaf label 0 is reserved for the root"));
                }
                self.nodes[id].leaf = Some(l);
            }
            if self.s.get(self.i) == Some(&b':') {
                self.i += 1;
                self.nodes[id].length = Some(self.until(b",)["));
            }
            if self.s.get(self.i) == Some(&b'[') {
                self.i += 1;
                self.nodes[id].extra = Some(self.until(b"]"));
                self.eat(b']')?;
            }
            Ok(id)
        }
    }
    let compact: String = text.chars().filter(|c| !c.is_whitespace()).collect();
    let mut p = P {
        s: compact.as_bytes(),
        i: 0,
        nodes: Vec::new(),
    };
    p.nodes.push(ParsedNode {
        parent: None,
        leaf: None,
        pair: None,
        length: None,
        extra: None,
    });
    p.eat(b'(')?;
    p.node(0)?;
    p.eat(b')')?;
    p.eat(b'0')?;
    p.eat(b';')?;
    if p.i != p.s.len() {
        return Err(p.err("trailing input"));
    }
    Ok(ParsedTree { nodes: p.nodes })
}

// ---- genealogical skeletons ----

/// `τ(w, w') = τ̄ ∧ 𝔏(w) ∧ 𝔏(w')` with `τ̄` the first disagreement time.
pub fn branch_time(w1: &DiscretePath, w2: &DiscretePath) -> u64 {
    let cap = w1.lifetime().min(w2.lifetime());
    (0..=cap)
        .find(|&k| w1.at_index(k) != w2.at_index(k))
        .unwrap_or(cap)
}

pub fn branch_matrix(paths: &[DiscretePath]) -> BranchMatrix<i64> {
    BranchMatrix::from_fn(paths.len(), |i, j| branch_time(&paths[i], &paths[j]) as i64)
}

/// Generations of pairwise most recent common ancestors; diagonal entries
/// are the generations of the vertices themselves.
pub fn genealogical_branch_matrix(tree: &GenTree, vertices: &[u32]) -> BranchMatrix<i64> {
    BranchMatrix::from_fn(vertices.len(), |i, j| {
        crate::treegen::mrca_generation(tree, vertices[i], vertices[j]) as i64
    })
}

/// Minimal subtree spanned by the root and sampled vertices, and its
/// reduction obtained by erasing unsampled degree-2 vertices.
#[derive(Clone, Debug)]
pub struct SkeletonSubtree {
    leaves: Vec<u32>,
    vertices: Vec<u32>,
    reduced: ReducedTree,
}

/// Root-first list of retained vertices with parent links and edge lengths.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReducedTree {
    pub nodes: Vec<u32>,
    pub parent: Vec<Option<usize>>,
    pub length: Vec<u32>,
}

impl ReducedTree {
    /// Undirected weighted edges `(min, max, length)` over tree vertex ids, sorted.
    pub fn edge_set(&self) -> Vec<(u32, u32, u32)> {
        let mut e: Vec<_> = (0..self.nodes.len())
            .filter_map(|i| {
                self.parent[i].map(|p| {
                    let (a, b) = (self.nodes[i], self.nodes[p]);
                    (a.min(b), a.max(b), self.length[i])
                })
            })
            .collect();
        e.sort();
        e
    }
}

/// Marks the root and every ancestor of `v` in `mask`.
pub fn mark_root_path(tree: &GenTree, mask: &mut [bool], v: u32) {
    mask[0] = true;
    let mut u = v;
    while !mask[u as usize] {
        mask[u as usize] = true;
        u = tree.parent(u).expect("root is marked");
    }
}

pub fn minimal_subtree(tree: &GenTree, vertices: &[u32]) -> SkeletonSubtree {
    let mut in_sub: HashSet<u32> = HashSet::from([0]);
    for &v in vertices {
        let mut u = v;
        while in_sub.insert(u) {
            u = tree.parent(u).expect("root is in the subtree");
        }
    }
    let mut sorted: Vec<u32> = in_sub.into_iter().collect();
    sorted.sort_unstable();
    let mut sub_children: HashMap<u32, u32> = HashMap::new();
    for &v in &sorted[1..] {
        *sub_children.entry(tree.parent(v).unwrap()).or_default() += 1;
    }
    let sampled: HashSet<u32> = vertices.iter().copied().collect();
    let retained =
        |v: u32| v == 0 || sampled.contains(&v) || sub_children.get(&v).copied().unwrap_or(0) >= 2;
    // Nearest retained proper ancestor, and the reduced-tree index of retained vertices.
    let mut nra: HashMap<u32, u32> = HashMap::new();
    let mut index: HashMap<u32, usize> = HashMap::from([(0, 0)]);
    let mut reduced = ReducedTree {
        nodes: vec![0],
        parent: vec![None],
        length: vec![0],
    };
    for &v in &sorted[1..] {
        let p = tree.parent(v).unwrap();
        let a = if retained(p) { p } else { nra[&p] };
        nra.insert(v, a);
        if retained(v) {
            index.insert(v, reduced.nodes.len());
            reduced.nodes.push(v);
            reduced.parent.push(Some(index[&a]));
            reduced.length.push(tree.generation(v) - tree.generation(a));
        }
    }
    SkeletonSubtree {
        leaves: vertices.to_vec(),
        vertices: sorted,
        reduced,
    }
}

impl SkeletonSubtree {
    pub fn vertices(&self) -> &[u32] {
        &self.vertices
    }

    pub fn leaves(&self) -> &[u32] {
        &self.leaves
    }

    pub fn contains(&self, v: u32) -> bool {
        self.vertices.binary_search(&v).is_ok()
    }

    pub fn reduced(&self) -> &ReducedTree {
        &self.reduced
    }

    /// Erases unsampled non-root degree-2 vertices one at a time in the given
    /// order (vertices not in the subtree are skipped) and returns the
    /// resulting weighted edge set.
    pub fn erase_in_order(&self, tree: &GenTree, order: &[u32]) -> Vec<(u32, u32, u32)> {
        let mut adj: HashMap<u32, HashMap<u32, u32>> = HashMap::new();
        for &v in &self.vertices[1..] {
            let p = tree.parent(v).unwrap();
            adj.entry(v).or_default().insert(p, 1);
            adj.entry(p).or_default().insert(v, 1);
        }
        let protected: HashSet<u32> = self.leaves.iter().copied().chain([0]).collect();
        for &v in order {
            if protected.contains(&v) || adj.get(&v).is_none_or(|n| n.len() != 2) {
                continue;
            }
            let nb: Vec<(u32, u32)> = adj.remove(&v).unwrap().into_iter().collect();
            let (a, la) = nb[0];
            let (b, lb) = nb[1];
            adj.get_mut(&a).unwrap().remove(&v);
            adj.get_mut(&b).unwrap().remove(&v);
            adj.get_mut(&a).unwrap().insert(b, la + lb);
            adj.get_mut(&b).unwrap().insert(a, la + lb);
        }
        let mut edges: Vec<_> = adj
            .iter()
            .flat_map(|(&a, nb)| {
                nb.iter()
                    .filter(move |(&b, _)| a < b)
                    .map(move |(&b, &l)| (a, b, l))
            })
            .collect();
        edges.sort();
        edges
    }

    /// The labelled shape with generation times, or `None` when the sampled
    /// vertices are not distinct binary-branching leaves below the root.
    pub fn to_shape(&self, tree: &GenTree) -> Option<ShapedTree<i64>> {
        let r = &self.reduced;
        let mut nchildren = vec![0usize; r.nodes.len()];
        for p in r.parent.iter().flatten() {
            nchildren[*p] += 1;
        }
        let index: HashMap<u32, usize> = r.nodes.iter().enumerate().map(|(i, &v)| (v, i)).collect();
        let mut leaf_nodes = Vec::with_capacity(self.leaves.len());
        for &v in &self.leaves {
            let i = *index.get(&v)?;
            if i == 0 || nchildren[i] != 0 || leaf_nodes.contains(&i) {
                return None;
            }
            leaf_nodes.push(i);
        }
        let (shape, label) = canonicalize(&r.parent, &leaf_nodes).ok()?;
        let mut times = vec![0i64; r.nodes.len()];
        for (i, &v) in r.nodes.iter().enumerate() {
            times[label[i]] = tree.generation(v) as i64;
        }
        ShapedTree::new(shape, times).ok()
    }
}

/// Nearest-skeleton projection of every vertex.
#[derive(Clone, Debug, PartialEq)]
pub struct Projection {
    pub anchor: Vec<u32>,
    pub graph_distance: Vec<u32>,
    pub euclidean_distance: Vec<f64>,
}

/// Projects every vertex onto its nearest ancestor in the subtree given by
/// `mask` (which must contain the root and be closed under ancestry).
pub fn skeleton_projection(st: &SpatialTree, mask: &[bool]) -> Projection {
    let tree = st.tree();
    let n = tree.num_vertices();
    let pos = st.positions();
    let d = st.dim();
    let mut p = Projection {
        anchor: vec![0; n],
        graph_distance: vec![0; n],
        euclidean_distance: vec![0.0; n],
    };
    for v in 1..n {
        if mask[v] {
            p.anchor[v] = v as u32;
            continue;
        }
        let u = tree.parent(v as u32).unwrap() as usize;
        p.anchor[v] = p.anchor[u];
        p.graph_distance[v] = p.graph_distance[u] + 1;
        let a = p.anchor[v] as usize;
        p.euclidean_distance[v] = (0..d)
            .map(|c| ((pos[v * d + c] - pos[a * d + c]) as f64).powi(2))
            .sum::<f64>()
            .sqrt();
    }
    p
}

/// Maximal graph and squared Euclidean projection distances, using a
/// caller-owned anchor buffer of length `|T|`.
pub fn projection_maxima(
    tree: &GenTree,
    positions: &[i32],
    dim: usize,
    mask: &[bool],
    anchor: &mut [u32],
) -> (u32, i64) {
    let mut depth_gap = 0u32;
    let mut far = 0i64;
    anchor[0] = 0;
    for v in 1..tree.num_vertices() {
        if mask[v] {
            anchor[v] = v as u32;
            continue;
        }
        let a = anchor[tree.parent(v as u32).unwrap() as usize];
        anchor[v] = a;
        depth_gap = depth_gap.max(tree.generation(v as u32) - tree.generation(a));
        let a = a as usize;
        let sq: i64 = (0..dim)
            .map(|c| ((positions[v * dim + c] - positions[a * dim + c]) as i64).pow(2))
            .sum();
        far = far.max(sq);
    }
    (depth_gap, far)
}

/// Random non-degenerate matrix: a uniform shape with random integer edge lengths.
pub fn random_shaped_tree<R: Rng + ?Sized>(k: usize, rng: &mut R) -> ShapedTree<i64> {
    let shape = random_shape(k, rng);
    let lengths: Vec<i64> = (0..shape.num_vertices())
        .map(|_| rng.random_range(1..6))
        .collect();
    ShapedTree::from_lengths(shape, &lengths).unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::replica::rng_for;
    use crate::scalar::Rational;
    use crate::treegen::{
        attach_displacements, grow_conditioned, uniform_vertices, LawKind, OffspringLaw,
    };
    use proptest::prelude::*;
    use rand::Rng;

    const TOL: f64 = crate::DEFAULT_TOLERANCE;

    fn m(rows: &[&[i64]]) -> BranchMatrix<i64> {
        BranchMatrix::from_rows(rows.iter().map(|r| r.to_vec()).collect()).unwrap()
    }

    fn figure() -> BranchMatrix<i64> {
        m(&[&[3, 2, 2], &[2, 7, 5], &[2, 5, 8]])
    }

    use super::random_shaped_tree as random_shaped;

    #[test]
    fn three_leaf_example() {
        let BuiltShape::Tree(t) = build_shape(&figure(), TOL).unwrap() else {
            panic!("degenerate")
        };
        assert_eq!(t.to_text(), "((1:1,(2:2,3:3)<2,3>:3)<1,2>:2)0;");
        assert_eq!(t.shape().parents(), &[0, 4, 5, 5, 0, 4]);
        assert_eq!(t.lengths(), vec![0, 1, 2, 3, 2, 3]);
        assert_eq!(t.branch_matrix(), figure());
        let back: ShapedTree<i64> = ShapedTree::parse(&t.to_text()).unwrap();
        assert_eq!(back, t);
        assert_eq!(Shape::parse("((1,(2,3)<2,3>)<1,2>)0;").unwrap(), *t.shape());
    }

    #[test]
    fn two_leaf_example() {
        let BuiltShape::Tree(t) = build_shape(&m(&[&[3, 1], &[1, 2]]), TOL).unwrap() else {
            panic!()
        };
        assert_eq!(t.to_text(), "((1:2,2:1)<1,2>:1)0;");
    }

    #[test]
    fn single_path() {
        let BuiltShape::Tree(t) = build_shape(&m(&[&[5]]), TOL).unwrap() else {
            panic!()
        };
        assert_eq!(t.to_text(), "(1:5)0;");
        assert!(matches!(
            build_shape(&m(&[&[0]]), TOL).unwrap(),
            BuiltShape::Empty { .. }
        ));
    }

    #[test]
    fn degeneracies_are_detected() {
        assert_eq!(
            check_nondegenerate(&m(&[&[3, 0], &[0, 2]]), TOL),
            Err(Degeneracy::RootBranch { i: 0, j: 1 })
        );
        assert_eq!(
            check_nondegenerate(&m(&[&[3, 2], &[2, 2]]), TOL),
            Err(Degeneracy::AncestralBranch { i: 0, j: 1 })
        );
        assert_eq!(
            check_nondegenerate(&m(&[&[3, 1, 1], &[1, 3, 1], &[1, 1, 3]]), TOL),
            Err(Degeneracy::Trifurcation { i: 0, j: 1, k: 2 })
        );
        assert!(check_nondegenerate(&figure(), TOL).is_ok());
    }

    #[test]
    fn invalid_matrices_are_rejected() {
        assert!(build_shape(&m(&[&[3, 2], &[1, 3]]), TOL).is_err());
        assert!(build_shape(&m(&[&[3, 4], &[4, 5]]), TOL).is_err());
        assert!(build_shape(&m(&[&[5, 1, 3], &[1, 5, 3], &[3, 3, 5]]), TOL).is_err());
    }

    #[test]
    fn real_entries_within_tolerance_are_identified() {
        let tau = BranchMatrix::from_rows(vec![
            vec![3.0, 2.0, 2.0 + 1e-14],
            vec![2.0, 7.0, 5.0],
            vec![2.0 + 1e-14, 5.0, 8.0],
        ])
        .unwrap();
        let t = build_shape(&tau, TOL).unwrap();
        assert_eq!(
            t.tree().unwrap().shape().to_text(),
            "((1,(2,3)<2,3>)<1,2>)0;"
        );
    }

    #[test]
    fn shape_counts() {
        assert_eq!(
            (1..=5).map(count_shapes).collect::<Vec<_>>(),
            vec![1, 1, 3, 15, 105]
        );
        for k in 1..=6 {
            let shapes = enumerate_shapes(k).unwrap();
            assert_eq!(shapes.len() as u128, count_shapes(k));
            let distinct: HashSet<_> = shapes.iter().collect();
            assert_eq!(distinct.len(), shapes.len());
            for s in &shapes {
                assert_eq!(&Shape::parse(&s.to_text()).unwrap(), s);
            }
        }
        assert_eq!(
            enumerate_shapes(9),
            Err(SkeletonError::KTooLarge { k: 9, max: 8 })
        );
    }

    #[test]
    fn branch_time_examples() {
        let p = |v: &[i64]| DiscretePath::new(v.iter().map(|&x| vec![x]).collect()).unwrap();
        assert_eq!(branch_time(&p(&[0, 1]), &p(&[0, 1, 2])), 1);
        assert_eq!(branch_time(&p(&[0, 1, 2]), &p(&[0, 1, 0])), 2);
        assert_eq!(branch_time(&p(&[0, -1, 0]), &p(&[0, 1, 0])), 1);
        assert_eq!(branch_time(&p(&[0, 1, 2]), &p(&[0, 1, 2])), 2);
    }

    #[test]
    fn tree_metric_examples() {
        let tau = figure();
        let pt = |row, time| TreePoint { row, time };
        assert_eq!(tree_metric(&tau, &pt(0, 3), &pt(2, 8)).unwrap(), 7);
        assert_eq!(tree_metric(&tau, &pt(1, 1), &pt(2, 4)).unwrap(), 3);
        assert!(tree_metric(&tau, &pt(0, 4), &pt(2, 4)).is_err());
    }

    #[test]
    fn subtree_of_small_tree() {
        // 0 -> {1, 2}; 1 -> {3}; 2 -> {4, 5}; 3 -> {6}
        let t = GenTree::from_offspring_counts(&[2, 1, 2, 1, 0, 0, 0]).unwrap();
        let s = minimal_subtree(&t, &[6, 4, 5]);
        assert_eq!(s.vertices(), &[0, 1, 2, 3, 4, 5, 6]);
        assert_eq!(
            s.reduced().edge_set(),
            vec![(0, 2, 1), (0, 6, 3), (2, 4, 1), (2, 5, 1)]
        );
        // The root has two children in the subtree, so the shape is degenerate.
        assert!(s.to_shape(&t).is_none());
        let s = minimal_subtree(&t, &[4, 5]);
        let shaped = s.to_shape(&t).unwrap();
        assert_eq!(shaped.to_text(), "((1:1,2:1)<1,2>:1)0;");
    }

    #[test]
    fn projection_of_small_tree() {
        let t = GenTree::from_offspring_counts(&[2, 1, 2, 1, 0, 0, 0]).unwrap();
        let st = attach_displacements(t, 1, 1, &mut rng_for(1, 1, 1)).unwrap();
        let mut mask = vec![false; 7];
        mark_root_path(st.tree(), &mut mask, 4);
        let p = skeleton_projection(&st, &mask);
        assert_eq!(p.anchor, vec![0, 0, 2, 0, 4, 2, 0]);
        assert_eq!(p.graph_distance, vec![0, 1, 0, 2, 0, 1, 3]);
        let mut anchor = vec![0; 7];
        let (g, e2) = projection_maxima(st.tree(), &st.positions(), 1, &mask, &mut anchor);
        assert_eq!(g, 3);
        let emax = p.euclidean_distance.iter().cloned().fold(0.0, f64::max);
        assert_eq!((e2 as f64).sqrt(), emax);
    }

    #[test]
    fn perturbation_in_rationals_keeps_shape() {
        let mut rng = rng_for(5, 5, 5);
        for _ in 0..50 {
            let t = random_shaped(5, &mut rng);
            let tau = t
                .branch_matrix()
                .map(|&x| Rational::from_integer(x as i128));
            let d2 = tau.delta2(0.0).unwrap();
            let eps = d2 / Rational::from_integer(6);
            let shift = |v: usize| eps * Rational::new((v as i128 % 3) - 1, 1);
            let times: Vec<Rational> = t
                .times()
                .iter()
                .enumerate()
                .map(|(v, &x)| {
                    Rational::from_integer(x as i128) + if v == 0 { 0.into() } else { shift(v) }
                })
                .collect();
            let moved = ShapedTree::new(t.shape().clone(), times)
                .unwrap()
                .branch_matrix();
            let b = build_shape(&moved, 0.0).unwrap();
            assert_eq!(b.tree().unwrap().shape(), t.shape());
        }
    }

    proptest! {
        #[test]
        fn build_shape_inverts_branch_matrix(seed in 0u64..100_000, k in 1usize..8) {
            let mut rng = rng_for(seed, 17, 0);
            let t = random_shaped(k, &mut rng);
            let tau = t.branch_matrix();
            prop_assert!(tau.validate(TOL).is_ok());
            prop_assert!(check_nondegenerate(&tau, TOL).is_ok());
            let built = build_shape(&tau, TOL).unwrap();
            prop_assert_eq!(built.tree().unwrap(), &t);
        }

        #[test]
        fn parents_are_earlier_and_lengths_positive(seed in 0u64..100_000, k in 2usize..8) {
            let mut rng = rng_for(seed, 18, 0);
            let t = random_shaped(k, &mut rng);
            let s = t.shape();
            for v in 1..s.num_vertices() {
                let p = s.parent(v).unwrap();
                prop_assert!(t.length(v) > 0);
                prop_assert!(p == 0 || p > k);
                prop_assert_eq!(s.children(p).len(), if p == 0 { 1 } else { 2 });
                // d_τ(⟨i,j⟩, root) = τij.
                prop_assert_eq!(t.path_length(v, 0), *t.time(v));
            }
        }

        #[test]
        fn tree_metric_equals_path_metric(seed in 0u64..100_000, k in 1usize..7) {
            let mut rng = rng_for(seed, 19, 0);
            let t = random_shaped(k, &mut rng);
            let tau = t.branch_matrix();
            let n = t.shape().num_vertices();
            for a in 0..n {
                for b in 0..n {
                    let d = tree_metric(&tau, &t.point(a), &t.point(b)).unwrap();
                    prop_assert_eq!(d, t.path_length(a, b));
                }
            }
        }

        #[test]
        fn branch_matrix_invariants_hold_for_paths(seed in 0u64..100_000) {
            let mut rng = rng_for(seed, 20, 0);
            let law = OffspringLaw::new(LawKind::GeometricHalf);
            let Ok(c) = grow_conditioned(&law, 4, None, 200_000, &mut rng) else { return Ok(()) };
            let tree = c.value;
            let st = attach_displacements(tree, 1, 1, &mut rng).unwrap();
            let vs = uniform_vertices(st.tree(), 5, &mut rng);
            let paths: Vec<_> = vs.iter().map(|&v| crate::treegen::path_to_root(&st, v)).collect();
            let tau = branch_matrix(&paths);
            prop_assert!(tau.validate(0.0).is_ok());
            let g = genealogical_branch_matrix(st.tree(), &vs);
            prop_assert!(g.validate(0.0).is_ok());
            for i in 0..5 {
                for j in 0..5 {
                    prop_assert!(tau.get(i, j) >= g.get(i, j));
                }
            }
        }

        #[test]
        fn erasure_order_does_not_matter(seed in 0u64..100_000, k in 1usize..6) {
            let mut rng = rng_for(seed, 21, 0);
            let law = OffspringLaw::new(LawKind::GeometricHalf);
            let Ok(c) = grow_conditioned(&law, 3, None, 200_000, &mut rng) else { return Ok(()) };
            let tree = c.value;
            let vs = uniform_vertices(&tree, k, &mut rng);
            let sub = minimal_subtree(&tree, &vs);
            let mut order = sub.vertices().to_vec();
            let a = sub.erase_in_order(&tree, &order);
            order.reverse();
            let b = sub.erase_in_order(&tree, &order);
            for i in (1..order.len()).rev() {
                order.swap(i, rng.random_range(0..=i));
            }
            let c = sub.erase_in_order(&tree, &order);
            prop_assert_eq!(&a, &b);
            prop_assert_eq!(&a, &c);
            prop_assert_eq!(&a, &sub.reduced().edge_set());
        }

        #[test]
        fn subtree_shape_matches_matrix_shape(seed in 0u64..100_000, k in 1usize..6) {
            let mut rng = rng_for(seed, 22, 0);
            let law = OffspringLaw::new(LawKind::GeometricHalf);
            let Ok(c) = grow_conditioned(&law, 6, None, 400_000, &mut rng) else { return Ok(()) };
            let tree = c.value;
            let vs = uniform_vertices(&tree, k, &mut rng);
            let from_sub = minimal_subtree(&tree, &vs).to_shape(&tree);
            let from_tau = build_shape(&genealogical_branch_matrix(&tree, &vs), 0.0).unwrap();
            prop_assert_eq!(from_sub.as_ref(), from_tau.tree());
        }
    }
}
