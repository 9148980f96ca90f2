//! Critical Galton-Watson trees and branching random walks.
//!
//! Vertices of a [`GenTree`] carry dense breadth-first ids: the root is `0`,
//! every generation occupies a contiguous id range and the children of a
//! vertex are contiguous in birth order. A [`SpatialTree`] adds an i.i.d.
//! displacement per non-root vertex, uniform on `[-L, L]^d ∩ Z^d` minus the
//! origin.
//!
//! [`GenerationProfile`] simulates only the generation sizes, drawing each
//! generation's offspring total from the law of a sum of i.i.d. offspring
//! variables. It supports statistics that depend on generation sizes alone
//! without per-vertex memory.

use rand::Rng;
use rand_distr::{Binomial, Distribution, Gamma, Poisson};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TreeGenError {
    #[error("vertex budget of {cap} exceeded")]
    BudgetExceeded { cap: u64 },
    #[error("invalid offspring sequence: {0}")]
    InvalidOffspring(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("vertex {0} out of range")]
    VertexOutOfRange(u64),
}

/// Offspring laws with mean one.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LawKind {
    /// `P(Y = k) = 2^{-(k+1)}`, variance 2.
    GeometricHalf,
    /// Poisson with mean 1, variance 1.
    PoissonOne,
    /// `Y ∈ {0, 2}` with probability 1/2 each, variance 1.
    BinaryHalf,
}

impl LawKind {
    pub const ALL: [LawKind; 3] = [
        LawKind::GeometricHalf,
        LawKind::PoissonOne,
        LawKind::BinaryHalf,
    ];

    pub fn name(self) -> &'static str {
        match self {
            LawKind::GeometricHalf => "geometric-half",
            LawKind::PoissonOne => "poisson-one",
            LawKind::BinaryHalf => "binary-half",
        }
    }
}

impl fmt::Display for LawKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LawKind {
    type Err = TreeGenError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        LawKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| TreeGenError::InvalidParameter(format!("unknown offspring law `{s}`")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OffspringLaw {
    kind: LawKind,
    gamma: f64,
}

impl OffspringLaw {
    pub fn new(kind: LawKind) -> Self {
        let gamma = match kind {
            LawKind::GeometricHalf => 2.0,
            LawKind::PoissonOne | LawKind::BinaryHalf => 1.0,
        };
        OffspringLaw { kind, gamma }
    }

    pub fn kind(&self) -> LawKind {
        self.kind
    }

    /// Offspring variance.
    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn mean(&self) -> f64 {
        1.0
    }

    /// Probability generating function `E[s^Y]`.
    pub fn pgf(&self, s: f64) -> f64 {
        match self.kind {
            LawKind::GeometricHalf => 1.0 / (2.0 - s),
            LawKind::PoissonOne => (s - 1.0).exp(),
            LawKind::BinaryHalf => 0.5 * (1.0 + s * s),
        }
    }

    pub fn pmf(&self, k: u64) -> f64 {
        match self.kind {
            LawKind::GeometricHalf => 0.5f64.powi(k as i32 + 1),
            LawKind::PoissonOne => {
                let mut p = (-1.0f64).exp();
                for j in 1..=k {
                    p /= j as f64;
                }
                p
            }
            LawKind::BinaryHalf => match k {
                0 | 2 => 0.5,
                _ => 0.0,
            },
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        match self.kind {
            LawKind::GeometricHalf => {
                let mut k = 0;
                while rng.random::<bool>() {
                    k += 1;
                }
                k
            }
            LawKind::PoissonOne => {
                let limit = (-1.0f64).exp();
                let mut k = 0;
                let mut p: f64 = rng.random();
                while p > limit {
                    k += 1;
                    p *= rng.random::<f64>();
                }
                k
            }
            LawKind::BinaryHalf => 2 * rng.random::<bool>() as u64,
        }
    }

    /// Total offspring of `count` independent individuals.
    pub fn sample_sum<R: Rng + ?Sized>(&self, count: u64, rng: &mut R) -> u64 {
        if count <= 16 {
            return (0..count).map(|_| self.sample(rng)).sum();
        }
        match self.kind {
            LawKind::GeometricHalf => {
                // Negative binomial(count, 1/2) as a gamma mixture of Poissons.
                let lambda = Gamma::new(count as f64, 1.0)
                    .expect("positive shape")
                    .sample(rng);
                poisson(lambda, rng)
            }
            LawKind::PoissonOne => poisson(count as f64, rng),
            LawKind::BinaryHalf => {
                2 * Binomial::new(count, 0.5)
                    .expect("valid binomial")
                    .sample(rng)
            }
        }
    }
}

fn poisson<R: Rng + ?Sized>(lambda: f64, rng: &mut R) -> u64 {
    if lambda <= 0.0 {
        return 0;
    }
    Poisson::new(lambda).expect("positive rate").sample(rng) as u64
}

impl FromStr for OffspringLaw {
    type Err = TreeGenError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(OffspringLaw::new(s.parse()?))
    }
}

/// Sentinel parent of the root.
pub const NO_PARENT: u32 = u32::MAX;

/// A finite rooted ordered tree with breadth-first vertex ids.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GenTree {
    parent: Vec<u32>,
    first_child: Vec<u32>,
    child_count: Vec<u32>,
    generation: Vec<u32>,
    level_start: Vec<usize>,
    depth_limit: Option<u32>,
}

impl GenTree {
    /// Builds a tree from offspring counts listed in breadth-first order.
    pub fn from_offspring_counts(counts: &[u32]) -> Result<Self, TreeGenError> {
        let mut it = counts.iter().copied();
        let tree = grow_with(u64::MAX, None, || it.next().map(u64::from))?;
        if tree.num_vertices() != counts.len() {
            return Err(TreeGenError::InvalidOffspring(format!(
                "{} counts given but the tree has {} vertices",
                counts.len(),
                tree.num_vertices()
            )));
        }
        Ok(tree)
    }

    pub fn num_vertices(&self) -> usize {
        self.parent.len()
    }

    /// Largest generation present.
    pub fn height(&self) -> u32 {
        (self.level_start.len() - 2) as u32
    }

    /// Generation at which growth was cut off, if any.
    pub fn depth_limit(&self) -> Option<u32> {
        self.depth_limit
    }

    pub fn parent(&self, v: u32) -> Option<u32> {
        match self.parent[v as usize] {
            NO_PARENT => None,
            p => Some(p),
        }
    }

    pub fn generation(&self, v: u32) -> u32 {
        self.generation[v as usize]
    }

    pub fn children(&self, v: u32) -> std::ops::Range<u32> {
        let s = self.first_child[v as usize];
        s..s + self.child_count[v as usize]
    }

    pub fn num_children(&self, v: u32) -> u32 {
        self.child_count[v as usize]
    }

    /// Vertex ids of generation `g` (empty past the height).
    pub fn generation_range(&self, g: u32) -> std::ops::Range<u32> {
        let g = g as usize;
        if g + 1 >= self.level_start.len() {
            let n = self.num_vertices() as u32;
            return n..n;
        }
        self.level_start[g] as u32..self.level_start[g + 1] as u32
    }

    pub fn generation_size(&self, g: u32) -> usize {
        self.generation_range(g).len()
    }

    /// `|T_g|` for `g = 0..=height`.
    pub fn generation_sizes(&self) -> Vec<u64> {
        self.level_start
            .windows(2)
            .map(|w| (w[1] - w[0]) as u64)
            .collect()
    }

    /// Ancestor of `v` at generation `g <= generation(v)`.
    pub fn ancestor_at(&self, mut v: u32, g: u32) -> u32 {
        assert!(g <= self.generation(v), "ancestor generation above vertex");
        while self.generation(v) > g {
            v = self.parent[v as usize];
        }
        v
    }

    /// Vertices from the root down to `v`.
    pub fn root_path(&self, v: u32) -> Vec<u32> {
        let mut path = Vec::with_capacity(self.generation(v) as usize + 1);
        let mut u = v;
        path.push(u);
        while let Some(p) = self.parent(u) {
            path.push(p);
            u = p;
        }
        path.reverse();
        path
    }

    pub fn check_vertex(&self, v: u64) -> Result<u32, TreeGenError> {
        if v < self.num_vertices() as u64 {
            Ok(v as u32)
        } else {
            Err(TreeGenError::VertexOutOfRange(v))
        }
    }
}

/// Breadth-first growth; `next` supplies offspring counts and returns `None`
/// when exhausted.
fn grow_with<F: FnMut() -> Option<u64>>(
    cap: u64,
    max_depth: Option<u32>,
    mut next: F,
) -> Result<GenTree, TreeGenError> {
    let mut parent = vec![NO_PARENT];
    let mut generation = vec![0u32];
    let mut first_child = Vec::new();
    let mut child_count = Vec::new();
    let mut level_start = vec![0usize];
    let mut v = 0usize;
    while v < parent.len() {
        let g = generation[v];
        if level_start.len() <= g as usize {
            level_start.push(v);
        }
        let y = if max_depth.is_some_and(|d| g >= d) {
            0
        } else {
            next().ok_or_else(|| {
                TreeGenError::InvalidOffspring("offspring sequence ended early".into())
            })?
        };
        if parent.len() as u64 + y > cap {
            return Err(TreeGenError::BudgetExceeded { cap });
        }
        first_child.push(parent.len() as u32);
        child_count.push(y as u32);
        for _ in 0..y {
            parent.push(v as u32);
            generation.push(g + 1);
        }
        v += 1;
    }
    level_start.push(parent.len());
    Ok(GenTree {
        parent,
        first_child,
        child_count,
        generation,
        level_start,
        depth_limit: max_depth,
    })
}

/// Grows a complete tree; errors if it would exceed `cap` vertices.
pub fn grow_tree<R: Rng + ?Sized>(
    law: &OffspringLaw,
    cap: u64,
    rng: &mut R,
) -> Result<GenTree, TreeGenError> {
    grow_with(cap, None, || Some(law.sample(rng)))
}

/// Grows a tree whose vertices at generation `depth` get no children.
pub fn grow_tree_to_depth<R: Rng + ?Sized>(
    law: &OffspringLaw,
    depth: u32,
    cap: u64,
    rng: &mut R,
) -> Result<GenTree, TreeGenError> {
    grow_with(cap, Some(depth), || Some(law.sample(rng)))
}

/// A draw conditioned by rejection, with the number of attempts it took.
#[derive(Clone, Debug)]
pub struct Conditioned<T> {
    pub value: T,
    pub attempts: u64,
}

/// Grows trees until one survives to generation `m` (`T_m ≠ ∅`).
///
/// `depth` optionally truncates growth; it must be at least `m`.
pub fn grow_conditioned<R: Rng + ?Sized>(
    law: &OffspringLaw,
    m: u32,
    depth: Option<u32>,
    cap: u64,
    rng: &mut R,
) -> Result<Conditioned<GenTree>, TreeGenError> {
    if depth.is_some_and(|d| d < m) {
        return Err(TreeGenError::InvalidParameter(format!(
            "depth {depth:?} below conditioning generation {m}"
        )));
    }
    let mut attempts = 0;
    loop {
        attempts += 1;
        let tree = grow_with(cap, depth, || Some(law.sample(rng)))?;
        if tree.height() >= m {
            return Ok(Conditioned {
                value: tree,
                attempts,
            });
        }
    }
}

/// `S = min{m ≥ 1 : T_m = ∅}`; for depth-truncated trees this is a lower bound.
pub fn survival_time(tree: &GenTree) -> u32 {
    tree.height() + 1
}

/// Generation of the most recent common ancestor of `u` and `v`.
pub fn mrca_generation(tree: &GenTree, u: u32, v: u32) -> u32 {
    mrca(tree, u, v).1
}

/// Most recent common ancestor and its generation.
pub fn mrca(tree: &GenTree, mut u: u32, mut v: u32) -> (u32, u32) {
    while tree.generation(u) > tree.generation(v) {
        u = tree.parent[u as usize];
    }
    while tree.generation(v) > tree.generation(u) {
        v = tree.parent[v as usize];
    }
    while u != v {
        u = tree.parent[u as usize];
        v = tree.parent[v as usize];
    }
    (u, tree.generation(u))
}

/// `k` i.i.d. uniform vertices; the first `j` entries are the draw for `j`.
pub fn uniform_vertices<R: Rng + ?Sized>(tree: &GenTree, k: usize, rng: &mut R) -> Vec<u32> {
    let n = tree.num_vertices() as u32;
    (0..k).map(|_| rng.random_range(0..n)).collect()
}

/// Integer-time path in `Z^d`, evaluated as `w(u) = points[min(⌊u⌋, m)]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DiscretePath {
    points: Vec<Vec<i64>>,
}

impl DiscretePath {
    pub fn new(points: Vec<Vec<i64>>) -> Result<Self, TreeGenError> {
        let Some(first) = points.first() else {
            return Err(TreeGenError::InvalidParameter(
                "a path needs at least one point".into(),
            ));
        };
        let d = first.len();
        if points.iter().any(|p| p.len() != d) {
            return Err(TreeGenError::InvalidParameter(
                "points of mixed dimension".into(),
            ));
        }
        Ok(DiscretePath { points })
    }

    pub fn dim(&self) -> usize {
        self.points[0].len()
    }

    /// Index of the last point.
    pub fn last_index(&self) -> u64 {
        (self.points.len() - 1) as u64
    }

    pub fn points(&self) -> &[Vec<i64>] {
        &self.points
    }

    pub fn at_index(&self, k: u64) -> &[i64] {
        &self.points[k.min(self.last_index()) as usize]
    }

    pub fn at(&self, u: f64) -> &[i64] {
        assert!(u >= 0.0, "paths are indexed by non-negative times");
        self.at_index(u.floor() as u64)
    }

    /// `inf{u : w is constant on [u, ∞)}`.
    pub fn lifetime(&self) -> u64 {
        (1..self.points.len())
            .rev()
            .find(|&k| self.points[k] != self.points[k - 1])
            .unwrap_or(0) as u64
    }
}

/// A tree with one displacement per non-root vertex.
#[derive(Clone, Debug)]
pub struct SpatialTree {
    tree: GenTree,
    dim: usize,
    range: u32,
    steps: Vec<i32>,
}

impl SpatialTree {
    pub fn tree(&self) -> &GenTree {
        &self.tree
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn range(&self) -> u32 {
        self.range
    }

    /// Displacement from the parent (zero for the root).
    pub fn step(&self, v: u32) -> &[i32] {
        let s = v as usize * self.dim;
        &self.steps[s..s + self.dim]
    }

    /// Positions of all vertices, flattened with stride `dim`.
    pub fn positions(&self) -> Vec<i32> {
        let mut pos = vec![0i32; self.steps.len()];
        let d = self.dim;
        for v in 1..self.tree.num_vertices() {
            let p = self.tree.parent[v] as usize;
            for c in 0..d {
                pos[v * d + c] = pos[p * d + c] + self.steps[v * d + c];
            }
        }
        pos
    }

    pub fn position(&self, v: u32) -> Vec<i64> {
        let mut x = vec![0i64; self.dim];
        let mut u = v;
        while let Some(p) = self.tree.parent(u) {
            for (xc, s) in x.iter_mut().zip(self.step(u)) {
                *xc += *s as i64;
            }
            u = p;
        }
        x
    }
}

/// Attaches i.i.d. displacements uniform on `[-L, L]^d ∩ Z^d \ {o}`.
pub fn attach_displacements<R: Rng + ?Sized>(
    tree: GenTree,
    dim: usize,
    range: u32,
    rng: &mut R,
) -> Result<SpatialTree, TreeGenError> {
    if dim == 0 || range == 0 {
        return Err(TreeGenError::InvalidParameter(
            "need d >= 1 and L >= 1".into(),
        ));
    }
    let side = 2 * range as u64 + 1;
    let cells = side
        .checked_pow(dim as u32)
        .filter(|&c| c < u32::MAX as u64)
        .ok_or_else(|| {
            TreeGenError::InvalidParameter(format!(
                "displacement box too large for d={dim}, L={range}"
            ))
        })?;
    let origin = (cells - 1) / 2;
    let mut steps = vec![0i32; tree.num_vertices() * dim];
    for v in 1..tree.num_vertices() {
        let r = rng.random_range(0..cells - 1);
        let mut idx = if r < origin { r } else { r + 1 };
        for c in 0..dim {
            steps[v * dim + c] = (idx % side) as i32 - range as i32;
            idx /= side;
        }
    }
    Ok(SpatialTree {
        tree,
        dim,
        range,
        steps,
    })
}

/// Positions of the ancestors of `v` at generations `0..=generation(v)`.
pub fn path_to_root(st: &SpatialTree, v: u32) -> DiscretePath {
    let vertices = st.tree.root_path(v);
    let mut x = vec![0i64; st.dim];
    let mut points = Vec::with_capacity(vertices.len());
    for (i, &u) in vertices.iter().enumerate() {
        if i > 0 {
            for (xc, s) in x.iter_mut().zip(st.step(u)) {
                *xc += *s as i64;
            }
        }
        points.push(x.clone());
    }
    DiscretePath { points }
}

/// Generation sizes `|T_0|, |T_1|, …` of a Galton-Watson tree.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GenerationProfile {
    sizes: Vec<u64>,
    total: u64,
    depth_limit: Option<u32>,
}

impl GenerationProfile {
    pub fn from_sizes(sizes: Vec<u64>) -> Self {
        let total = sizes.iter().sum();
        GenerationProfile {
            sizes,
            total,
            depth_limit: None,
        }
    }

    pub fn sizes(&self) -> &[u64] {
        &self.sizes
    }

    /// `|T_g|` (zero past the last non-empty generation).
    pub fn size(&self, g: u32) -> u64 {
        self.sizes.get(g as usize).copied().unwrap_or(0)
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn height(&self) -> u32 {
        (self.sizes.len() - 1) as u32
    }

    pub fn survival_time(&self) -> u32 {
        self.sizes.len() as u32
    }

    pub fn depth_limit(&self) -> Option<u32> {
        self.depth_limit
    }

    /// Generation of a uniformly chosen vertex.
    pub fn sample_uniform_generation<R: Rng + ?Sized>(&self, rng: &mut R) -> u32 {
        let mut r = rng.random_range(0..self.total);
        for (g, &z) in self.sizes.iter().enumerate() {
            if r < z {
                return g as u32;
            }
            r -= z;
        }
        unreachable!("uniform index beyond the total size")
    }
}

/// Simulates generation sizes until extinction or generation `depth`.
pub fn grow_profile<R: Rng + ?Sized>(
    law: &OffspringLaw,
    depth: Option<u32>,
    cap: u64,
    rng: &mut R,
) -> Result<GenerationProfile, TreeGenError> {
    let mut sizes = vec![1u64];
    let mut total = 1u64;
    let mut z = 1u64;
    while z > 0 && depth.is_none_or(|d| (sizes.len() as u32) <= d) {
        z = law.sample_sum(z, rng);
        total = total.saturating_add(z);
        if total > cap {
            return Err(TreeGenError::BudgetExceeded { cap });
        }
        if z > 0 {
            sizes.push(z);
        }
    }
    Ok(GenerationProfile {
        sizes,
        total,
        depth_limit: depth,
    })
}

/// Profiles conditioned on `T_m ≠ ∅`, by rejection.
pub fn grow_profile_conditioned<R: Rng + ?Sized>(
    law: &OffspringLaw,
    m: u32,
    depth: Option<u32>,
    cap: u64,
    rng: &mut R,
) -> Result<Conditioned<GenerationProfile>, TreeGenError> {
    if depth.is_some_and(|d| d < m) {
        return Err(TreeGenError::InvalidParameter(format!(
            "depth {depth:?} below conditioning generation {m}"
        )));
    }
    let mut attempts = 0;
    loop {
        attempts += 1;
        let p = grow_profile(law, depth, cap, rng)?;
        if p.height() >= m {
            return Ok(Conditioned { value: p, attempts });
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::replica::rng_for;
    use proptest::prelude::*;

    fn rng(stream: u64) -> rand_chacha::ChaCha8Rng {
        rng_for(11, 3, stream)
    }

    #[test]
    fn forced_counts_build_expected_tree() {
        // Root with two children; the first child has one child.
        let t = GenTree::from_offspring_counts(&[2, 1, 0, 0]).unwrap();
        assert_eq!(t.num_vertices(), 4);
        assert_eq!(t.generation_sizes(), vec![1, 2, 1]);
        assert_eq!(t.parent(3), Some(1));
        assert_eq!(t.children(0), 1..3);
        assert_eq!(survival_time(&t), 3);
        assert_eq!(mrca_generation(&t, 3, 2), 0);
        assert_eq!(mrca_generation(&t, 3, 1), 1);
    }

    #[test]
    fn inconsistent_counts_are_rejected() {
        assert!(GenTree::from_offspring_counts(&[2, 0]).is_err());
        assert!(GenTree::from_offspring_counts(&[0, 1]).is_err());
    }

    #[test]
    fn single_vertex_tree() {
        let t = GenTree::from_offspring_counts(&[0]).unwrap();
        assert_eq!(survival_time(&t), 1);
        assert_eq!(t.generation_sizes(), vec![1]);
    }

    #[test]
    fn budget_is_an_error() {
        let law = OffspringLaw::new(LawKind::BinaryHalf);
        let mut r = rng(0);
        let mut saw_error = false;
        for _ in 0..200 {
            match grow_tree(&law, 20, &mut r) {
                Ok(t) => assert!(t.num_vertices() <= 20),
                Err(e) => {
                    assert_eq!(e, TreeGenError::BudgetExceeded { cap: 20 });
                    saw_error = true;
                }
            }
        }
        assert!(saw_error);
    }

    #[test]
    fn offspring_laws_have_mean_one_and_variance_gamma() {
        for kind in LawKind::ALL {
            let law = OffspringLaw::new(kind);
            let mut r = rng(kind as u64);
            let n = 200_000;
            let xs: Vec<f64> = (0..n).map(|_| law.sample(&mut r) as f64).collect();
            let mean = xs.iter().sum::<f64>() / n as f64;
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            assert!((mean - 1.0).abs() < 0.02, "{kind}: mean {mean}");
            assert!(
                (var - law.gamma()).abs() < 0.05 * law.gamma(),
                "{kind}: var {var}"
            );
        }
    }

    #[test]
    fn sum_sampler_matches_moments() {
        for kind in LawKind::ALL {
            let law = OffspringLaw::new(kind);
            let mut r = rng(10 + kind as u64);
            let (count, reps) = (500u64, 20_000);
            let xs: Vec<f64> = (0..reps)
                .map(|_| law.sample_sum(count, &mut r) as f64)
                .collect();
            let mean = xs.iter().sum::<f64>() / reps as f64;
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (reps - 1) as f64;
            assert!(
                (mean / count as f64 - 1.0).abs() < 0.01,
                "{kind}: mean {mean}"
            );
            let want = law.gamma() * count as f64;
            assert!(
                (var / want - 1.0).abs() < 0.05,
                "{kind}: var {var} want {want}"
            );
        }
    }

    #[test]
    fn pmf_and_pgf_agree() {
        for kind in [LawKind::GeometricHalf, LawKind::PoissonOne] {
            let law = OffspringLaw::new(kind);
            for s in [0.0f64, 0.3, 0.9] {
                let series: f64 = (0..80).map(|k| law.pmf(k) * s.powi(k as i32)).sum();
                assert!((series - law.pgf(s)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn geometric_survival_matches_closed_form() {
        // P(T_m ≠ ∅) = 1/(m+1) for the geometric law.
        let law = OffspringLaw::new(LawKind::GeometricHalf);
        let mut r = rng(99);
        let reps = 100_000;
        let alive = (0..reps)
            .filter(|_| {
                grow_profile(&law, Some(4), u64::MAX, &mut r)
                    .unwrap()
                    .height()
                    >= 4
            })
            .count();
        let p = alive as f64 / reps as f64;
        assert!((p - 0.2).abs() < 0.006, "{p}");
    }

    #[test]
    fn displacement_law_is_uniform_off_origin() {
        let t = GenTree::from_offspring_counts(
            &[1; 40_000].iter().copied().chain([0]).collect::<Vec<_>>(),
        )
        .unwrap();
        let st = attach_displacements(t, 2, 1, &mut rng(5)).unwrap();
        let mut counts = std::collections::HashMap::new();
        for v in 1..st.tree().num_vertices() as u32 {
            *counts.entry(st.step(v).to_vec()).or_insert(0usize) += 1;
        }
        assert_eq!(counts.len(), 8);
        assert!(!counts.contains_key(&vec![0, 0]));
        for &c in counts.values() {
            assert!((c as f64 / 5000.0 - 1.0).abs() < 0.1);
        }
    }

    #[test]
    fn paths_follow_ancestry() {
        let law = OffspringLaw::new(LawKind::GeometricHalf);
        let mut r = rng(7);
        let t = grow_conditioned(&law, 5, None, 1 << 20, &mut r)
            .unwrap()
            .value;
        let st = attach_displacements(t, 2, 2, &mut r).unwrap();
        let pos = st.positions();
        for v in uniform_vertices(st.tree(), 50, &mut r) {
            let w = path_to_root(&st, v);
            let g = st.tree().generation(v) as u64;
            assert_eq!(w.last_index(), g);
            assert_eq!(w.lifetime(), g);
            assert_eq!(w.at_index(0), &[0, 0]);
            assert_eq!(w.at(g as f64 + 3.5), &st.position(v)[..]);
            assert_eq!(
                st.position(v),
                vec![pos[2 * v as usize] as i64, pos[2 * v as usize + 1] as i64]
            );
            for (l, a) in st.tree().root_path(v).into_iter().enumerate() {
                assert_eq!(w.at_index(l as u64), &st.position(a)[..]);
            }
        }
    }

    #[test]
    fn lifetime_of_constant_tail() {
        let w = DiscretePath::new(vec![vec![0], vec![1], vec![1], vec![1]]).unwrap();
        assert_eq!(w.lifetime(), 1);
        let w = DiscretePath::new(vec![vec![0]]).unwrap();
        assert_eq!(w.lifetime(), 0);
    }

    #[test]
    fn uniform_vertices_are_nested() {
        let t = GenTree::from_offspring_counts(&[3, 0, 0, 0]).unwrap();
        let a = uniform_vertices(&t, 10, &mut rng(1));
        let b = uniform_vertices(&t, 4, &mut rng(1));
        assert_eq!(&a[..4], &b[..]);
    }

    #[test]
    fn conditioned_profiles_reach_the_target() {
        let law = OffspringLaw::new(LawKind::PoissonOne);
        let mut r = rng(3);
        for _ in 0..100 {
            let c = grow_profile_conditioned(&law, 10, None, u64::MAX, &mut r).unwrap();
            assert!(c.value.height() >= 10);
            assert!(c.attempts >= 1);
            let g = c.value.sample_uniform_generation(&mut r);
            assert!(c.value.size(g) > 0);
        }
    }

    proptest! {
        #[test]
        fn tree_structure_is_consistent(seed in 0u64..10_000, kind in 0usize..3) {
            let law = OffspringLaw::new(LawKind::ALL[kind]);
            let mut r = rng(seed);
            let t = match grow_tree(&law, 5000, &mut r) { Ok(t) => t, Err(_) => return Ok(()) };
            let mut total = 1;
            for v in 0..t.num_vertices() as u32 {
                for c in t.children(v) {
                    prop_assert_eq!(t.parent(c), Some(v));
                    prop_assert_eq!(t.generation(c), t.generation(v) + 1);
                    total += 1;
                }
            }
            prop_assert_eq!(total, t.num_vertices());
            let sizes = t.generation_sizes();
            prop_assert_eq!(sizes.iter().sum::<u64>() as usize, t.num_vertices());
            prop_assert!(sizes.iter().all(|&z| z > 0));
        }

        #[test]
        fn mrca_is_common_ancestor(seed in 0u64..10_000) {
            let law = OffspringLaw::new(LawKind::GeometricHalf);
            let mut r = rng(seed);
            let Ok(c) = grow_conditioned(&law, 3, None, 100_000, &mut r) else { return Ok(()) };
            let t = c.value;
            let vs = uniform_vertices(&t, 2, &mut r);
            let (a, g) = mrca(&t, vs[0], vs[1]);
            prop_assert_eq!(t.ancestor_at(vs[0], g), a);
            prop_assert_eq!(t.ancestor_at(vs[1], g), a);
            if g < t.generation(vs[0]).min(t.generation(vs[1])) {
                prop_assert_ne!(t.ancestor_at(vs[0], g + 1), t.ancestor_at(vs[1], g + 1));
            }
        }
    }
}
