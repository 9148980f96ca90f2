//! Graph spatial trees, interpolated paths and the metric `D = (d1 + d2) ∧ 1`.
//!
//! Embeddings are polylines per edge. Coordinates are stored unscaled
//! together with a factor `scale_sq`; the actual embedding is the stored
//! point times `√scale_sq`. This keeps diffusive rescaling exact for
//! rational coordinates.
//!
//! Text form: the skeleton text form with a breakpoint list after each edge
//! length, `[offset|x,y;offset|x,y;…]`, followed by ` scale2=s` when the
//! scale factor is not one. The degenerate tree is written `EMPTY(K=k);`.

use crate::scalar::{FieldScalar, Scalar};
use crate::skeleton::{
    build_shape, parse_tree_text, random_shape, BranchMatrix, BuiltShape, Shape, ShapedTree,
    SkeletonError,
};
use crate::treegen::DiscretePath;
use rand::Rng;
use std::cmp::Ordering;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GstError {
    #[error("shapes differ")]
    ShapeMismatch,
    #[error("invalid path: {0}")]
    InvalidPath(String),
    #[error("invalid graph spatial tree: {0}")]
    InvalidTree(String),
    #[error(transparent)]
    Skeleton(#[from] SkeletonError),
}

/// Piecewise-linear path through `(times[k], points[k])`, constant after the
/// last breakpoint.
#[derive(Clone, Debug, PartialEq)]
pub struct InterpolatedPath<S> {
    times: Vec<S>,
    points: Vec<Vec<S>>,
    scale_sq: S,
}

impl<S: FieldScalar> InterpolatedPath<S> {
    pub fn new(times: Vec<S>, points: Vec<Vec<S>>, scale_sq: S) -> Result<Self, GstError> {
        if times.is_empty() || times.len() != points.len() {
            return Err(GstError::InvalidPath(
                "need matching non-empty times and points".into(),
            ));
        }
        if !times[0].is_zero() {
            return Err(GstError::InvalidPath("paths start at time 0".into()));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(GstError::InvalidPath("times must increase strictly".into()));
        }
        let d = points[0].len();
        if points.iter().any(|p| p.len() != d) {
            return Err(GstError::InvalidPath("points of mixed dimension".into()));
        }
        if scale_sq <= S::zero() {
            return Err(GstError::InvalidPath("scale must be positive".into()));
        }
        Ok(InterpolatedPath {
            times,
            points,
            scale_sq,
        })
    }

    /// `κ_n(w)`: linear interpolation of `w` placed at times `k/n`.
    pub fn kappa(w: &DiscretePath, n: u64) -> Self {
        assert!(n >= 1);
        let times = (0..w.points().len())
            .map(|k| S::from_ratio(k as i64, n as i64))
            .collect();
        let points = w
            .points()
            .iter()
            .map(|p| p.iter().map(|&x| S::from_i64(x)).collect())
            .collect();
        InterpolatedPath {
            times,
            points,
            scale_sq: S::one(),
        }
    }

    /// `ρ_n`: time divided by `n`, space by `√n`.
    pub fn rho(&self, n: u64) -> Self {
        assert!(n >= 1);
        let n = S::from_i64(n as i64);
        InterpolatedPath {
            times: self.times.iter().map(|t| t.clone() / n.clone()).collect(),
            points: self.points.clone(),
            scale_sq: self.scale_sq.clone() / n,
        }
    }

    pub fn dim(&self) -> usize {
        self.points[0].len()
    }

    pub fn times(&self) -> &[S] {
        &self.times
    }

    pub fn points(&self) -> &[Vec<S>] {
        &self.points
    }

    pub fn scale_sq(&self) -> &S {
        &self.scale_sq
    }

    /// Stored (unscaled) coordinates at time `t ≥ 0`.
    pub fn eval(&self, t: &S) -> Vec<S> {
        let idx = self.times.partition_point(|x| x <= t);
        if idx == self.times.len() {
            return self.points[idx - 1].clone();
        }
        let (t0, t1) = (&self.times[idx - 1], &self.times[idx]);
        if t == t0 {
            return self.points[idx - 1].clone();
        }
        let theta = (t.clone() - t0.clone()) / (t1.clone() - t0.clone());
        lerp(&self.points[idx - 1], &self.points[idx], &theta)
    }

    /// Embedded coordinates at time `t`.
    pub fn eval_f64(&self, t: &S) -> Vec<f64> {
        let s = self.scale_sq.as_f64().sqrt();
        self.eval(t).iter().map(|x| x.as_f64() * s).collect()
    }

    /// `𝔏(w)`: the last breakpoint at which the path moved.
    pub fn lifetime(&self) -> S {
        (1..self.points.len())
            .rev()
            .find(|&k| self.points[k] != self.points[k - 1])
            .map_or_else(S::zero, |k| self.times[k].clone())
    }

    fn starts_at_origin(&self) -> bool {
        self.points[0].iter().all(|x| x.is_zero())
    }
}

fn lerp<S: FieldScalar>(a: &[S], b: &[S], theta: &S) -> Vec<S> {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.clone() + theta.clone() * (y.clone() - x.clone()))
        .collect()
}

fn merged_times<S: FieldScalar>(a: &[S], b: &[S]) -> Vec<S> {
    let mut t: Vec<S> = a.iter().chain(b).cloned().collect();
    t.sort_by(|x, y| x.partial_cmp(y).unwrap_or(Ordering::Equal));
    t.dedup();
    t
}

/// `τ(w, w') = τ̄ ∧ 𝔏(w) ∧ 𝔏(w')` for piecewise-linear paths on a common scale.
pub fn path_branch_time<S: FieldScalar>(
    a: &InterpolatedPath<S>,
    b: &InterpolatedPath<S>,
) -> Result<S, GstError> {
    if a.scale_sq != b.scale_sq || a.dim() != b.dim() {
        return Err(GstError::InvalidPath("paths on different scales".into()));
    }
    let cap = S::min_of(&a.lifetime(), &b.lifetime());
    let times = merged_times(&a.times, &b.times);
    // Both paths are linear between merged breakpoints, so they separate right
    // after the last breakpoint before the first one where they differ.
    let first_diff = times.iter().position(|t| a.eval(t) != b.eval(t));
    let tau_bar = first_diff.map(|j| times[j.saturating_sub(1)].clone());
    Ok(match tau_bar {
        Some(t) => S::min_of(&t, &cap),
        None => cap,
    })
}

pub fn path_branch_matrix<S: FieldScalar>(
    paths: &[InterpolatedPath<S>],
) -> Result<BranchMatrix<S>, GstError> {
    let k = paths.len();
    let mut rows = vec![vec![S::zero(); k]; k];
    for i in 0..k {
        for j in i..k {
            let t = path_branch_time(&paths[i], &paths[j])?;
            rows[i][j] = t.clone();
            rows[j][i] = t;
        }
    }
    Ok(BranchMatrix::from_rows(rows)?)
}

/// Breakpoints of the embedding of one edge, offsets measured from the
/// parent end.
#[derive(Clone, Debug, PartialEq)]
pub struct EdgeEmbedding<S> {
    pub offsets: Vec<S>,
    pub points: Vec<Vec<S>>,
}

impl<S: FieldScalar> EdgeEmbedding<S> {
    fn eval(&self, alpha: &S) -> Vec<S> {
        let idx = self.offsets.partition_point(|x| x <= alpha);
        if idx == self.offsets.len() {
            return self.points[idx - 1].clone();
        }
        let (a0, a1) = (&self.offsets[idx - 1], &self.offsets[idx]);
        let theta = (alpha.clone() - a0.clone()) / (a1.clone() - a0.clone());
        lerp(&self.points[idx - 1], &self.points[idx], &theta)
    }
}

/// A point at `offset ∈ [0, ℓ(e_v)]` along edge `e_v`.
#[derive(Clone, Debug, PartialEq)]
pub struct EdgePoint<S> {
    pub vertex: usize,
    pub offset: S,
}

/// Shape, edge lengths and a continuous polyline embedding rooted at the origin.
#[derive(Clone, Debug, PartialEq)]
pub struct GraphSpatialTree<S> {
    tree: ShapedTree<S>,
    edges: Vec<EdgeEmbedding<S>>,
    dim: usize,
    scale_sq: S,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Gst<S> {
    Tree(GraphSpatialTree<S>),
    /// The degenerate sentinel `∅_K`.
    Empty {
        k: usize,
    },
}

impl<S: FieldScalar> GraphSpatialTree<S> {
    /// Validates and assembles a tree; `edges[v]` embeds `e_v` (`edges[0]` is ignored).
    pub fn new(
        tree: ShapedTree<S>,
        mut edges: Vec<EdgeEmbedding<S>>,
        dim: usize,
        scale_sq: S,
    ) -> Result<Self, GstError> {
        let shape = tree.shape();
        let n = shape.num_vertices();
        if edges.len() != n {
            return Err(GstError::InvalidTree(format!(
                "{} edge embeddings for {n} vertices",
                edges.len()
            )));
        }
        if scale_sq <= S::zero() {
            return Err(GstError::InvalidTree("scale must be positive".into()));
        }
        edges[0] = EdgeEmbedding {
            offsets: vec![S::zero()],
            points: vec![vec![S::zero(); dim]],
        };
        for v in 1..n {
            let e = &edges[v];
            let len = tree.length(v);
            if e.offsets.len() < 2 || e.offsets.len() != e.points.len() {
                return Err(GstError::InvalidTree(format!(
                    "edge e_{v} needs at least two breakpoints"
                )));
            }
            if !e.offsets[0].is_zero()
                || *e.offsets.last().unwrap() != len
                || e.offsets.windows(2).any(|w| w[1] <= w[0])
            {
                return Err(GstError::InvalidTree(format!(
                    "edge e_{v} offsets must increase from 0 to its length"
                )));
            }
            if e.points.iter().any(|p| p.len() != dim) {
                return Err(GstError::InvalidTree(format!(
                    "edge e_{v} has points of the wrong dimension"
                )));
            }
            let p = shape.parent(v).unwrap();
            let top = edges[p].points.last().unwrap();
            if &e.points[0] != top {
                return Err(GstError::InvalidTree(format!(
                    "embedding is discontinuous at the top of e_{v}"
                )));
            }
        }
        Ok(GraphSpatialTree {
            tree,
            edges,
            dim,
            scale_sq,
        })
    }

    pub fn shaped(&self) -> &ShapedTree<S> {
        &self.tree
    }

    pub fn shape(&self) -> &Shape {
        self.tree.shape()
    }

    pub fn edge(&self, v: usize) -> &EdgeEmbedding<S> {
        &self.edges[v]
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn scale_sq(&self) -> &S {
        &self.scale_sq
    }

    /// Stored coordinates of a point.
    pub fn phi(&self, p: &EdgePoint<S>) -> Vec<S> {
        self.edges[p.vertex].eval(&p.offset)
    }

    pub fn phi_f64(&self, p: &EdgePoint<S>) -> Vec<f64> {
        let s = self.scale_sq.as_f64().sqrt();
        self.phi(p).iter().map(|x| x.as_f64() * s).collect()
    }

    /// `B_{n,K}`: lengths divided by `n`, embedding by `√n`.
    pub fn rescale(&self, n: u64) -> Self {
        assert!(n >= 1);
        let nn = S::from_i64(n as i64);
        let times = self
            .tree
            .times()
            .iter()
            .map(|t| t.clone() / nn.clone())
            .collect();
        let tree = ShapedTree::new(self.tree.shape().clone(), times)
            .expect("rescaling keeps lengths positive");
        let edges = self
            .edges
            .iter()
            .map(|e| EdgeEmbedding {
                offsets: e.offsets.iter().map(|a| a.clone() / nn.clone()).collect(),
                points: e.points.clone(),
            })
            .collect();
        GraphSpatialTree {
            tree,
            edges,
            dim: self.dim,
            scale_sq: self.scale_sq.clone() / nn,
        }
    }

    pub fn to_text(&self) -> String {
        let body = self.tree.shape_render(|v| {
            let e = &self.edges[v];
            let pts: Vec<String> = e
                .offsets
                .iter()
                .zip(&e.points)
                .map(|(a, p)| {
                    format!(
                        "{a}|{}",
                        p.iter()
                            .map(|x| x.to_string())
                            .collect::<Vec<_>>()
                            .join(",")
                    )
                })
                .collect();
            format!(":{}[{}]", self.tree.length(v), pts.join(";"))
        });
        if self.scale_sq == S::one() {
            body
        } else {
            format!("{body} scale2={}", self.scale_sq)
        }
    }
}

impl<S: FieldScalar> Gst<S> {
    pub fn k(&self) -> usize {
        match self {
            Gst::Tree(t) => t.shape().k(),
            Gst::Empty { k } => *k,
        }
    }

    pub fn tree(&self) -> Option<&GraphSpatialTree<S>> {
        match self {
            Gst::Tree(t) => Some(t),
            Gst::Empty { .. } => None,
        }
    }

    pub fn rescale(&self, n: u64) -> Self {
        match self {
            Gst::Tree(t) => Gst::Tree(t.rescale(n)),
            Gst::Empty { k } => Gst::Empty { k: *k },
        }
    }

    pub fn to_text(&self) -> String {
        match self {
            Gst::Tree(t) => t.to_text(),
            Gst::Empty { k } => format!("EMPTY(K={k});"),
        }
    }

    pub fn parse(text: &str) -> Result<Self, GstError> {
        let text = text.trim();
        if let Some(k) = text
            .strip_prefix("EMPTY(K=")
            .and_then(|r| r.strip_suffix(");"))
        {
            let k = k
                .parse()
                .map_err(|_| GstError::InvalidTree(format!("bad K in `{text}`")))?;
            return Ok(Gst::Empty { k });
        }
        let (body, scale_sq) = match text.split_once(" scale2=") {
            Some((b, s)) => (
                b,
                S::parse_scalar(s)
                    .ok_or_else(|| GstError::InvalidTree(format!("bad scale `{s}`")))?,
            ),
            None => (text, S::one()),
        };
        let parsed = parse_tree_text(body)?;
        let (shape, label) = parsed.to_shape()?;
        let n = shape.num_vertices();
        let mut lengths = vec![S::zero(); n];
        let mut edges = vec![
            EdgeEmbedding {
                offsets: Vec::new(),
                points: Vec::new()
            };
            n
        ];
        let mut dim = None;
        let bad = |what: &str| GstError::InvalidTree(what.to_string());
        for (node, &l) in parsed.nodes.iter().zip(&label) {
            if l == 0 {
                continue;
            }
            let len = node
                .length
                .as_deref()
                .ok_or_else(|| bad("missing edge length"))?;
            lengths[l] = S::parse_scalar(len).ok_or_else(|| bad("bad edge length"))?;
            let extra = node
                .extra
                .as_deref()
                .ok_or_else(|| bad("missing breakpoints"))?;
            for bp in extra.split(';') {
                let (a, p) = bp
                    .split_once('|')
                    .ok_or_else(|| bad("breakpoints are `offset|coords`"))?;
                edges[l]
                    .offsets
                    .push(S::parse_scalar(a).ok_or_else(|| bad("bad offset"))?);
                let coords: Option<Vec<S>> = p.split(',').map(S::parse_scalar).collect();
                let coords = coords.ok_or_else(|| bad("bad coordinate"))?;
                if *dim.get_or_insert(coords.len()) != coords.len() {
                    return Err(bad("points of mixed dimension"));
                }
                edges[l].points.push(coords);
            }
        }
        let tree = ShapedTree::from_lengths(shape, &lengths)?;
        Ok(Gst::Tree(GraphSpatialTree::new(
            tree,
            edges,
            dim.unwrap_or(0),
            scale_sq,
        )?))
    }
}

impl<S: Scalar> ShapedTree<S> {
    fn shape_render(&self, extra: impl Fn(usize) -> String) -> String {
        crate::skeleton::render_with(self.shape(), &|v| Some(extra(v)))
    }
}

/// `B_K(w)`: the graph spatial tree of `K` piecewise-linear paths, or `∅_K`
/// when their branch matrix is degenerate.
pub fn gst_of_paths<S: FieldScalar>(
    paths: &[InterpolatedPath<S>],
    tol: f64,
) -> Result<Gst<S>, GstError> {
    if paths.is_empty() {
        return Err(GstError::InvalidPath("need at least one path".into()));
    }
    if paths.iter().any(|p| !p.starts_at_origin()) {
        return Err(GstError::InvalidPath(
            "paths must start at the origin".into(),
        ));
    }
    let tau = path_branch_matrix(paths)?;
    let tree = match build_shape(&tau, tol)? {
        BuiltShape::Tree(t) => t,
        BuiltShape::Empty { k, .. } => return Ok(Gst::Empty { k }),
    };
    let shape = tree.shape();
    let mut edges = vec![
        EdgeEmbedding {
            offsets: Vec::new(),
            points: Vec::new()
        };
        shape.num_vertices()
    ];
    for (v, edge) in edges.iter_mut().enumerate().skip(1) {
        let w = &paths[shape.row(v)];
        let t0 = tree.time(shape.parent(v).unwrap()).clone();
        let t1 = tree.time(v).clone();
        let mut ts = vec![t0.clone()];
        ts.extend(w.times.iter().filter(|t| **t > t0 && **t < t1).cloned());
        ts.push(t1);
        edge.points = ts.iter().map(|t| w.eval(t)).collect();
        edge.offsets = ts.into_iter().map(|t| t - t0.clone()).collect();
    }
    let (dim, scale_sq) = (paths[0].dim(), paths[0].scale_sq.clone());
    Ok(Gst::Tree(GraphSpatialTree::new(
        tree, edges, dim, scale_sq,
    )?))
}

/// `Υ`: offset `α` on `e` maps to `α·ℓ'(e)/ℓ(e)`.
pub fn upsilon<S: FieldScalar>(
    g: &GraphSpatialTree<S>,
    h: &GraphSpatialTree<S>,
    p: &EdgePoint<S>,
) -> Result<EdgePoint<S>, GstError> {
    if g.shape() != h.shape() {
        return Err(GstError::ShapeMismatch);
    }
    if p.vertex == 0 {
        return Ok(p.clone());
    }
    let (l, lh) = (g.tree.length(p.vertex), h.tree.length(p.vertex));
    Ok(EdgePoint {
        vertex: p.vertex,
        offset: p.offset.clone() * lh / l,
    })
}

/// `sup_e |ℓ(e) - ℓ'(e)|`, or `None` (infinite) when shapes differ.
pub fn d1_exact<S: FieldScalar>(g: &GraphSpatialTree<S>, h: &GraphSpatialTree<S>) -> Option<S> {
    if g.shape() != h.shape() {
        return None;
    }
    Some((1..g.shape().num_vertices()).fold(S::zero(), |m, v| {
        S::max_of(&m, &g.tree.length(v).abs_diff(&h.tree.length(v)))
    }))
}

pub fn d1<S: FieldScalar>(g: &GraphSpatialTree<S>, h: &GraphSpatialTree<S>) -> f64 {
    d1_exact(g, h).map_or(f64::INFINITY, |x| x.as_f64())
}

/// Relative positions in `[0, 1]` of the merged breakpoints of edge `v`.
fn edge_fractions<S: FieldScalar>(
    g: &GraphSpatialTree<S>,
    h: &GraphSpatialTree<S>,
    v: usize,
) -> Vec<(S, S)> {
    let (l, lh) = (g.tree.length(v), h.tree.length(v));
    let fr_g: Vec<S> = g.edges[v]
        .offsets
        .iter()
        .map(|a| a.clone() / l.clone())
        .collect();
    let fr_h: Vec<S> = h.edges[v]
        .offsets
        .iter()
        .map(|a| a.clone() / lh.clone())
        .collect();
    merged_times(&fr_g, &fr_h)
        .into_iter()
        .map(|f| (f.clone() * l.clone(), f * lh.clone()))
        .collect()
}

/// `sup_x ‖φ(x) - φ'(Υx)‖²` evaluated exactly, when both embeddings share a scale.
pub fn d2_sq_exact<S: FieldScalar>(g: &GraphSpatialTree<S>, h: &GraphSpatialTree<S>) -> Option<S> {
    if g.shape() != h.shape() || g.scale_sq != h.scale_sq || g.dim != h.dim {
        return None;
    }
    let mut best = S::zero();
    for v in 1..g.shape().num_vertices() {
        for (a, b) in edge_fractions(g, h, v) {
            let (x, y) = (g.edges[v].eval(&a), h.edges[v].eval(&b));
            let sq = x.into_iter().zip(y).fold(S::zero(), |s, (p, q)| {
                let d = p - q;
                s + d.clone() * d
            });
            best = S::max_of(&best, &sq);
        }
    }
    Some(best * g.scale_sq.clone())
}

/// `sup_x ‖φ(x) - φ'(Υx)‖`, infinite when shapes differ.
pub fn d2<S: FieldScalar>(g: &GraphSpatialTree<S>, h: &GraphSpatialTree<S>) -> f64 {
    if g.shape() != h.shape() || g.dim != h.dim {
        return f64::INFINITY;
    }
    if let Some(sq) = d2_sq_exact(g, h) {
        return sq.as_f64().sqrt();
    }
    let (sg, sh) = (g.scale_sq.as_f64().sqrt(), h.scale_sq.as_f64().sqrt());
    let mut best = 0.0f64;
    for v in 1..g.shape().num_vertices() {
        for (a, b) in edge_fractions(g, h, v) {
            let (x, y) = (g.edges[v].eval(&a), h.edges[v].eval(&b));
            let d: f64 = x
                .iter()
                .zip(&y)
                .map(|(p, q)| (p.as_f64() * sg - q.as_f64() * sh).powi(2))
                .sum();
            best = best.max(d.sqrt());
        }
    }
    best
}

/// `D = (d1 + d2) ∧ 1`, with `D(·, ∅) = 1` and `D(∅, ∅) = 0`.
pub fn big_d<S: FieldScalar>(g: &Gst<S>, h: &Gst<S>) -> f64 {
    match (g, h) {
        (Gst::Empty { .. }, Gst::Empty { .. }) => 0.0,
        (Gst::Empty { .. }, _) | (_, Gst::Empty { .. }) => 1.0,
        (Gst::Tree(a), Gst::Tree(b)) => {
            let Some(l) = d1_exact(a, b) else { return 1.0 };
            if l.is_zero() && d2_sq_exact(a, b).is_some_and(|x| x.is_zero()) {
                return 0.0;
            }
            (l.as_f64() + d2(a, b)).min(1.0)
        }
    }
}

/// Random family of lattice paths whose genealogy follows a random
/// shape; sibling subtrees take distinct first steps.
pub fn random_lattice_family<R: Rng + ?Sized>(
    k: usize,
    dim: usize,
    rng: &mut R,
) -> Vec<DiscretePath> {
    let shape = random_shape(k, rng);
    let n = shape.num_vertices();
    let mut len = vec![0usize; n];
    for l in len.iter_mut().skip(1) {
        *l = rng.random_range(1..5);
    }
    let mut seg: Vec<Vec<Vec<i64>>> = vec![Vec::new(); n];
    let mut order = vec![0usize];
    let mut i = 0;
    while i < order.len() {
        let v = order[i];
        let kids = shape.children(v);
        let first_axis = rng.random_range(0..dim);
        for (c_idx, &c) in kids.iter().enumerate() {
            let mut x = if v == 0 {
                vec![0i64; dim]
            } else {
                seg[v].last().unwrap().clone()
            };
            let mut pts = Vec::with_capacity(len[c]);
            for s in 0..len[c] {
                let mut step = vec![0i64; dim];
                if s == 0 {
                    step[first_axis] = if c_idx == 0 { 1 } else { -1 };
                } else {
                    step[rng.random_range(0..dim)] = if rng.random::<bool>() { 1 } else { -1 };
                }
                for (a, b) in x.iter_mut().zip(step) {
                    *a += b;
                }
                pts.push(x.clone());
            }
            seg[c] = pts;
            order.push(c);
        }
        i += 1;
    }
    (1..=k)
        .map(|leaf| {
            let mut pts = vec![vec![0i64; dim]];
            for v in shape.ancestors(leaf).into_iter().rev().skip(1) {
                pts.extend(seg[v].iter().cloned());
            }
            DiscretePath::new(pts).unwrap()
        })
        .collect()
}

/// Random planar embedding of `t`: three random breakpoints per edge.
pub fn random_embedding<R: Rng + ?Sized>(
    t: &ShapedTree<f64>,
    rng: &mut R,
) -> GraphSpatialTree<f64> {
    let shape = t.shape();
    let mut edges = vec![
        EdgeEmbedding {
            offsets: vec![0.0],
            points: vec![vec![0.0, 0.0]]
        };
        shape.num_vertices()
    ];
    let mut order: Vec<usize> = (1..shape.num_vertices()).collect();
    order.sort_by_key(|&v| shape.ancestors(v).len());
    for v in order {
        let top = edges[shape.parent(v).unwrap()]
            .points
            .last()
            .unwrap()
            .clone();
        let l = t.length(v);
        let mut offsets = vec![0.0];
        let mut points = vec![top];
        for j in 1..=3 {
            offsets.push(if j == 3 { l } else { l * j as f64 / 3.0 });
            points.push(vec![
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            ]);
        }
        edges[v] = EdgeEmbedding { offsets, points };
    }
    GraphSpatialTree::new(t.clone(), edges, 2, 1.0).unwrap()
}
