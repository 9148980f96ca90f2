//! Closed-form limits and sampled limit objects used as oracles.

use crate::gst::InterpolatedPath;
use crate::scalar::Rational;
use crate::skeleton::Shape;
use crate::treegen::{LawKind, OffspringLaw};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LimitError {
    #[error("argument out of range: {0}")]
    RangeError(String),
    #[error("invalid shape times: {0}")]
    InvalidShapeTimes(String),
}

/// Kolmogorov's asymptotic `P(T_m ≠ ∅) ≈ 2/(γm)`.
pub fn survival_tail_gw(m: u64, gamma: f64) -> Result<f64, LimitError> {
    if m == 0 || gamma <= 0.0 {
        return Err(LimitError::RangeError(format!(
            "need m >= 1 and γ > 0, got m={m}, γ={gamma}"
        )));
    }
    Ok(2.0 / (gamma * m as f64))
}

/// `P(T_m ≠ ∅) = 1 - f^{∘m}(0)` for `f(s) = 1/(2 - s)`, iterated exactly.
pub fn exact_survival_geometric(m: u64) -> Rational {
    let two = Rational::from_integer(2);
    let mut q = Rational::from_integer(0);
    for _ in 0..m {
        q = Rational::from_integer(1) / (two - q);
    }
    Rational::from_integer(1) - q
}

/// `P(T_m ≠ ∅)` by iterating the offspring generating function.
pub fn survival_probability(law: &OffspringLaw, m: u64) -> f64 {
    if law.kind() == LawKind::GeometricHalf {
        return 1.0 / (m as f64 + 1.0);
    }
    let mut q = 0.0;
    for _ in 0..m {
        q = law.pgf(q);
    }
    1.0 - q
}

/// `E|T_m|² = 1 + γm`.
pub fn second_moment(law: &OffspringLaw, m: u64) -> f64 {
    1.0 + law.gamma() * m as f64
}

/// Expected number of ordered pairs `(α, β) ∈ T_{k1} × T_{k2}` whose most
/// recent common ancestor is at generation `m`: `E|T_m|·E[Y(Y-1)] = γ`.
pub fn pair_mrca_expectation(
    law: &OffspringLaw,
    m: u64,
    k1: u64,
    k2: u64,
) -> Result<f64, LimitError> {
    if m >= k1.min(k2) {
        return Err(LimitError::RangeError(format!(
            "need m < k1 ∧ k2, got m={m}, k1={k1}, k2={k2}"
        )));
    }
    Ok(law.gamma())
}

/// Exact per-generation pair expectations for the binary law, by summing
/// over every tree truncated at depth `max(k1, k2)`. Entry `m` is the
/// expectation for MRCA generation `m`, `m < k1 ∧ k2`.
pub fn exhaustive_pair_mrca_binary(k1: u32, k2: u32) -> Result<Vec<Rational>, LimitError> {
    let depth = k1.max(k2);
    if depth > 4 || k1.min(k2) == 0 {
        return Err(LimitError::RangeError(format!(
            "exhaustive enumeration supports 1 <= k <= 4, got {k1}, {k2}"
        )));
    }
    #[derive(Clone)]
    struct Node {
        children: Vec<Node>,
    }
    fn trees(depth: u32) -> Vec<(Rational, Node)> {
        let leaf = Node {
            children: Vec::new(),
        };
        if depth == 0 {
            return vec![(Rational::from_integer(1), leaf)];
        }
        let half = Rational::new(1, 2);
        let mut out = vec![(half, leaf)];
        let sub = trees(depth - 1);
        for (pa, a) in &sub {
            for (pb, b) in &sub {
                out.push((
                    half * pa * pb,
                    Node {
                        children: vec![a.clone(), b.clone()],
                    },
                ));
            }
        }
        out
    }
    fn count_at(node: &Node, gen_left: u32) -> i128 {
        if gen_left == 0 {
            1
        } else {
            node.children
                .iter()
                .map(|c| count_at(c, gen_left - 1))
                .sum()
        }
    }
    fn pairs(node: &Node, g: u32, k1: u32, k2: u32, acc: &mut [i128]) {
        if (g as usize) < acc.len() {
            let d1: Vec<i128> = node
                .children
                .iter()
                .map(|c| count_at(c, k1 - g - 1))
                .collect();
            let d2: Vec<i128> = node
                .children
                .iter()
                .map(|c| count_at(c, k2 - g - 1))
                .collect();
            for (i, a) in d1.iter().enumerate() {
                for (j, b) in d2.iter().enumerate() {
                    if i != j {
                        acc[g as usize] += a * b;
                    }
                }
            }
        }
        for c in &node.children {
            pairs(c, g + 1, k1, k2, acc);
        }
    }
    let levels = k1.min(k2) as usize;
    let mut expect = vec![Rational::from_integer(0); levels];
    for (p, t) in trees(depth) {
        let mut acc = vec![0i128; levels];
        pairs(&t, 0, k1, k2, &mut acc);
        for (e, c) in expect.iter_mut().zip(acc) {
            *e += p * Rational::from_integer(c);
        }
    }
    Ok(expect)
}

/// Conditioned lifetime tail `1/(2t)` for `t > 1`.
pub fn lifetime_tail_limit(t: f64) -> Result<f64, LimitError> {
    if t.is_nan() || t <= 1.0 {
        return Err(LimitError::RangeError(format!(
            "the lifetime tail oracle needs t > 1, got {t}"
        )));
    }
    Ok(1.0 / (2.0 * t))
}

/// `|[a, b] ∩ (0, t1 ∧ t2)|`.
pub fn branch_time_limit_measure(t1: f64, t2: f64, a: f64, b: f64) -> Result<f64, LimitError> {
    if !(0.0 <= a && a <= b) {
        return Err(LimitError::RangeError(format!(
            "need 0 <= a <= b, got [{a}, {b}]"
        )));
    }
    Ok((b.min(t1.min(t2)) - a).max(0.0))
}

/// A shape with times at every vertex, increasing away from the root.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricShapeTimes {
    shape: Shape,
    times: Vec<f64>,
}

impl MetricShapeTimes {
    /// `leaf_times[i]` belongs to leaf `i + 1`, `branch_times[j]` to vertex `K + 1 + j`.
    pub fn new(shape: Shape, leaf_times: &[f64], branch_times: &[f64]) -> Result<Self, LimitError> {
        let k = shape.k();
        if leaf_times.len() != k || branch_times.len() != k - 1 {
            return Err(LimitError::InvalidShapeTimes(format!(
                "expected {k} leaf times and {} branch times",
                k - 1
            )));
        }
        let times: Vec<f64> = std::iter::once(0.0)
            .chain(leaf_times.iter().copied())
            .chain(branch_times.iter().copied())
            .collect();
        for v in 1..shape.num_vertices() {
            let p = shape.parent(v).unwrap();
            if !(times[v].is_finite() && times[v] > times[p]) {
                return Err(LimitError::InvalidShapeTimes(format!(
                    "vertex {v} is not later than its parent"
                )));
            }
        }
        Ok(MetricShapeTimes { shape, times })
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn time(&self, v: usize) -> f64 {
        self.times[v]
    }

    pub fn min_edge(&self) -> f64 {
        (1..self.shape.num_vertices())
            .map(|v| self.times[v] - self.times[self.shape.parent(v).unwrap()])
            .fold(f64::INFINITY, f64::min)
    }
}

/// Brownian paths indexed by the leaves of a shape: identical up to the
/// time of their common ancestor, independent afterwards.
#[derive(Clone, Debug)]
pub struct TreeIndexedBm {
    pub h: f64,
    pub sigma0_sq: f64,
    paths: Vec<InterpolatedPath<f64>>,
}

impl TreeIndexedBm {
    /// Leaf paths, leaf `i + 1` at index `i`.
    pub fn paths(&self) -> &[InterpolatedPath<f64>] {
        &self.paths
    }
}

/// Default grid step: `10⁻³ ×` the shortest edge.
pub fn default_step(st: &MetricShapeTimes) -> f64 {
    1e-3 * st.min_edge()
}

/// Samples each edge on the grid `hZ` plus its endpoint times, parents first.
pub fn sample_tree_indexed_bm<R: Rng + ?Sized>(
    st: &MetricShapeTimes,
    sigma0_sq: f64,
    h: f64,
    dim: usize,
    rng: &mut R,
) -> Result<TreeIndexedBm, LimitError> {
    if !h.is_finite() || h <= 0.0 || !sigma0_sq.is_finite() || sigma0_sq < 0.0 || dim == 0 {
        return Err(LimitError::RangeError(
            "need h > 0, σ₀² >= 0 and d >= 1".into(),
        ));
    }
    let shape = &st.shape;
    let n = shape.num_vertices();
    let mut seg_t: Vec<Vec<f64>> = vec![Vec::new(); n];
    let mut seg_x: Vec<Vec<Vec<f64>>> = vec![Vec::new(); n];
    let mut order = vec![0usize];
    let mut i = 0;
    while i < order.len() {
        let v = order[i];
        order.extend(shape.children(v));
        i += 1;
    }
    let sd = sigma0_sq.sqrt();
    for &v in &order[1..] {
        let p = shape.parent(v).unwrap();
        let (t0, t1) = (st.times[p], st.times[v]);
        let mut x = if p == 0 {
            vec![0.0; dim]
        } else {
            seg_x[p].last().unwrap().clone()
        };
        let mut prev = t0;
        let first = (t0 / h).floor() as i64 + 1;
        let mut ts: Vec<f64> = (first..)
            .map(|g| g as f64 * h)
            .take_while(|&t| t < t1)
            .filter(|&t| t > t0)
            .collect();
        ts.push(t1);
        for t in ts {
            let s = sd * (t - prev).sqrt();
            for c in x.iter_mut() {
                let z: f64 = StandardNormal.sample(rng);
                *c += s * z;
            }
            seg_t[v].push(t);
            seg_x[v].push(x.clone());
            prev = t;
        }
    }
    let paths = (1..=shape.k())
        .map(|leaf| {
            let mut times = vec![0.0];
            let mut pts = vec![vec![0.0; dim]];
            for v in shape.ancestors(leaf).into_iter().rev().skip(1) {
                times.extend_from_slice(&seg_t[v]);
                pts.extend(seg_x[v].iter().cloned());
            }
            InterpolatedPath::new(times, pts, 1.0).expect("grid times increase")
        })
        .collect();
    Ok(TreeIndexedBm {
        h,
        sigma0_sq,
        paths,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gst::path_branch_time;
    use crate::replica::rng_for;
    use crate::skeleton::{enumerate_shapes, random_shape};

    #[test]
    fn geometric_survival_closed_form() {
        assert_eq!(exact_survival_geometric(1), Rational::new(1, 2));
        assert_eq!(exact_survival_geometric(100), Rational::new(1, 101));
        for m in 0..60 {
            assert_eq!(exact_survival_geometric(m), Rational::new(1, m as i128 + 1));
        }
        assert_eq!(survival_tail_gw(7, 2.0).unwrap(), 1.0 / 7.0);
        assert!(survival_tail_gw(0, 2.0).is_err());
    }

    #[test]
    fn generating_function_iteration() {
        let binary = OffspringLaw::new(LawKind::BinaryHalf);
        assert_eq!(survival_probability(&binary, 1), 0.5);
        assert_eq!(survival_probability(&binary, 2), 3.0 / 8.0);
        let poisson = OffspringLaw::new(LawKind::PoissonOne);
        assert!((survival_probability(&poisson, 1) - (1.0 - (-1.0f64).exp())).abs() < 1e-15);
        for law in LawKind::ALL.map(OffspringLaw::new) {
            let m = 20_000;
            let ratio = survival_probability(&law, m) / survival_tail_gw(m, law.gamma()).unwrap();
            assert!((ratio - 1.0).abs() < 2e-3, "{:?}: {ratio}", law.kind());
        }
    }

    #[test]
    fn exhaustive_binary_pairs() {
        let e = exhaustive_pair_mrca_binary(3, 3).unwrap();
        assert_eq!(e, vec![Rational::from_integer(1); 3]);
        let e = exhaustive_pair_mrca_binary(2, 4).unwrap();
        assert_eq!(e, vec![Rational::from_integer(1); 2]);
        let law = OffspringLaw::new(LawKind::BinaryHalf);
        for m in 0..3 {
            assert_eq!(pair_mrca_expectation(&law, m, 3, 3).unwrap(), 1.0);
        }
        assert!(pair_mrca_expectation(&law, 3, 3, 3).is_err());
    }

    #[test]
    fn lifetime_tail_values() {
        assert_eq!(lifetime_tail_limit(2.0).unwrap(), 0.25);
        assert_eq!(lifetime_tail_limit(4.0).unwrap(), 0.125);
        assert!((lifetime_tail_limit(1.0 + 1e-12).unwrap() - 0.5).abs() < 1e-11);
        assert!(lifetime_tail_limit(1.0).is_err());
    }

    #[test]
    fn limit_measure_values() {
        assert_eq!(branch_time_limit_measure(1.0, 2.0, 0.0, 1.0).unwrap(), 1.0);
        assert_eq!(branch_time_limit_measure(1.0, 2.0, 1.0, 9.0).unwrap(), 0.0);
        assert_eq!(
            branch_time_limit_measure(1.0, 2.0, 0.25, 0.75).unwrap(),
            0.5
        );
        assert!(branch_time_limit_measure(1.0, 1.0, 0.5, 0.25).is_err());
    }

    #[test]
    fn invalid_shape_times() {
        let s = enumerate_shapes(2).unwrap().remove(0);
        assert!(MetricShapeTimes::new(s.clone(), &[1.0, 2.0], &[0.5]).is_ok());
        assert!(MetricShapeTimes::new(s.clone(), &[1.0, 2.0], &[1.5]).is_err());
        assert!(MetricShapeTimes::new(s, &[1.0], &[]).is_err());
    }

    #[test]
    fn single_path_variance() {
        let s = enumerate_shapes(1).unwrap().remove(0);
        let st = MetricShapeTimes::new(s, &[2.0], &[]).unwrap();
        let mut rng = rng_for(1, 40, 0);
        let reps = 20_000;
        let xs: Vec<f64> = (0..reps)
            .map(|_| {
                sample_tree_indexed_bm(&st, 1.5, 0.1, 1, &mut rng)
                    .unwrap()
                    .paths()[0]
                    .eval(&2.0)[0]
            })
            .collect();
        let var = xs.iter().map(|x| x * x).sum::<f64>() / reps as f64;
        let se = 3.0f64 * (2.0 / reps as f64).sqrt();
        assert!((var - 3.0).abs() < 4.0 * se, "{var}");
    }

    #[test]
    fn shared_prefix_and_covariance() {
        let s = enumerate_shapes(2).unwrap().remove(0);
        let st = MetricShapeTimes::new(s, &[1.0, 1.5], &[0.4]).unwrap();
        let h = default_step(&st);
        let mut rng = rng_for(2, 41, 0);
        let reps = 20_000;
        let mut prod = Vec::with_capacity(reps);
        for r in 0..reps {
            let bm = sample_tree_indexed_bm(&st, 1.0, if r < 50 { h } else { 0.05 }, 1, &mut rng)
                .unwrap();
            let [a, b] = bm.paths() else { panic!() };
            let tau = path_branch_time(a, b).unwrap();
            if r < 50 {
                assert!(tau >= 0.4 && tau <= 0.4 + h, "{tau}");
                for t in [0.0, 0.1, 0.25, 0.4] {
                    assert_eq!(a.eval(&t), b.eval(&t));
                }
            }
            prod.push(a.eval(&1.0)[0] * b.eval(&1.5)[0]);
        }
        let mean = prod.iter().sum::<f64>() / reps as f64;
        let sd = (prod.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (reps - 1) as f64).sqrt();
        assert!(
            (mean - 0.4).abs() < 4.0 * sd / (reps as f64).sqrt(),
            "{mean}"
        );
    }

    #[test]
    fn branch_times_of_sampled_bm_build_the_shape() {
        let mut rng = rng_for(3, 42, 0);
        for k in 2..6 {
            let shape = random_shape(k, &mut rng);
            let mut times = vec![0.0; shape.num_vertices()];
            let mut order: Vec<usize> = (1..shape.num_vertices()).collect();
            order.sort_by_key(|&v| shape.ancestors(v).len());
            for v in order {
                times[v] = times[shape.parent(v).unwrap()] + rng.random_range(0.2..1.0);
            }
            let st = MetricShapeTimes::new(shape.clone(), &times[1..=k], &times[k + 1..]).unwrap();
            let bm = sample_tree_indexed_bm(&st, 1.0, 0.01, 2, &mut rng).unwrap();
            let g = crate::gst::gst_of_paths(bm.paths(), crate::DEFAULT_TOLERANCE).unwrap();
            assert_eq!(g.tree().unwrap().shape(), &shape);
        }
    }
}
