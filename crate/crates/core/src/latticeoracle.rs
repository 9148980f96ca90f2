//! Exact enumeration of small lattice trees weighted by `z^{|T|} ∏ D(e)`.
//!
//! `D` is the uniform step law on `[-L, L]^d ∩ Z^d \ {o}` and `|T|` counts
//! bonds. Sums are exact over the truncated ensemble of trees containing the
//! origin with at most `max_edges` bonds. No claim about criticality is made
//! at these sizes; `z` is a free parameter.
//!
//! Text format, one tree per line after a `#` header: bonds `a|b` with
//! comma-separated coordinates, joined by `;`. The single-vertex tree is `.`.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rand::Rng;
use std::collections::{BTreeMap, BTreeSet, HashSet, VecDeque};
use thiserror::Error;

pub const MAX_TREES: usize = 1_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LatticeError {
    #[error("enumeration exceeds {limit} trees")]
    EnumerationTooLarge { limit: usize },
    #[error("bond {0:?} - {1:?} is not admissible")]
    InadmissibleBond(Vec<i32>, Vec<i32>),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("cannot parse lattice tree: {0}")]
    Parse(String),
}

pub type Point = Vec<i32>;

/// A finite tree of lattice bonds containing the origin.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LatticeTree {
    bonds: Vec<(Point, Point)>,
    dim: usize,
}

impl LatticeTree {
    pub fn origin(dim: usize) -> Self {
        LatticeTree {
            bonds: Vec::new(),
            dim,
        }
    }

    /// Builds a tree from bonds; each bond is stored with its smaller end first.
    pub fn from_bonds(dim: usize, bonds: Vec<(Point, Point)>) -> Result<Self, LatticeError> {
        let mut norm: Vec<(Point, Point)> = bonds
            .into_iter()
            .map(|(a, b)| if a <= b { (a, b) } else { (b, a) })
            .collect();
        norm.sort();
        let t = LatticeTree { bonds: norm, dim };
        if t.bonds
            .iter()
            .any(|(a, b)| a.len() != dim || b.len() != dim || a == b)
        {
            return Err(LatticeError::InvalidParameter(
                "bonds must join distinct points of dimension d".into(),
            ));
        }
        let verts = t.vertices();
        if verts.len() != t.bonds.len() + 1 || !verts.contains(&vec![0; dim]) || !t.is_connected() {
            return Err(LatticeError::InvalidParameter(
                "bonds do not form a tree containing the origin".into(),
            ));
        }
        Ok(t)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_edges(&self) -> usize {
        self.bonds.len()
    }

    pub fn bonds(&self) -> &[(Point, Point)] {
        &self.bonds
    }

    pub fn vertices(&self) -> BTreeSet<Point> {
        let mut v: BTreeSet<Point> = self
            .bonds
            .iter()
            .flat_map(|(a, b)| [a.clone(), b.clone()])
            .collect();
        v.insert(vec![0; self.dim]);
        v
    }

    fn is_connected(&self) -> bool {
        self.generations().len() == self.vertices().len()
    }

    /// Graph distance from the origin of every vertex.
    pub fn generations(&self) -> BTreeMap<Point, u32> {
        let mut dist = BTreeMap::from([(vec![0; self.dim], 0u32)]);
        let mut queue = VecDeque::from([vec![0; self.dim]]);
        while let Some(x) = queue.pop_front() {
            let g = dist[&x];
            for (a, b) in &self.bonds {
                let y = if *a == x {
                    b
                } else if *b == x {
                    a
                } else {
                    continue;
                };
                if !dist.contains_key(y) {
                    dist.insert(y.clone(), g + 1);
                    queue.push_back(y.clone());
                }
            }
        }
        dist
    }

    pub fn to_line(&self) -> String {
        if self.bonds.is_empty() {
            return ".".into();
        }
        let pt = |p: &Point| {
            p.iter()
                .map(|x| x.to_string())
                .collect::<Vec<_>>()
                .join(",")
        };
        self.bonds
            .iter()
            .map(|(a, b)| format!("{}|{}", pt(a), pt(b)))
            .collect::<Vec<_>>()
            .join(";")
    }

    pub fn parse_line(line: &str, dim: usize) -> Result<Self, LatticeError> {
        let line = line.trim();
        if line == "." {
            return Ok(Self::origin(dim));
        }
        let pt = |s: &str| -> Result<Point, LatticeError> {
            s.split(',')
                .map(|x| {
                    x.trim()
                        .parse()
                        .map_err(|_| LatticeError::Parse(format!("bad coordinate `{x}`")))
                })
                .collect()
        };
        let bonds = line
            .split(';')
            .map(|b| {
                let (a, c) = b
                    .split_once('|')
                    .ok_or_else(|| LatticeError::Parse(format!("bad bond `{b}`")))?;
                Ok((pt(a)?, pt(c)?))
            })
            .collect::<Result<Vec<_>, LatticeError>>()?;
        Self::from_bonds(dim, bonds)
    }
}

fn step_count(dim: usize, range: u32) -> Result<u64, LatticeError> {
    if dim == 0 || range == 0 {
        return Err(LatticeError::InvalidParameter(
            "need d >= 1 and L >= 1".into(),
        ));
    }
    (2 * range as u64 + 1)
        .checked_pow(dim as u32)
        .map(|c| c - 1)
        .filter(|&c| c < 1 << 20)
        .ok_or_else(|| LatticeError::InvalidParameter("displacement box too large".into()))
}

fn steps(dim: usize, range: u32) -> Vec<Point> {
    let side = 2 * range as i64 + 1;
    let cells = side.pow(dim as u32);
    (0..cells)
        .map(|mut idx| {
            (0..dim)
                .map(|_| {
                    let c = (idx % side) as i32 - range as i32;
                    idx /= side;
                    c
                })
                .collect::<Point>()
        })
        .filter(|p| p.iter().any(|&c| c != 0))
        .collect()
}

/// Every lattice tree containing the origin with at most `max_edges` bonds,
/// ordered by edge count and then by sorted bond list.
pub fn enumerate_trees(
    dim: usize,
    range: u32,
    max_edges: usize,
) -> Result<Vec<LatticeTree>, LatticeError> {
    step_count(dim, range)?;
    let dirs = steps(dim, range);
    let mut all = vec![LatticeTree::origin(dim)];
    let mut level = vec![LatticeTree::origin(dim)];
    for _ in 0..max_edges {
        let mut next: HashSet<LatticeTree> = HashSet::new();
        for t in &level {
            let verts = t.vertices();
            for x in &verts {
                for e in &dirs {
                    let y: Point = x.iter().zip(e).map(|(a, b)| a + b).collect();
                    if verts.contains(&y) {
                        continue;
                    }
                    let mut bonds = t.bonds.clone();
                    bonds.push(if *x <= y {
                        (x.clone(), y)
                    } else {
                        (y, x.clone())
                    });
                    bonds.sort();
                    next.insert(LatticeTree { bonds, dim });
                    if all.len() + next.len() > MAX_TREES {
                        return Err(LatticeError::EnumerationTooLarge { limit: MAX_TREES });
                    }
                }
            }
        }
        let mut next: Vec<LatticeTree> = next.into_iter().collect();
        next.sort();
        all.extend(next.iter().cloned());
        level = next;
    }
    Ok(all)
}

/// `z^{|T|} ∏_e D(e)`.
pub fn weight(
    tree: &LatticeTree,
    z: &BigRational,
    range: u32,
) -> Result<BigRational, LatticeError> {
    let dim = tree.dim();
    let per_step = BigRational::new(BigInt::one(), BigInt::from(step_count(dim, range)?));
    let mut w = BigRational::one();
    for (a, b) in tree.bonds() {
        let far = a
            .iter()
            .zip(b)
            .map(|(x, y)| (x - y).unsigned_abs())
            .max()
            .unwrap_or(0);
        if far == 0 || far > range {
            return Err(LatticeError::InadmissibleBond(a.clone(), b.clone()));
        }
        w *= z * &per_step;
    }
    Ok(w)
}

/// Parses `a`, `a/b` or a finite decimal such as `0.25` exactly.
pub fn parse_rational(text: &str) -> Result<BigRational, LatticeError> {
    let t = text.trim();
    let bad = || LatticeError::Parse(format!("not a rational number: {text:?}"));
    let int = |s: &str| s.parse::<BigInt>().map_err(|_| bad());
    if let Some((a, b)) = t.split_once('/') {
        let den = int(b)?;
        if den.is_zero() {
            return Err(bad());
        }
        return Ok(BigRational::new(int(a)?, den));
    }
    if let Some((a, b)) = t.split_once('.') {
        if b.is_empty() || !b.bytes().all(|c| c.is_ascii_digit()) {
            return Err(bad());
        }
        let neg = a.starts_with('-');
        let whole = if a.is_empty() || a == "-" {
            BigInt::zero()
        } else {
            int(a)?
        };
        let frac = BigRational::new(int(b)?, num_traits::pow(BigInt::from(10), b.len()));
        let whole = BigRational::from_integer(whole);
        return Ok(if neg { whole - frac } else { whole + frac });
    }
    Ok(BigRational::from_integer(int(t)?))
}

/// Weighted truncated ensemble with exact sums.
#[derive(Clone, Debug)]
pub struct Ensemble {
    pub dim: usize,
    pub range: u32,
    pub max_edges: usize,
    pub z: BigRational,
    pub trees: Vec<LatticeTree>,
    pub weights: Vec<BigRational>,
}

impl Ensemble {
    pub fn new(
        dim: usize,
        range: u32,
        z: BigRational,
        max_edges: usize,
    ) -> Result<Self, LatticeError> {
        if z <= BigRational::zero() {
            return Err(LatticeError::InvalidParameter("z must be positive".into()));
        }
        let trees = enumerate_trees(dim, range, max_edges)?;
        let weights = trees
            .iter()
            .map(|t| weight(t, &z, range))
            .collect::<Result<_, _>>()?;
        Ok(Ensemble {
            dim,
            range,
            max_edges,
            z,
            trees,
            weights,
        })
    }

    /// `Σ_T W(T)` by direct summation.
    pub fn partition(&self) -> BigRational {
        self.weights.iter().sum()
    }

    /// `Σ_k #{T : |T| = k} (z/|box|)^k`.
    pub fn partition_by_counts(&self) -> BigRational {
        let per_step = BigRational::new(
            BigInt::one(),
            BigInt::from(step_count(self.dim, self.range).unwrap()),
        );
        let x = &self.z * per_step;
        self.edge_counts()
            .iter()
            .enumerate()
            .map(|(k, &c)| {
                BigRational::from_integer(BigInt::from(c)) * num_traits::pow(x.clone(), k)
            })
            .sum()
    }

    /// Number of trees with exactly `k` bonds, `k = 0..=max_edges`.
    pub fn edge_counts(&self) -> Vec<u64> {
        let mut c = vec![0u64; self.max_edges + 1];
        for t in &self.trees {
            c[t.num_edges()] += 1;
        }
        c
    }

    /// `E|T_m|`: mean number of vertices at graph distance `m` from the origin.
    pub fn generation_mean(&self, m: u32) -> BigRational {
        let total: BigRational = self
            .trees
            .iter()
            .zip(&self.weights)
            .map(|(t, w)| {
                w * BigRational::from_integer(BigInt::from(
                    t.generations().values().filter(|&&g| g == m).count(),
                ))
            })
            .sum();
        total / self.partition()
    }

    /// Law of `(generation, point)` of a uniform vertex of a `W`-weighted tree.
    pub fn uniform_vertex_law(&self) -> BTreeMap<(u32, Point), BigRational> {
        let z = self.partition();
        let mut law: BTreeMap<(u32, Point), BigRational> = BTreeMap::new();
        for (t, w) in self.trees.iter().zip(&self.weights) {
            let gens = t.generations();
            let share = w / (&z * BigRational::from_integer(BigInt::from(gens.len())));
            for (x, g) in gens {
                *law.entry((g, x)).or_insert_with(BigRational::zero) += &share;
            }
        }
        law
    }

    /// Draws a tree with probability `W(T)/Z` by inverse CDF, then a uniform vertex.
    pub fn sampler(&self) -> EnsembleSampler<'_> {
        let z = self.partition();
        let mut acc = BigRational::zero();
        let cdf = self
            .weights
            .iter()
            .map(|w| {
                acc += w;
                (&acc / &z).to_f64().unwrap_or(1.0)
            })
            .collect();
        EnsembleSampler {
            ensemble: self,
            cdf,
        }
    }

    pub fn to_text(&self) -> String {
        let mut out = format!(
            "# lattice-trees d={} L={} max_edges={} count={}\n",
            self.dim,
            self.range,
            self.max_edges,
            self.trees.len()
        );
        for t in &self.trees {
            out.push_str(&t.to_line());
            out.push('\n');
        }
        out
    }
}

/// Reads trees from the text format (the header supplies `d`).
pub fn parse_ensemble_text(text: &str) -> Result<Vec<LatticeTree>, LatticeError> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| LatticeError::Parse("empty input".into()))?;
    let dim = header
        .split_whitespace()
        .find_map(|f| f.strip_prefix("d="))
        .and_then(|d| d.parse().ok())
        .ok_or_else(|| LatticeError::Parse("header lacks d=".into()))?;
    lines
        .filter(|l| !l.trim().is_empty())
        .map(|l| LatticeTree::parse_line(l, dim))
        .collect()
}

pub struct EnsembleSampler<'a> {
    ensemble: &'a Ensemble,
    cdf: Vec<f64>,
}

impl EnsembleSampler<'_> {
    pub fn sample_tree<R: Rng + ?Sized>(&self, rng: &mut R) -> &LatticeTree {
        let u: f64 = rng.random();
        let i = self
            .cdf
            .partition_point(|&c| c <= u)
            .min(self.cdf.len() - 1);
        &self.ensemble.trees[i]
    }

    pub fn sample_vertex<R: Rng + ?Sized>(&self, rng: &mut R) -> (u32, Point) {
        let t = self.sample_tree(rng);
        let gens: Vec<(Point, u32)> = t.generations().into_iter().collect();
        let (x, g) = gens[rng.random_range(0..gens.len())].clone();
        (g, x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::replica::rng_for;

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    #[test]
    fn rational_parsing() {
        let r = |a: i64, b: i64| BigRational::new(BigInt::from(a), BigInt::from(b));
        assert_eq!(parse_rational("1").unwrap(), r(1, 1));
        assert_eq!(parse_rational("3/6").unwrap(), r(1, 2));
        assert_eq!(parse_rational("0.25").unwrap(), r(1, 4));
        assert_eq!(parse_rational("-1.5").unwrap(), r(-3, 2));
        assert!(parse_rational("1/0").is_err());
        assert!(parse_rational("x").is_err());
    }

    #[test]
    fn counts_in_one_dimension() {
        let e = Ensemble::new(1, 1, q(1, 1), 4).unwrap();
        assert_eq!(e.edge_counts(), vec![1, 2, 3, 4, 5]);
        assert_eq!(
            enumerate_trees(1, 1, 0).unwrap(),
            vec![LatticeTree::origin(1)]
        );
    }

    #[test]
    fn one_bond_in_the_plane() {
        let e = Ensemble::new(2, 1, q(1, 1), 1).unwrap();
        assert_eq!(e.edge_counts(), vec![1, 8]);
    }

    #[test]
    fn counts_against_brute_force() {
        // Brute force: all sets of k admissible bonds among points within reach.
        for (dim, range, k) in [(1usize, 2u32, 2usize), (2, 1, 2), (1, 1, 3)] {
            let reach = (range as i32) * k as i32;
            let pts: Vec<Point> = if dim == 1 {
                (-reach..=reach).map(|x| vec![x]).collect()
            } else {
                (-reach..=reach)
                    .flat_map(|x| (-reach..=reach).map(move |y| vec![x, y]))
                    .collect()
            };
            let mut bonds = Vec::new();
            for a in &pts {
                for b in &pts {
                    let far = a
                        .iter()
                        .zip(b)
                        .map(|(x, y)| (x - y).unsigned_abs())
                        .max()
                        .unwrap();
                    if a < b && far <= range {
                        bonds.push((a.clone(), b.clone()));
                    }
                }
            }
            let mut count = 0u64;
            let mut chosen = Vec::new();
            fn rec(
                bonds: &[(Point, Point)],
                start: usize,
                k: usize,
                dim: usize,
                chosen: &mut Vec<(Point, Point)>,
                count: &mut u64,
            ) {
                if chosen.len() == k {
                    if LatticeTree::from_bonds(dim, chosen.clone()).is_ok() {
                        *count += 1;
                    }
                    return;
                }
                for i in start..bonds.len() {
                    chosen.push(bonds[i].clone());
                    rec(bonds, i + 1, k, dim, chosen, count);
                    chosen.pop();
                }
            }
            rec(&bonds, 0, k, dim, &mut chosen, &mut count);
            let e = Ensemble::new(dim, range, q(1, 1), k).unwrap();
            assert_eq!(e.edge_counts()[k], count, "d={dim} L={range} k={k}");
        }
    }

    #[test]
    fn weights() {
        let o = LatticeTree::origin(1);
        assert_eq!(weight(&o, &q(3, 1), 1).unwrap(), q(1, 1));
        let one = LatticeTree::from_bonds(1, vec![(vec![0], vec![1])]).unwrap();
        assert_eq!(weight(&one, &q(1, 1), 1).unwrap(), q(1, 2));
        let two = LatticeTree::from_bonds(1, vec![(vec![0], vec![1]), (vec![1], vec![2])]).unwrap();
        assert_eq!(weight(&two, &q(2, 1), 1).unwrap(), q(1, 1));
        let long = LatticeTree::from_bonds(1, vec![(vec![0], vec![2])]).unwrap();
        assert!(matches!(
            weight(&long, &q(1, 1), 1),
            Err(LatticeError::InadmissibleBond(..))
        ));
    }

    #[test]
    fn partition_two_ways() {
        let e = Ensemble::new(1, 1, q(1, 1), 2).unwrap();
        assert_eq!(e.partition(), q(11, 4));
        for (dim, range, z, m) in [(1, 1, q(3, 2), 5), (2, 1, q(7, 3), 3), (1, 2, q(1, 3), 3)] {
            let e = Ensemble::new(dim, range, z, m).unwrap();
            assert_eq!(e.partition(), e.partition_by_counts());
        }
    }

    #[test]
    fn trivial_ensemble() {
        let e = Ensemble::new(1, 1, q(1, 1), 0).unwrap();
        assert_eq!(e.partition(), q(1, 1));
        let law = e.uniform_vertex_law();
        assert_eq!(law.len(), 1);
        assert_eq!(law[&(0, vec![0])], q(1, 1));
        assert_eq!(e.generation_mean(0), q(1, 1));
    }

    #[test]
    fn vertex_law_is_symmetric_and_normalized() {
        let e = Ensemble::new(1, 1, q(2, 1), 4).unwrap();
        let law = e.uniform_vertex_law();
        assert_eq!(law.values().sum::<BigRational>(), q(1, 1));
        for ((g, x), p) in &law {
            assert_eq!(&law[&(*g, vec![-x[0]])], p);
        }
        // E|T_1| = Σ_T W(T) deg(o) / Z.
        let direct: BigRational = e
            .trees
            .iter()
            .zip(&e.weights)
            .map(|(t, w)| {
                w * BigRational::from_integer(BigInt::from(
                    t.bonds()
                        .iter()
                        .filter(|(a, b)| a[0] == 0 || b[0] == 0)
                        .count(),
                ))
            })
            .sum::<BigRational>()
            / e.partition();
        assert_eq!(e.generation_mean(1), direct);
    }

    #[test]
    fn text_round_trip() {
        let e = Ensemble::new(2, 1, q(1, 1), 2).unwrap();
        let text = e.to_text();
        assert!(text.starts_with("# lattice-trees d=2 L=1 max_edges=2 count="));
        assert_eq!(text.lines().nth(1), Some("."));
        assert_eq!(parse_ensemble_text(&text).unwrap(), e.trees);
    }

    #[test]
    fn enumeration_guard() {
        assert_eq!(
            enumerate_trees(3, 2, 6),
            Err(LatticeError::EnumerationTooLarge { limit: MAX_TREES })
        );
    }

    #[test]
    fn sampler_matches_exact_law() {
        let e = Ensemble::new(1, 1, q(1, 1), 3).unwrap();
        let law = e.uniform_vertex_law();
        let s = e.sampler();
        let mut rng = rng_for(4, 4, 4);
        let n = 200_000;
        let mut counts: BTreeMap<(u32, Point), u64> = BTreeMap::new();
        for _ in 0..n {
            *counts.entry(s.sample_vertex(&mut rng)).or_default() += 1;
        }
        for (key, p) in &law {
            let p = p.to_f64().unwrap();
            let phat = *counts.get(key).unwrap_or(&0) as f64 / n as f64;
            let se = (p * (1.0 - p) / n as f64).sqrt();
            assert!((phat - p).abs() <= 4.0 * se, "{key:?}: {phat} vs {p}");
        }
    }
}
