//! Randomized exact checks of the skeleton and GST identities.

use crate::gst::{
    big_d, gst_of_paths, random_embedding, random_lattice_family, Gst, InterpolatedPath,
};
use crate::replica::{rng_for, run_replicas, salt, Merge};
use crate::scalar::Rational;
use crate::skeleton::{build_shape, random_shape, tree_metric, ShapedTree};
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Outcome of a batch of randomized trials.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CheckTally {
    pub trials: u64,
    pub failures: u64,
    /// Draws outside the hypothesis of the identity, redrawn.
    pub skipped: u64,
    pub first_failure: Option<String>,
}

impl CheckTally {
    pub fn passed(&self) -> bool {
        self.failures == 0 && self.trials > 0
    }

    fn fail(&mut self, what: String) {
        self.failures += 1;
        if self.first_failure.is_none() {
            self.first_failure = Some(what);
        }
    }
}

impl Merge for CheckTally {
    fn merge(&mut self, other: Self) {
        self.trials += other.trials;
        self.failures += other.failures;
        self.skipped += other.skipped;
        if self.first_failure.is_none() {
            self.first_failure = other.first_failure;
        }
    }
}

fn tally<F>(label: &str, trials: u64, seed: u64, threads: usize, body: F) -> CheckTally
where
    F: Fn(&mut rand_chacha::ChaCha8Rng, &mut CheckTally) + Sync,
{
    let s = salt(label);
    let r: Result<CheckTally, ()> =
        run_replicas(0, trials, threads, CheckTally::default, |r, acc| {
            let mut rng = rng_for(seed, s, r);
            acc.trials += 1;
            body(&mut rng, acc);
            Ok(())
        });
    r.expect("infallible")
}

/// `D(B_K(ρ_n(κ₁(w))), rescale(B_K(κ₁(w)), n)) = 0` exactly, over random
/// non-degenerate lattice path families with `1 <= K <= k_max`.
pub fn rescaling_identity(
    trials: u64,
    k_max: usize,
    dim: usize,
    ns: &[u64],
    seed: u64,
    threads: usize,
) -> CheckTally {
    tally("check-rescaling", trials, seed, threads, |rng, acc| loop {
        let k = rng.random_range(1..=k_max);
        let fam = random_lattice_family(k, dim, rng);
        let base: Vec<InterpolatedPath<Rational>> =
            fam.iter().map(|w| InterpolatedPath::kappa(w, 1)).collect();
        let g = match gst_of_paths(&base, 0.0) {
            Ok(g @ Gst::Tree(_)) => g,
            _ => {
                acc.skipped += 1;
                continue;
            }
        };
        for &n in ns {
            let scaled: Vec<_> = base.iter().map(|w| w.rho(n)).collect();
            let d = gst_of_paths(&scaled, 0.0).map(|lhs| big_d(&lhs, &g.rescale(n)));
            if d != Ok(0.0) {
                acc.fail(format!("K={k} n={n}: D = {d:?}"));
            }
        }
        break;
    })
}

fn random_rational_tree<R: Rng + ?Sized>(k: usize, rng: &mut R) -> ShapedTree<Rational> {
    let shape = random_shape(k, rng);
    let lengths: Vec<Rational> = (0..shape.num_vertices())
        .map(|_| Rational::new(rng.random_range(1..40), rng.random_range(1..9)))
        .collect();
    ShapedTree::from_lengths(shape, &lengths).expect("positive lengths")
}

/// Path-sum distance in `T(τ)` equals the `d_τ` formula for every pair of
/// vertices, in exact rationals, over random non-degenerate matrices.
pub fn metric_equality(trials: u64, k_max: usize, seed: u64, threads: usize) -> CheckTally {
    tally("check-metric", trials, seed, threads, |rng, acc| {
        let k = rng.random_range(1..=k_max);
        let t = random_rational_tree(k, rng);
        let tau = t.branch_matrix();
        let n = t.shape().num_vertices();
        for a in 0..n {
            for b in 0..n {
                match tree_metric(&tau, &t.point(a), &t.point(b)) {
                    Ok(d) if d == t.path_length(a, b) => {}
                    other => acc.fail(format!("{} vertices {a},{b}: {other:?}", t.to_text())),
                }
            }
        }
    })
}

/// Moving every vertex time by less than `δ₂` (one third of the smallest
/// gap between branch-matrix entries) keeps the labelled shape. Moves that
/// leave the set of branch matrices (a non-positive edge) are redrawn.
pub fn shape_stability(trials: u64, k_max: usize, seed: u64, threads: usize) -> CheckTally {
    tally("check-stability", trials, seed, threads, |rng, acc| {
        let k = rng.random_range(2..=k_max.max(2));
        let shape = random_shape(k, rng);
        let lengths: Vec<f64> = (0..shape.num_vertices())
            .map(|_| rng.random_range(0.05..2.0))
            .collect();
        let t = ShapedTree::from_lengths(shape.clone(), &lengths).expect("positive lengths");
        let tau = t.branch_matrix();
        let Some(d2) = tau.delta2(0.0) else {
            acc.skipped += 1;
            return;
        };
        let moved = loop {
            let times: Vec<f64> = t
                .times()
                .iter()
                .enumerate()
                .map(|(v, &x)| {
                    if v == 0 {
                        0.0
                    } else {
                        x + d2 * rng.random_range(-1.0..1.0) * (1.0 - 1e-9)
                    }
                })
                .collect();
            match ShapedTree::new(shape.clone(), times) {
                Ok(m) => break m,
                Err(_) => acc.skipped += 1,
            }
        };
        let tau2 = moved.branch_matrix();
        match build_shape(&tau2, crate::DEFAULT_TOLERANCE) {
            Ok(b) if b.tree().map(|x| x.shape()) == Some(&shape) => {}
            other => acc.fail(format!(
                "{}: {:?}",
                shape.to_text(),
                other.map(|b| b.tree().map(|x| x.shape().to_text()))
            )),
        }
    })
}

/// `D` is zero on the diagonal, symmetric and satisfies the triangle
/// inequality on random embeddings of a common random shape.
pub fn d_metric_axioms(trials: u64, k_max: usize, seed: u64, threads: usize) -> CheckTally {
    tally("check-axioms", trials, seed, threads, |rng, acc| {
        let k = rng.random_range(1..=k_max);
        let shape = random_shape(k, rng);
        let mk = |rng: &mut rand_chacha::ChaCha8Rng| {
            let lengths: Vec<f64> = (0..shape.num_vertices())
                .map(|_| rng.random_range(0.5..2.0))
                .collect();
            Gst::Tree(random_embedding(
                &ShapedTree::from_lengths(shape.clone(), &lengths).unwrap(),
                rng,
            ))
        };
        let (a, b, c) = (mk(rng), mk(rng), mk(rng));
        let (ab, ba, bc, ac) = (big_d(&a, &b), big_d(&b, &a), big_d(&b, &c), big_d(&a, &c));
        if big_d(&a, &a) != 0.0 || (ab - ba).abs() > 1e-12 || ac > ab + bc + 1e-12 {
            acc.fail(format!(
                "K={k}: D(a,b)={ab} D(b,a)={ba} D(b,c)={bc} D(a,c)={ac}"
            ));
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_batches_pass_and_are_thread_independent() {
        let a = rescaling_identity(40, 5, 2, &[1, 2, 7, 100], 3, 1);
        assert!(a.passed(), "{a:?}");
        assert_eq!(a, rescaling_identity(40, 5, 2, &[1, 2, 7, 100], 3, 2));
        assert!(metric_equality(40, 6, 3, 1).passed());
        let s = shape_stability(200, 6, 3, 1);
        assert!(s.passed(), "{s:?}");
        assert!(d_metric_axioms(40, 4, 3, 1).passed());
    }
}
