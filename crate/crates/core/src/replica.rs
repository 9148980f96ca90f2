//! Seeded random streams and deterministic parallel replica loops.
//!
//! Replica `r` of an experiment always draws from the ChaCha8 stream
//! `(seed, salt, r)`. Replicas are processed in fixed-size chunks whose
//! accumulators are merged in chunk order, so results do not depend on the
//! number of worker threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Replicas per work unit.
pub const CHUNK: u64 = 64;

/// Stream for replica `stream` of the experiment labelled by `salt`.
pub fn rng_for(seed: u64, salt: u64, stream: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&salt.to_le_bytes());
    key[16..24].copy_from_slice(b"genskel!");
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(stream);
    rng
}

/// 64-bit FNV-1a hash of a label.
pub fn salt(label: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Accumulators that can absorb another accumulator of the same kind.
pub trait Merge {
    fn merge(&mut self, other: Self);
}

impl<T: Merge> Merge for Vec<T> {
    fn merge(&mut self, other: Self) {
        assert_eq!(
            self.len(),
            other.len(),
            "merging accumulators of different shape"
        );
        for (a, b) in self.iter_mut().zip(other) {
            a.merge(b);
        }
    }
}

impl<A: Merge, B: Merge> Merge for (A, B) {
    fn merge(&mut self, other: Self) {
        self.0.merge(other.0);
        self.1.merge(other.1);
    }
}

impl<A: Merge, B: Merge, C: Merge> Merge for (A, B, C) {
    fn merge(&mut self, other: Self) {
        self.0.merge(other.0);
        self.1.merge(other.1);
        self.2.merge(other.2);
    }
}

/// Runs `body(r, &mut acc)` for `r in start..start + count` on `threads`
/// workers (0 means all cores) and merges chunk accumulators in order.
pub fn run_replicas<A, E, I, F>(
    start: u64,
    count: u64,
    threads: usize,
    init: I,
    body: F,
) -> Result<A, E>
where
    A: Merge + Send,
    E: Send,
    I: Fn() -> A + Sync,
    F: Fn(u64, &mut A) -> Result<(), E> + Sync,
{
    use rayon::prelude::*;
    let chunks = count.div_ceil(CHUNK);
    let work = || {
        (0..chunks)
            .into_par_iter()
            .map(|c| {
                let mut acc = init();
                let lo = start + c * CHUNK;
                let hi = (lo + CHUNK).min(start + count);
                for r in lo..hi {
                    body(r, &mut acc)?;
                }
                Ok(acc)
            })
            .collect::<Vec<Result<A, E>>>()
    };
    let parts = match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
        Ok(pool) => pool.install(work),
        Err(_) => work(),
    };
    let mut total = init();
    for part in parts {
        total.merge(part?);
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[derive(Default)]
    struct Sum(Vec<u64>);
    impl Merge for Sum {
        fn merge(&mut self, other: Self) {
            self.0.extend(other.0);
        }
    }

    #[test]
    fn thread_count_does_not_change_results() {
        let run = |threads| {
            run_replicas::<_, (), _, _>(0, 1000, threads, Sum::default, |r, acc| {
                acc.0.push(rng_for(7, salt("x"), r).random::<u64>());
                Ok(())
            })
            .unwrap()
            .0
        };
        assert_eq!(run(1), run(3));
    }

    #[test]
    fn streams_differ() {
        let a: u64 = rng_for(1, 2, 0).random();
        let b: u64 = rng_for(1, 2, 1).random();
        let c: u64 = rng_for(1, 3, 0).random();
        assert_ne!(a, b);
        assert_ne!(a, c);
    }
}
