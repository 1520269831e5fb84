//! Counter-based random streams.
//!
//! Each replicate, realization or simulation draws from its own ChaCha
//! stream selected by `(seed, domain, index)`, so results never depend on
//! the order in which work items run.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Binomial, Distribution};

pub type StreamRng = ChaCha12Rng;

/// Separates the stream spaces of different consumers of one seed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u8)]
pub enum Domain {
    Bootstrap = 1,
    Simulation = 2,
    Deviance = 3,
}

/// Stream for work item `index`, attempt `attempt` (redraws after failures).
pub fn substream(seed: u64, domain: Domain, index: u32, attempt: u32) -> StreamRng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let stream = ((domain as u64) << 56) | ((attempt as u64 & 0x00ff_ffff) << 32) | index as u64;
    rng.set_stream(stream);
    rng
}

/// One multinomial draw of `n` items over categories weighted by `weights`,
/// by conditional binomials in category order.
pub fn multinomial<R: Rng + ?Sized>(n: u64, weights: &[f64], rng: &mut R) -> Vec<u64> {
    let mut out = vec![0u64; weights.len()];
    let mut remaining_n = n;
    let mut remaining_w: f64 = weights.iter().sum();
    let last = weights.iter().rposition(|&w| w > 0.0);
    for (k, &w) in weights.iter().enumerate() {
        if remaining_n == 0 || w <= 0.0 {
            continue;
        }
        let draw = if Some(k) == last {
            remaining_n
        } else {
            let p = (w / remaining_w).clamp(0.0, 1.0);
            Binomial::new(remaining_n, p)
                .expect("probability in [0, 1]")
                .sample(rng)
        };
        out[k] = draw;
        remaining_n -= draw;
        remaining_w -= w;
    }
    out
}
