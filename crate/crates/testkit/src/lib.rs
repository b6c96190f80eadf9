//! Test support for the psm suites: seeded model generators, brute-force
//! oracles, scripted figure fixtures and a session fuzzer.

// `!(x <= tol)` is deliberate: a NaN must count as a failure.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod criteria;
pub mod fixtures;
pub mod fuzz;
pub mod gen;
pub mod oracle;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

pub fn seeded(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
