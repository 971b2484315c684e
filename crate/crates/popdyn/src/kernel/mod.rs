//! Shared machinery: random streams, Poisson point measures, path integrators.

pub mod constants;
pub mod feller;
pub mod ppm;
pub mod rng;
pub mod sde;
pub mod stable;

pub use constants::Tolerances;
pub use ppm::{sample_ppm, thin, MarkIntensity, PpmSample};
pub use rng::RngStream;
pub use sde::{integrate_jump_sde, CompensatedPart, Domain, JumpPart, JumpSdeSpec, Path};
pub use stable::{simulate_stable_symmetric, StableSpec};

use rayon::prelude::*;

/// Run `f` on replicates `0..n` in parallel; results come back in replicate order,
/// so any reduction over them is independent of thread scheduling.
pub fn replicate<T, F>(seed: u64, n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(RngStream) -> T + Sync + Send,
{
    (0..n as u64).into_par_iter().map(|i| f(RngStream::new(seed, i))).collect()
}
