//! Seeded fixtures shared by the criterion benchmarks.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use waylab_core::random::{haar_unitary, random_channel, random_conservative_scenario, ConservativeScenario};
use waylab_core::{OperationMap, Operator, Tolerance};

pub const SEED: u64 = 0xBE7C;

pub fn rng(salt: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(SEED ^ salt)
}

/// Random Hermitian operator `(U + U†)/2` of dimension `d`.
pub fn hermitian(d: usize) -> Operator {
    let u = haar_unitary(d, &mut rng(d as u64));
    (&u + u.adjoint()) * waylab_core::opcore::c(0.5, 0.0)
}

/// Random channel on `C^d` with `n_kraus` Kraus operators.
pub fn channel(d: usize, n_kraus: usize) -> OperationMap {
    random_channel(d, d, n_kraus, &mut rng(100 + d as u64), &Tolerance::default()).expect("valid fixture channel")
}

/// Conservative scenario on `C^ds ⊗ C^da` with a binary pointer.
pub fn scenario(ds: usize, da: usize) -> ConservativeScenario {
    random_conservative_scenario(ds, da, 2, &mut rng(200 + (ds * 8 + da) as u64), &Tolerance::default())
        .expect("valid fixture scenario")
}
