//! Deterministic derivation of independent random sub-streams from one
//! master seed.
//!
//! Every stream seed is a SplitMix64 hash chain over `(master, domain, keys..)`,
//! so a stream depends only on its own coordinates: adding a client or a
//! replication never shifts the sequences of the others.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::model::ClientId;

/// Stream domains. Distinct domains never share a seed derivation path.
pub mod domain {
    pub const ARRIVALS: u64 = 0x4152_5249_5641_4c53;
    pub const DELIVERY: u64 = 0x4445_4c49_5645_5259;
    pub const REPLICATION: u64 = 0x5245_504c_4943_4154;
    pub const INSTANCE: u64 = 0x494e_5354_414e_4345;
}

/// One SplitMix64 output step applied to `x`.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Folds `keys` into `master` under `domain`.
pub fn derive_seed(master: u64, domain: u64, keys: &[u64]) -> u64 {
    let mut h = splitmix64(master ^ splitmix64(domain));
    for &k in keys {
        h = splitmix64(h ^ splitmix64(k.wrapping_add(0x632b_e59b_d9b4_e019)));
    }
    h
}

pub fn client_stream(master: u64, domain: u64, id: ClientId) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(
        master,
        domain,
        &[id.operator as u64, id.region as u64, id.client as u64],
    ))
}
