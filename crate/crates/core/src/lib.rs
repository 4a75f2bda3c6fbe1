//! Algorithmic core of a biometric-authenticated network.
//!
//! The crate is organised by subsystem:
//!
//! - [`group_crypto`]: prime-order subgroup arithmetic and ElGamal with its
//!   homomorphisms and collective keys.
//! - [`zkp_linear`]: Feldman commitments, encrypted linear aggregation and the
//!   Chaum-Pedersen discrete-log-equality proof.
//! - [`lwe_he`]: ring-LWE homomorphic encryption and inner-product packing.
//! - [`biometrics`]: cosine matching, quantization, encrypted matching, CNN
//!   shape arithmetic and modality scoring.
//! - [`fath`]: proportional mint/burn rebalancing driven by period fees.
//! - [`fees`]: cost-based transaction fee pricing.
//! - [`vortex`]: the DAO governance state machine.
//! - [`slashing`]: perpetrations, blacklist ladder and enforcement.
//! - [`netsim`]: deterministic simulation tying everything together.
//!
//! Real-valued code is generic over the scalar type; see [`scalar`] and the
//! aliases re-exported here.

pub mod biometrics;
pub mod decimal;
pub mod fath;
pub mod fees;
pub mod group_crypto;
pub mod lwe_he;
pub mod netsim;
pub mod scalar;
pub mod slashing;
pub mod time;
pub mod vortex;
pub mod zkp_linear;

use num_rational::BigRational;

pub use scalar::Scalar;

/// Exact rational used for ratios and exact fee pricing.
pub type Rational = BigRational;

/// Feature vector over `f64`, the default matching precision.
pub type FeatureVector64 = biometrics::FeatureVector<f64>;
/// Feature vector over `f32`.
pub type FeatureVector32 = biometrics::FeatureVector<f32>;

/// Price quote with exact decimal arithmetic (used by the CLI and golden files).
pub type ExactQuote = fees::PriceQuote<Rational>;
/// Price quote over `f64`.
pub type QuoteF64 = fees::PriceQuote<f64>;

/// Identifier of a human node.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize, serde::Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub u32);

impl std::fmt::Display for NodeId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "node-{}", self.0)
    }
}

/// Seeded generator used for every randomized operation.
pub type SeededRng = rand_chacha::ChaCha20Rng;

/// Builds the crate's deterministic generator from a 64-bit seed.
pub fn seeded_rng(seed: u64) -> SeededRng {
    use rand::SeedableRng;
    SeededRng::seed_from_u64(seed)
}
