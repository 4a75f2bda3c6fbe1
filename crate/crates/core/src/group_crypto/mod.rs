//! Prime-order subgroup of `Z_p^*` and ElGamal over it.
//!
//! The modulus `p` and the subgroup order `q` are kept apart: `p = 2q + 1` is
//! a safe prime and `g` generates the quadratic residues, which form the
//! subgroup of order `q`. Integer payloads are carried in the exponent as
//! `g^x`, so ElGamal is multiplicatively homomorphic on them and raising a
//! ciphertext to a scalar power scales the exponent.

pub mod prime;

use num_bigint::{BigInt, BigUint, RandBigInt};
use num_integer::Integer;
use num_traits::{One, Zero};
use rand::RngCore;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::decimal::biguint_str;

/// Smallest accepted modulus width.
pub const MIN_BITS: u64 = 16;
/// Width used by the test group.
pub const TEST_BITS: u64 = 64;
/// Width of the production profile.
pub const PRODUCTION_BITS: u64 = 1024;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GroupError {
    #[error("modulus width {0} is below the minimum of {MIN_BITS} bits")]
    InvalidBitLength(u64),
    #[error("invalid group parameters: {0}")]
    InvalidParams(&'static str),
    #[error("message is not a member of the order-q subgroup")]
    MessageNotInSubgroup,
    #[error("ciphertext component is not a member of the order-q subgroup")]
    InvalidCiphertext,
    #[error("operands do not belong to the supplied group")]
    ParamsMismatch,
    #[error("cannot aggregate an empty participant set")]
    EmptyParticipantSet,
    #[error("secret exponent must lie in [1, q-1]")]
    InvalidSecret,
}

/// `(p, q, g)` with `p` prime, `q` prime, `q | p - 1` and `g` of order `q`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawGroupParams")]
pub struct GroupParams {
    #[serde(with = "biguint_str")]
    p: BigUint,
    #[serde(with = "biguint_str")]
    q: BigUint,
    #[serde(with = "biguint_str")]
    g: BigUint,
}

#[derive(Deserialize)]
struct RawGroupParams {
    #[serde(with = "biguint_str")]
    p: BigUint,
    #[serde(with = "biguint_str")]
    q: BigUint,
    #[serde(with = "biguint_str")]
    g: BigUint,
}

impl TryFrom<RawGroupParams> for GroupParams {
    type Error = GroupError;

    fn try_from(raw: RawGroupParams) -> Result<Self, Self::Error> {
        GroupParams::new(raw.p, raw.q, raw.g)
    }
}

impl GroupParams {
    /// Validates and builds parameters.
    pub fn new(p: BigUint, q: BigUint, g: BigUint) -> Result<Self, GroupError> {
        // Fixed seed: validation must not depend on ambient randomness.
        let mut rng = crate::seeded_rng(0x5eed);
        if !prime::is_probable_prime(&p, &mut rng) {
            return Err(GroupError::InvalidParams("p is not prime"));
        }
        if !prime::is_probable_prime(&q, &mut rng) {
            return Err(GroupError::InvalidParams("q is not prime"));
        }
        if !(&p - 1u32).is_multiple_of(&q) {
            return Err(GroupError::InvalidParams("q does not divide p - 1"));
        }
        if g.is_zero() || g.is_one() || g >= p {
            return Err(GroupError::InvalidParams("g must lie in [2, p-1]"));
        }
        if !g.modpow(&q, &p).is_one() {
            return Err(GroupError::InvalidParams("g does not have order q"));
        }
        Ok(Self { p, q, g })
    }

    /// Searches for a safe prime of `bits` bits and a generator of its
    /// quadratic-residue subgroup. Deterministic for a given generator state.
    pub fn generate<R: RngCore + ?Sized>(bits: u64, rng: &mut R) -> Result<Self, GroupError> {
        if bits < MIN_BITS {
            return Err(GroupError::InvalidBitLength(bits));
        }
        let (p, q) = prime::random_safe_prime(bits, rng);
        let p_minus_one = &p - 1u32;
        loop {
            let h = rng.gen_biguint_range(&BigUint::from(2u8), &p_minus_one);
            let g = h.modpow(&BigUint::from(2u8), &p);
            if !g.is_one() {
                return Ok(Self { p, q, g });
            }
        }
    }

    /// The textbook group `p = 23, q = 11, g = 4`.
    pub fn toy() -> Self {
        Self::new(23u32.into(), 11u32.into(), 4u32.into()).expect("toy group is valid")
    }

    /// 64-bit group derived from a fixed seed; used throughout the tests.
    pub fn test_group() -> Self {
        Self::generate(TEST_BITS, &mut crate::seeded_rng(0x7e57_6709)).expect("64 bits is valid")
    }

    pub fn p(&self) -> &BigUint {
        &self.p
    }

    pub fn q(&self) -> &BigUint {
        &self.q
    }

    pub fn g(&self) -> &BigUint {
        &self.g
    }

    /// `x` lies in `[1, p-1]` and `x^q = 1`.
    pub fn is_member(&self, x: &BigUint) -> bool {
        !x.is_zero() && x < &self.p && x.modpow(&self.q, &self.p).is_one()
    }

    pub fn pow(&self, base: &BigUint, exp: &BigUint) -> BigUint {
        base.modpow(exp, &self.p)
    }

    /// `g^exp`.
    pub fn exp_g(&self, exp: &BigUint) -> BigUint {
        self.g.modpow(exp, &self.p)
    }

    pub fn mul(&self, a: &BigUint, b: &BigUint) -> BigUint {
        (a * b) % &self.p
    }

    /// Multiplicative inverse modulo the prime `p`.
    pub fn inv(&self, a: &BigUint) -> BigUint {
        a.modpow(&(&self.p - 2u32), &self.p)
    }

    /// `a / b` in the group.
    pub fn div(&self, a: &BigUint, b: &BigUint) -> BigUint {
        self.mul(a, &self.inv(b))
    }

    /// Reduces a signed integer into `[0, q-1]`.
    pub fn reduce_exponent(&self, x: &BigInt) -> BigUint {
        let q = BigInt::from(self.q.clone());
        let r = x.mod_floor(&q);
        r.to_biguint().expect("mod_floor is non-negative")
    }

    /// Exponent encoding of an integer payload: `g^(x mod q)`.
    pub fn encode(&self, x: &BigInt) -> BigUint {
        self.exp_g(&self.reduce_exponent(x))
    }

    /// Uniform scalar in `[1, q-1]`.
    pub fn random_scalar<R: RngCore + ?Sized>(&self, rng: &mut R) -> BigUint {
        rng.gen_biguint_range(&BigUint::one(), &self.q)
    }
}

/// ElGamal secret/public pair: `pk = g^sk`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeyPair {
    #[serde(with = "biguint_str")]
    pub sk: BigUint,
    #[serde(with = "biguint_str")]
    pub pk: BigUint,
}

impl KeyPair {
    pub fn from_secret(params: &GroupParams, sk: BigUint) -> Result<Self, GroupError> {
        if sk.is_zero() || &sk >= params.q() {
            return Err(GroupError::InvalidSecret);
        }
        let pk = params.exp_g(&sk);
        Ok(Self { sk, pk })
    }
}

pub fn keygen<R: RngCore + ?Sized>(params: &GroupParams, rng: &mut R) -> KeyPair {
    let sk = params.random_scalar(rng);
    KeyPair::from_secret(params, sk).expect("random scalar is in range")
}

/// ElGamal ciphertext `(c, d) = (g^r, pk^r * m)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Ciphertext {
    #[serde(with = "biguint_str")]
    pub c: BigUint,
    #[serde(with = "biguint_str")]
    pub d: BigUint,
}

impl Ciphertext {
    /// Encryption of the identity with zero randomness.
    pub fn identity() -> Self {
        Self { c: BigUint::one(), d: BigUint::one() }
    }

    fn check(&self, params: &GroupParams) -> bool {
        params.is_member(&self.c) && params.is_member(&self.d)
    }
}

/// Encrypts `m` with fresh randomness `r` in `[1, q-1]`.
pub fn encrypt<R: RngCore + ?Sized>(
    params: &GroupParams,
    pk: &BigUint,
    m: &BigUint,
    rng: &mut R,
) -> Result<Ciphertext, GroupError> {
    let r = params.random_scalar(rng);
    encrypt_with_randomness(params, pk, m, &r)
}

/// Encrypts `m` with caller-chosen randomness; `r` is reduced mod `q`.
pub fn encrypt_with_randomness(
    params: &GroupParams,
    pk: &BigUint,
    m: &BigUint,
    r: &BigUint,
) -> Result<Ciphertext, GroupError> {
    if !params.is_member(m) {
        return Err(GroupError::MessageNotInSubgroup);
    }
    if !params.is_member(pk) {
        return Err(GroupError::ParamsMismatch);
    }
    let r = r % params.q();
    Ok(Ciphertext {
        c: params.exp_g(&r),
        d: params.mul(&params.pow(pk, &r), m),
    })
}

/// `m = d / c^sk`.
pub fn decrypt(params: &GroupParams, sk: &BigUint, ct: &Ciphertext) -> Result<BigUint, GroupError> {
    if !ct.check(params) {
        return Err(GroupError::InvalidCiphertext);
    }
    let shared = params.pow(&ct.c, sk);
    Ok(params.div(&ct.d, &shared))
}

/// Component-wise product; decrypts to `m1 * m2`.
pub fn hom_mul(params: &GroupParams, a: &Ciphertext, b: &Ciphertext) -> Result<Ciphertext, GroupError> {
    if !a.check(params) || !b.check(params) {
        return Err(GroupError::ParamsMismatch);
    }
    Ok(Ciphertext {
        c: params.mul(&a.c, &b.c),
        d: params.mul(&a.d, &b.d),
    })
}

/// Component-wise power; decrypts to `m^k`. Negative `k` is reduced mod `q`.
pub fn hom_scalar(params: &GroupParams, ct: &Ciphertext, k: &BigInt) -> Result<Ciphertext, GroupError> {
    if !ct.check(params) {
        return Err(GroupError::ParamsMismatch);
    }
    let k = params.reduce_exponent(k);
    Ok(Ciphertext {
        c: params.pow(&ct.c, &k),
        d: params.pow(&ct.d, &k),
    })
}

/// Product of the participants' public keys.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CollectiveKey {
    #[serde(with = "biguint_str")]
    pub pk_agg: BigUint,
    pub participant_count: usize,
}

pub fn aggregate_keys(params: &GroupParams, partials: &[BigUint]) -> Result<CollectiveKey, GroupError> {
    if partials.is_empty() {
        return Err(GroupError::EmptyParticipantSet);
    }
    if !partials.iter().all(|pk| params.is_member(pk)) {
        return Err(GroupError::ParamsMismatch);
    }
    let pk_agg = partials.iter().fold(BigUint::one(), |acc, pk| params.mul(&acc, pk));
    Ok(CollectiveKey { pk_agg, participant_count: partials.len() })
}

/// Removes one participant's share of the mask: `(c, d / c^sk_i)`.
///
/// Once every participant has stripped their share, `d` is the plaintext.
pub fn partial_decrypt(params: &GroupParams, sk_i: &BigUint, ct: &Ciphertext) -> Result<Ciphertext, GroupError> {
    if !ct.check(params) {
        return Err(GroupError::InvalidCiphertext);
    }
    Ok(Ciphertext {
        c: ct.c.clone(),
        d: params.div(&ct.d, &params.pow(&ct.c, sk_i)),
    })
}

/// Group parameters plus a public key, as exchanged in files.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PublicKeyDocument {
    #[serde(flatten)]
    pub params: GroupParams,
    #[serde(with = "biguint_str")]
    pub pk: BigUint,
}

impl PublicKeyDocument {
    pub fn validate(&self) -> Result<(), GroupError> {
        if self.params.is_member(&self.pk) {
            Ok(())
        } else {
            Err(GroupError::ParamsMismatch)
        }
    }
}

/// Public key document plus the secret, for local key files.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SecretKeyDocument {
    #[serde(flatten)]
    pub public: PublicKeyDocument,
    #[serde(with = "biguint_str")]
    pub sk: BigUint,
}

/// Exponent of `x` when small; `None` beyond `bound`. Test and demo helper
/// for reading back exponent-encoded payloads.
pub fn small_discrete_log(params: &GroupParams, x: &BigUint, bound: u64) -> Option<u64> {
    let mut acc = BigUint::one();
    for e in 0..=bound {
        if &acc == x {
            return Some(e);
        }
        acc = params.mul(&acc, params.g());
    }
    None
}

/// Sign-aware helper: `g^x` for a signed exponent.
pub fn encode_signed(params: &GroupParams, x: i64) -> BigUint {
    params.encode(&BigInt::from(x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeded_rng;

    fn toy_keys() -> (GroupParams, KeyPair) {
        let params = GroupParams::toy();
        let keys = KeyPair::from_secret(&params, 3u32.into()).unwrap();
        (params, keys)
    }

    fn modexp_oracle(b: u64, e: u64, m: u64) -> u64 {
        (0..e).fold(1, |acc, _| acc * b % m)
    }

    #[test]
    fn toy_keygen_matches_direct_exponentiation() {
        let (_, keys) = toy_keys();
        assert_eq!(keys.pk, BigUint::from(modexp_oracle(4, 3, 23)));
        assert_eq!(keys.pk, BigUint::from(18u32));
    }

    #[test]
    fn smallest_secret_gives_generator() {
        let params = GroupParams::toy();
        let keys = KeyPair::from_secret(&params, BigUint::one()).unwrap();
        assert_eq!(&keys.pk, params.g());
        assert_eq!(KeyPair::from_secret(&params, BigUint::zero()), Err(GroupError::InvalidSecret));
        assert_eq!(KeyPair::from_secret(&params, 11u32.into()), Err(GroupError::InvalidSecret));
    }

    #[test]
    fn different_seeds_give_different_keys() {
        let params = GroupParams::test_group();
        let a = keygen(&params, &mut seeded_rng(1));
        let b = keygen(&params, &mut seeded_rng(2));
        assert_ne!(a.sk, b.sk);
    }

    #[test]
    fn toy_encrypt_and_decrypt() {
        let (params, keys) = toy_keys();
        let ct = encrypt_with_randomness(&params, &keys.pk, &16u32.into(), &2u32.into()).unwrap();
        // c = 4^2 = 16; d = 18^2 * 16 = 324 * 16 mod 23 = 2 * 16 mod 23 = 9
        assert_eq!(ct, Ciphertext { c: 16u32.into(), d: 9u32.into() });
        // 16^3 mod 23 = 2, inverse of 2 is 12, 9 * 12 mod 23 = 16
        assert_eq!(decrypt(&params, &keys.sk, &ct).unwrap(), BigUint::from(16u32));
    }

    #[test]
    fn degenerate_zero_randomness() {
        let (params, keys) = toy_keys();
        let ct = Ciphertext { c: BigUint::one(), d: 13u32.into() };
        assert_eq!(decrypt(&params, &keys.sk, &ct).unwrap(), BigUint::from(13u32));
        let ct = encrypt_with_randomness(&params, &keys.pk, &BigUint::one(), &5u32.into()).unwrap();
        assert_eq!(decrypt(&params, &keys.sk, &ct).unwrap(), BigUint::one());
    }

    #[test]
    fn rejects_non_members() {
        let (params, keys) = toy_keys();
        // 5 is a non-residue mod 23
        assert_eq!(
            encrypt(&params, &keys.pk, &5u32.into(), &mut seeded_rng(0)),
            Err(GroupError::MessageNotInSubgroup)
        );
        let bad = Ciphertext { c: 5u32.into(), d: 1u32.into() };
        assert_eq!(decrypt(&params, &keys.sk, &bad), Err(GroupError::InvalidCiphertext));
        let good = encrypt(&params, &keys.pk, &16u32.into(), &mut seeded_rng(0)).unwrap();
        assert_eq!(hom_mul(&params, &good, &bad), Err(GroupError::ParamsMismatch));
    }

    #[test]
    fn randomized_encryption_differs() {
        let params = GroupParams::test_group();
        let mut rng = seeded_rng(9);
        let keys = keygen(&params, &mut rng);
        let m = params.encode(&BigInt::from(42));
        let a = encrypt(&params, &keys.pk, &m, &mut rng).unwrap();
        let b = encrypt(&params, &keys.pk, &m, &mut rng).unwrap();
        assert_ne!(a, b);
        assert_eq!(decrypt(&params, &keys.sk, &a).unwrap(), m);
        assert_eq!(decrypt(&params, &keys.sk, &b).unwrap(), m);
    }

    #[test]
    fn toy_hom_mul() {
        let (params, keys) = toy_keys();
        let mut rng = seeded_rng(4);
        let a = encrypt(&params, &keys.pk, &16u32.into(), &mut rng).unwrap();
        let b = encrypt(&params, &keys.pk, &16u32.into(), &mut rng).unwrap();
        let prod = hom_mul(&params, &a, &b).unwrap();
        assert_eq!(decrypt(&params, &keys.sk, &prod).unwrap(), BigUint::from(256u32 % 23));
        let one = encrypt(&params, &keys.pk, &BigUint::one(), &mut rng).unwrap();
        let same = hom_mul(&params, &a, &one).unwrap();
        assert_eq!(decrypt(&params, &keys.sk, &same).unwrap(), BigUint::from(16u32));
    }

    #[test]
    fn hom_scalar_scales_exponent() {
        let params = GroupParams::test_group();
        let mut rng = seeded_rng(5);
        let keys = keygen(&params, &mut rng);
        for _ in 0..50 {
            let x = params.random_scalar(&mut rng);
            let a = BigInt::from(params.random_scalar(&mut rng));
            let ct = encrypt(&params, &keys.pk, &params.exp_g(&x), &mut rng).unwrap();
            let scaled = hom_scalar(&params, &ct, &a).unwrap();
            let expected = params.exp_g(&((&x * a.to_biguint().unwrap()) % params.q()));
            assert_eq!(decrypt(&params, &keys.sk, &scaled).unwrap(), expected);
        }
        let ct = encrypt(&params, &keys.pk, &params.encode(&BigInt::from(3)), &mut rng).unwrap();
        let neg = hom_scalar(&params, &ct, &BigInt::from(-2)).unwrap();
        assert_eq!(decrypt(&params, &keys.sk, &neg).unwrap(), encode_signed(&params, -6));
    }

    #[test]
    fn aggregate_two_keys_adds_exponents() {
        let params = GroupParams::test_group();
        let mut rng = seeded_rng(6);
        let a = keygen(&params, &mut rng);
        let b = keygen(&params, &mut rng);
        let agg = aggregate_keys(&params, &[a.pk.clone(), b.pk.clone()]).unwrap();
        assert_eq!(agg.pk_agg, params.exp_g(&((&a.sk + &b.sk) % params.q())));
        assert_eq!(agg.participant_count, 2);
        let single = aggregate_keys(&params, std::slice::from_ref(&a.pk)).unwrap();
        assert_eq!(single.pk_agg, a.pk);
        assert_eq!(aggregate_keys(&params, &[]), Err(GroupError::EmptyParticipantSet));
    }

    #[test]
    fn collective_decryption_needs_everyone() {
        let params = GroupParams::test_group();
        let mut rng = seeded_rng(7);
        let parties: Vec<KeyPair> = (0..3).map(|_| keygen(&params, &mut rng)).collect();
        let pks: Vec<BigUint> = parties.iter().map(|k| k.pk.clone()).collect();
        let agg = aggregate_keys(&params, &pks).unwrap();
        let m = params.encode(&BigInt::from(1234));
        let ct = encrypt(&params, &agg.pk_agg, &m, &mut rng).unwrap();

        let mut all = ct.clone();
        for party in &parties {
            all = partial_decrypt(&params, &party.sk, &all).unwrap();
        }
        assert_eq!(all.d, m);

        // Sum-of-secrets oracle.
        let sum = parties.iter().fold(BigUint::zero(), |acc, k| (acc + &k.sk) % params.q());
        assert_eq!(decrypt(&params, &sum, &ct).unwrap(), m);

        // Every strict subset leaves a mask in place.
        for mask in 0u32..7 {
            let mut partial = ct.clone();
            for (i, party) in parties.iter().enumerate() {
                if mask & (1 << i) != 0 {
                    partial = partial_decrypt(&params, &party.sk, &partial).unwrap();
                }
            }
            assert_ne!(partial.d, m, "subset {mask:03b} must not decrypt");
        }
    }

    #[test]
    fn generated_groups_are_valid() {
        let mut rng = seeded_rng(8);
        for bits in [16u64, 20, 32, 64] {
            let params = GroupParams::generate(bits, &mut rng).unwrap();
            assert_eq!(params.p().bits(), bits);
            assert!(params.g().modpow(params.q(), params.p()).is_one());
            assert!(!params.g().is_one());
            assert_eq!(params.p(), &((params.q() << 1u32) + 1u32));
        }
        assert_eq!(GroupParams::generate(15, &mut rng), Err(GroupError::InvalidBitLength(15)));
    }

    #[test]
    fn generation_is_deterministic_per_seed() {
        let a = GroupParams::generate(48, &mut seeded_rng(11)).unwrap();
        let b = GroupParams::generate(48, &mut seeded_rng(11)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn sixteen_bit_group_passes_trial_division() {
        let params = GroupParams::generate(16, &mut seeded_rng(12)).unwrap();
        let p: u64 = params.p().try_into().unwrap();
        assert!((2..p).take_while(|d| d * d <= p).all(|d| !p.is_multiple_of(d)));
    }

    #[test]
    fn rejects_bad_params() {
        assert!(GroupParams::new(22u32.into(), 11u32.into(), 4u32.into()).is_err());
        assert!(GroupParams::new(23u32.into(), 7u32.into(), 4u32.into()).is_err());
        assert!(GroupParams::new(23u32.into(), 11u32.into(), 5u32.into()).is_err());
        assert!(GroupParams::new(23u32.into(), 11u32.into(), 1u32.into()).is_err());
    }

    #[test]
    fn documents_round_trip_as_decimal_strings() {
        let (params, keys) = toy_keys();
        let doc = PublicKeyDocument { params, pk: keys.pk };
        let json = serde_json::to_string(&doc).unwrap();
        assert_eq!(json, r#"{"p":"23","q":"11","g":"4","pk":"18"}"#);
        let back: PublicKeyDocument = serde_json::from_str(&json).unwrap();
        assert_eq!(back, doc);
        let ct = Ciphertext { c: 16u32.into(), d: 9u32.into() };
        assert_eq!(serde_json::to_string(&ct).unwrap(), r#"{"c":"16","d":"9"}"#);
        assert!(serde_json::from_str::<GroupParams>(r#"{"p":"22","q":"11","g":"4"}"#).is_err());
    }

    #[test]
    fn small_discrete_log_reads_back_exponents() {
        let params = GroupParams::test_group();
        let x = params.encode(&BigInt::from(17));
        assert_eq!(small_discrete_log(&params, &x, 100), Some(17));
        assert_eq!(small_discrete_log(&params, &x, 10), None);
    }
}
