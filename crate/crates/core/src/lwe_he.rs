//! Ring-LWE public-key encryption over `R_q = Z_q[x]/(x^d + 1)` with
//! homomorphic addition and one level of multiplication.
//!
//! Plaintexts live in `R_t`. A ciphertext is a list of ring elements
//! `(c_0, ..., c_r)` and decrypts as `[sum c_i s^i]_q mod t`, so products are
//! plain convolutions of the part lists and no relinearization is needed.
//! Polynomial products are schoolbook.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigUint;
use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::group_crypto::prime::is_probable_prime;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LweError {
    #[error("invalid parameters: {0}")]
    InvalidParams(&'static str),
    #[error("plaintext coefficient {value} at index {index} is outside [0, {t})")]
    PlaintextOutOfRange { index: usize, value: u64, t: u64 },
    #[error("ring element has {got} coefficients, expected {expected}")]
    WrongLength { got: usize, expected: usize },
    #[error("ciphertexts were produced under different parameters")]
    ParamsMismatch,
    #[error("vector of length {len} does not fit: need len <= {max}")]
    VectorTooLong { len: usize, max: usize },
    #[error("bit vectors differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("bit vector entries must be 0 or 1")]
    NotABit,
    #[error("unknown parameter profile {0:?}")]
    UnknownProfile(String),
}

/// Named parameter sets.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LweProfile {
    /// d = 16, q = 65537, t = 17. Fresh encryption and addition only.
    TestSmall,
    /// d = 16, 40-bit q, t = 17. Enough headroom for one multiplication.
    TestExhaustive,
    /// d = 64, 60-bit q, t = 257.
    Default,
}

impl LweProfile {
    pub const ALL: [LweProfile; 3] = [LweProfile::TestSmall, LweProfile::TestExhaustive, LweProfile::Default];

    pub fn name(self) -> &'static str {
        match self {
            LweProfile::TestSmall => "test-small",
            LweProfile::TestExhaustive => "test-exhaustive",
            LweProfile::Default => "default",
        }
    }

    /// False for profiles whose noise budget is spent after one addition.
    pub fn supports_multiplication(self) -> bool {
        self != LweProfile::TestSmall
    }

    pub fn params(self) -> LweParams {
        let (d, q, t) = match self {
            LweProfile::TestSmall => (16, 65_537, 17),
            LweProfile::TestExhaustive => (16, Q40, 17),
            LweProfile::Default => (64, Q60, 257),
        };
        LweParams::new(d, q, t, 3.0).expect("built-in profile is valid")
    }
}

impl fmt::Display for LweProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LweProfile {
    type Err = LweError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        LweProfile::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| LweError::UnknownProfile(s.to_string()))
    }
}

/// 40-bit prime, `1 mod 32`.
pub const Q40: u64 = 1_099_511_627_297;
/// 60-bit prime, `1 mod 128`.
pub const Q60: u64 = 1_152_921_504_606_844_417;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LweParams {
    d: usize,
    q: u64,
    t: u64,
    sigma: f64,
}

impl LweParams {
    /// `q` must be a prime below `2^62` so that a full negacyclic product
    /// accumulates in `u128` without overflow.
    pub fn new(d: usize, q: u64, t: u64, sigma: f64) -> Result<Self, LweError> {
        if d == 0 || !d.is_power_of_two() {
            return Err(LweError::InvalidParams("d must be a power of two"));
        }
        if t < 2 || t >= q {
            return Err(LweError::InvalidParams("need 2 <= t < q"));
        }
        if q >= 1 << 62 {
            return Err(LweError::InvalidParams("q must be below 2^62"));
        }
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(LweError::InvalidParams("sigma must be positive"));
        }
        // Deterministic for 64-bit inputs, so the generator never matters.
        let mut rng = crate::seeded_rng(0);
        if !is_probable_prime(&BigUint::from(q), &mut rng) {
            return Err(LweError::InvalidParams("q must be prime"));
        }
        Ok(Self { d, q, t, sigma })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn q(&self) -> u64 {
        self.q
    }

    pub fn t(&self) -> u64 {
        self.t
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Largest bit-vector length usable with inner-product packing.
    pub fn max_packed_len(&self) -> usize {
        self.d / 2
    }

    /// Samples below `6 sigma` in absolute value are accepted.
    pub fn gaussian_bound(&self) -> i64 {
        (6.0 * self.sigma).ceil() as i64
    }
}

/// Coefficient vector of length `d`, canonical residues in `[0, modulus)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RingElement {
    #[serde(with = "u64_vec_str")]
    pub coeffs: Vec<u64>,
}

impl RingElement {
    pub fn zero(d: usize) -> Self {
        Self { coeffs: vec![0; d] }
    }

    /// Constant polynomial `c`.
    pub fn constant(d: usize, c: u64) -> Self {
        let mut coeffs = vec![0; d];
        coeffs[0] = c;
        Self { coeffs }
    }

    pub fn from_coeffs(coeffs: Vec<u64>) -> Self {
        Self { coeffs }
    }

    /// Reduces signed coefficients into `[0, modulus)`.
    pub fn from_signed(values: &[i64], modulus: u64) -> Self {
        Self {
            coeffs: values.iter().map(|&v| reduce_i128(v as i128, modulus)).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|&c| c == 0)
    }

    /// Coefficients mapped to `(-modulus/2, modulus/2]`.
    pub fn centered(&self, modulus: u64) -> Vec<i64> {
        self.coeffs.iter().map(|&c| center(c, modulus)).collect()
    }
}

fn reduce_i128(v: i128, m: u64) -> u64 {
    v.rem_euclid(m as i128) as u64
}

fn center(c: u64, m: u64) -> i64 {
    if c > m / 2 {
        c as i64 - m as i64
    } else {
        c as i64
    }
}

/// Ring arithmetic modulo `x^d + 1` and `modulus`.
pub mod ring {
    use super::RingElement;

    pub fn add(a: &RingElement, b: &RingElement, m: u64) -> RingElement {
        RingElement {
            coeffs: a.coeffs.iter().zip(&b.coeffs).map(|(&x, &y)| ((x as u128 + y as u128) % m as u128) as u64).collect(),
        }
    }

    pub fn neg(a: &RingElement, m: u64) -> RingElement {
        RingElement {
            coeffs: a.coeffs.iter().map(|&x| if x == 0 { 0 } else { m - x }).collect(),
        }
    }

    pub fn scale(a: &RingElement, k: u64, m: u64) -> RingElement {
        RingElement {
            coeffs: a.coeffs.iter().map(|&x| ((x as u128 * k as u128) % m as u128) as u64).collect(),
        }
    }

    /// Negacyclic schoolbook product. Terms that wrap past `x^d` pick up a
    /// sign flip and are collected in a separate accumulator.
    pub fn mul(a: &RingElement, b: &RingElement, m: u64) -> RingElement {
        let d = a.coeffs.len();
        debug_assert_eq!(d, b.coeffs.len());
        let mut pos = vec![0u128; d];
        let mut neg = vec![0u128; d];
        for (i, &x) in a.coeffs.iter().enumerate() {
            if x == 0 {
                continue;
            }
            for (j, &y) in b.coeffs.iter().enumerate() {
                let p = x as u128 * y as u128;
                let k = i + j;
                if k < d {
                    pos[k] += p;
                } else {
                    neg[k - d] += p;
                }
            }
        }
        let m128 = m as u128;
        RingElement {
            coeffs: pos
                .into_iter()
                .zip(neg)
                .map(|(p, n)| ((p % m128 + m128 - n % m128) % m128) as u64)
                .collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LwePublicKey {
    pub p0: RingElement,
    pub p1: RingElement,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LweKeyPair {
    pub sk: RingElement,
    pub pk: LwePublicKey,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LweCiphertext {
    pub q: u64,
    pub parts: Vec<RingElement>,
}

impl LweCiphertext {
    /// Number of multiplications' worth of degree: fresh ciphertexts have 1.
    pub fn degree(&self) -> usize {
        self.parts.len().saturating_sub(1)
    }
}

/// One sample of the discrete Gaussian truncated at `6 sigma`.
pub fn sample_gaussian<R: RngCore + ?Sized>(sigma: f64, rng: &mut R) -> i64 {
    let bound = (6.0 * sigma).ceil() as i64;
    loop {
        let x = rng.gen_range(-bound..=bound);
        let weight = (-((x * x) as f64) / (2.0 * sigma * sigma)).exp();
        if rng.gen::<f64>() < weight {
            return x;
        }
    }
}

fn sample_chi<R: RngCore + ?Sized>(params: &LweParams, rng: &mut R) -> RingElement {
    let values: Vec<i64> = (0..params.d).map(|_| sample_gaussian(params.sigma, rng)).collect();
    RingElement::from_signed(&values, params.q)
}

fn sample_uniform<R: RngCore + ?Sized>(params: &LweParams, rng: &mut R) -> RingElement {
    RingElement {
        coeffs: (0..params.d).map(|_| rng.gen_range(0..params.q)).collect(),
    }
}

pub fn lwe_keygen<R: RngCore + ?Sized>(params: &LweParams, rng: &mut R) -> LweKeyPair {
    let q = params.q;
    let s = sample_chi(params, rng);
    let e = sample_chi(params, rng);
    let p1 = sample_uniform(params, rng);
    let inner = ring::add(&ring::mul(&p1, &s, q), &ring::scale(&e, params.t, q), q);
    LweKeyPair {
        sk: s,
        pk: LwePublicKey { p0: ring::neg(&inner, q), p1 },
    }
}

fn check_len(params: &LweParams, x: &RingElement) -> Result<(), LweError> {
    if x.len() != params.d {
        return Err(LweError::WrongLength { got: x.len(), expected: params.d });
    }
    Ok(())
}

pub fn lwe_encrypt<R: RngCore + ?Sized>(
    params: &LweParams,
    pk: &LwePublicKey,
    m: &RingElement,
    rng: &mut R,
) -> Result<LweCiphertext, LweError> {
    check_len(params, m)?;
    if let Some((index, &value)) = m.coeffs.iter().enumerate().find(|(_, &c)| c >= params.t) {
        return Err(LweError::PlaintextOutOfRange { index, value, t: params.t });
    }
    let q = params.q;
    let t = params.t;
    let u = sample_chi(params, rng);
    let f = sample_chi(params, rng);
    let g = sample_chi(params, rng);
    let c0 = ring::add(&ring::add(&ring::mul(&pk.p0, &u, q), &ring::scale(&g, t, q), q), m, q);
    let c1 = ring::add(&ring::mul(&pk.p1, &u, q), &ring::scale(&f, t, q), q);
    Ok(LweCiphertext { q, parts: vec![c0, c1] })
}

/// `sum c_i s^i` in `R_q`, before centering.
pub fn raw_decrypt(params: &LweParams, sk: &RingElement, ct: &LweCiphertext) -> RingElement {
    let q = params.q;
    let mut acc = RingElement::zero(params.d);
    let mut power = RingElement::constant(params.d, 1);
    for part in &ct.parts {
        acc = ring::add(&acc, &ring::mul(part, &power, q), q);
        power = ring::mul(&power, sk, q);
    }
    acc
}

pub fn lwe_decrypt(params: &LweParams, sk: &RingElement, ct: &LweCiphertext) -> RingElement {
    let t = params.t as i64;
    let raw = raw_decrypt(params, sk, ct);
    RingElement {
        coeffs: raw.centered(params.q).into_iter().map(|c| c.rem_euclid(t) as u64).collect(),
    }
}

/// Ratio between the decryption bound `q/(2t)` and the worst coefficient
/// noise `max |[m_hat]_q| / t`. Decryption is correct while this exceeds 1.
pub fn noise_margin(params: &LweParams, sk: &RingElement, ct: &LweCiphertext) -> f64 {
    let worst = raw_decrypt(params, sk, ct)
        .centered(params.q)
        .into_iter()
        .map(|c| c.unsigned_abs())
        .max()
        .unwrap_or(0)
        .max(1);
    params.q as f64 / (2.0 * worst as f64)
}

fn check_pair(a: &LweCiphertext, b: &LweCiphertext) -> Result<(), LweError> {
    let d = a.parts.first().map(RingElement::len);
    let same_d = a.parts.iter().chain(&b.parts).all(|p| Some(p.len()) == d);
    if a.q != b.q || !same_d || a.parts.is_empty() || b.parts.is_empty() {
        return Err(LweError::ParamsMismatch);
    }
    Ok(())
}

/// Part-wise sum. The shorter ciphertext is padded with zeros.
pub fn lwe_add(a: &LweCiphertext, b: &LweCiphertext) -> Result<LweCiphertext, LweError> {
    check_pair(a, b)?;
    let d = a.parts[0].len();
    let n = a.parts.len().max(b.parts.len());
    let zero = RingElement::zero(d);
    let parts = (0..n)
        .map(|i| ring::add(a.parts.get(i).unwrap_or(&zero), b.parts.get(i).unwrap_or(&zero), a.q))
        .collect();
    Ok(LweCiphertext { q: a.q, parts })
}

/// Convolution of the part lists: `(sum c_i z^i)(sum c'_j z^j)`.
pub fn lwe_mul(a: &LweCiphertext, b: &LweCiphertext) -> Result<LweCiphertext, LweError> {
    check_pair(a, b)?;
    let d = a.parts[0].len();
    let mut parts = vec![RingElement::zero(d); a.parts.len() + b.parts.len() - 1];
    for (i, x) in a.parts.iter().enumerate() {
        for (j, y) in b.parts.iter().enumerate() {
            parts[i + j] = ring::add(&parts[i + j], &ring::mul(x, y, a.q), a.q);
        }
    }
    Ok(LweCiphertext { q: a.q, parts })
}

fn check_bits(params: &LweParams, bits: &[u8]) -> Result<(), LweError> {
    let max = params.max_packed_len();
    if bits.len() > max {
        return Err(LweError::VectorTooLong { len: bits.len(), max });
    }
    if bits.iter().any(|&b| b > 1) {
        return Err(LweError::NotABit);
    }
    Ok(())
}

/// Bit `i` becomes the coefficient of `x^i`.
pub fn encode_forward(params: &LweParams, bits: &[u8]) -> Result<RingElement, LweError> {
    check_bits(params, bits)?;
    let mut out = RingElement::zero(params.d);
    for (i, &b) in bits.iter().enumerate() {
        out.coeffs[i] = b as u64;
    }
    Ok(out)
}

/// Bit `j` becomes the coefficient of `x^{n-j}`, `n = bits.len()`.
pub fn encode_reverse(params: &LweParams, bits: &[u8]) -> Result<RingElement, LweError> {
    check_bits(params, bits)?;
    let n = bits.len();
    let mut out = RingElement::zero(params.d);
    for (j, &b) in bits.iter().enumerate() {
        out.coeffs[n - j] = b as u64;
    }
    Ok(out)
}

/// Decrypts a packed product and reads the coefficient of `x^n`, which holds
/// `<P, Q>` mod `t`.
pub fn extract_inner_product(params: &LweParams, sk: &RingElement, ct_product: &LweCiphertext, n: usize) -> Result<u64, LweError> {
    let max = params.max_packed_len();
    if n > max {
        return Err(LweError::VectorTooLong { len: n, max });
    }
    Ok(lwe_decrypt(params, sk, ct_product).coeffs[n])
}

/// Encrypts both vectors, multiplies and extracts the inner product.
pub fn encrypted_inner_product<R: RngCore + ?Sized>(
    params: &LweParams,
    keys: &LweKeyPair,
    p: &[u8],
    q: &[u8],
    rng: &mut R,
) -> Result<u64, LweError> {
    if p.len() != q.len() {
        return Err(LweError::LengthMismatch(p.len(), q.len()));
    }
    let cp = lwe_encrypt(params, &keys.pk, &encode_forward(params, p)?, rng)?;
    let cq = lwe_encrypt(params, &keys.pk, &encode_reverse(params, q)?, rng)?;
    extract_inner_product(params, &keys.sk, &lwe_mul(&cp, &cq)?, p.len())
}

/// Serde adapter for `Vec<u64>` as decimal strings.
pub mod u64_vec_str {
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &[u64], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(v.iter().map(|x| x.to_string()))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<u64>, D::Error> {
        Vec::<String>::deserialize(d)?
            .iter()
            .map(|s| s.parse().map_err(|_| D::Error::custom(format!("invalid decimal integer {s:?}"))))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeded_rng;

    fn small4() -> LweParams {
        LweParams::new(4, 12_289, 2, 3.0).unwrap()
    }

    /// Independent product oracle over signed integers.
    fn negacyclic_oracle(a: &[i64], b: &[i64]) -> Vec<i128> {
        let d = a.len();
        let mut out = vec![0i128; d];
        for i in 0..d {
            for j in 0..d {
                let p = a[i] as i128 * b[j] as i128;
                if i + j < d {
                    out[i + j] += p;
                } else {
                    out[i + j - d] -= p;
                }
            }
        }
        out
    }

    fn random_plain<R: RngCore>(params: &LweParams, rng: &mut R) -> RingElement {
        RingElement::from_coeffs((0..params.d()).map(|_| rng.gen_range(0..params.t())).collect())
    }

    #[test]
    fn profile_moduli_are_prime_and_ntt_friendly() {
        for profile in LweProfile::ALL {
            let p = profile.params();
            assert_eq!(p.q() % (2 * p.d() as u64), 1, "{profile}");
            assert_eq!(profile.name().parse::<LweProfile>().unwrap(), profile);
        }
        assert_eq!(Q40 >> 39, 1);
        assert_eq!(Q60 >> 59, 1);
        assert!(LweParams::new(16, 65_535, 17, 3.0).is_err());
        assert!(LweParams::new(12, 65_537, 17, 3.0).is_err());
        assert!(LweParams::new(16, 65_537, 70_000, 3.0).is_err());
        assert!(LweParams::new(16, 65_537, 17, 0.0).is_err());
    }

    #[test]
    fn ring_mul_matches_oracle() {
        let q = Q60;
        let mut rng = seeded_rng(5);
        for _ in 0..50 {
            let a: Vec<i64> = (0..16).map(|_| rng.gen_range(-1000..1000)).collect();
            let b: Vec<i64> = (0..16).map(|_| rng.gen_range(-1000..1000)).collect();
            let got = ring::mul(&RingElement::from_signed(&a, q), &RingElement::from_signed(&b, q), q);
            let want: Vec<u64> = negacyclic_oracle(&a, &b).into_iter().map(|v| reduce_i128(v, q)).collect();
            assert_eq!(got.coeffs, want);
        }
        // x^{d-1} * x = -1
        let mut x = RingElement::zero(4);
        x.coeffs[1] = 1;
        let mut top = RingElement::zero(4);
        top.coeffs[3] = 1;
        assert_eq!(ring::mul(&x, &top, 17).coeffs, vec![16, 0, 0, 0]);
    }

    #[test]
    fn gaussian_samples_stay_within_six_sigma() {
        let mut rng = seeded_rng(11);
        let samples: Vec<i64> = (0..20_000).map(|_| sample_gaussian(3.0, &mut rng)).collect();
        assert!(samples.iter().all(|x| x.abs() <= 18));
        let mean = samples.iter().sum::<i64>() as f64 / samples.len() as f64;
        let var = samples.iter().map(|&x| (x as f64 - mean).powi(2)).sum::<f64>() / samples.len() as f64;
        assert!(mean.abs() < 0.1, "{mean}");
        assert!((var.sqrt() - 3.0).abs() < 0.1, "{var}");
    }

    #[test]
    fn keygen_relation_has_small_error() {
        let params = small4();
        for seed in 0..200 {
            let keys = lwe_keygen(&params, &mut seeded_rng(seed));
            let q = params.q();
            let s = keys.sk.centered(q);
            assert!(s.iter().all(|c| c.abs() <= params.gaussian_bound()));
            // p0 + p1 s = -t e
            let sum = ring::add(&keys.pk.p0, &ring::mul(&keys.pk.p1, &keys.sk, q), q);
            for c in sum.centered(q) {
                assert_eq!(c % params.t() as i64, 0);
                assert!((c / params.t() as i64).abs() <= params.gaussian_bound());
            }
        }
        let a = lwe_keygen(&params, &mut seeded_rng(1));
        let b = lwe_keygen(&params, &mut seeded_rng(2));
        assert_ne!(a, b);
    }

    #[test]
    fn tiny_ring_round_trip() {
        let params = small4();
        let mut rng = seeded_rng(3);
        let keys = lwe_keygen(&params, &mut rng);
        let m = RingElement::from_coeffs(vec![1, 0, 1, 1]);
        for _ in 0..100 {
            let ct = lwe_encrypt(&params, &keys.pk, &m, &mut rng).unwrap();
            assert_eq!(lwe_decrypt(&params, &keys.sk, &ct), m);
        }
        let zero = RingElement::zero(4);
        let ct = lwe_encrypt(&params, &keys.pk, &zero, &mut rng).unwrap();
        assert_eq!(lwe_decrypt(&params, &keys.sk, &ct), zero);
    }

    #[test]
    fn rejects_out_of_range_plaintext() {
        let params = small4();
        let keys = lwe_keygen(&params, &mut seeded_rng(0));
        let m = RingElement::from_coeffs(vec![0, 2, 0, 0]);
        assert_eq!(
            lwe_encrypt(&params, &keys.pk, &m, &mut seeded_rng(0)),
            Err(LweError::PlaintextOutOfRange { index: 1, value: 2, t: 2 })
        );
        let short = RingElement::zero(3);
        assert!(matches!(lwe_encrypt(&params, &keys.pk, &short, &mut seeded_rng(0)), Err(LweError::WrongLength { .. })));
    }

    #[test]
    fn unmasked_ciphertext_decrypts_to_itself() {
        let params = LweProfile::TestSmall.params();
        let keys = lwe_keygen(&params, &mut seeded_rng(0));
        let m = RingElement::from_coeffs((0..16).map(|i| i % 17).collect());
        let ct = LweCiphertext { q: params.q(), parts: vec![m.clone(), RingElement::zero(16)] };
        assert_eq!(lwe_decrypt(&params, &keys.sk, &ct), m);
    }

    #[test]
    fn small_profile_round_trip_and_addition() {
        let params = LweProfile::TestSmall.params();
        let mut rng = seeded_rng(21);
        let keys = lwe_keygen(&params, &mut rng);
        for _ in 0..1000 {
            let a = random_plain(&params, &mut rng);
            let b = random_plain(&params, &mut rng);
            let ca = lwe_encrypt(&params, &keys.pk, &a, &mut rng).unwrap();
            let cb = lwe_encrypt(&params, &keys.pk, &b, &mut rng).unwrap();
            assert_eq!(lwe_decrypt(&params, &keys.sk, &ca), a);
            let sum: Vec<u64> = a.coeffs.iter().zip(&b.coeffs).map(|(x, y)| (x + y) % 17).collect();
            assert_eq!(lwe_decrypt(&params, &keys.sk, &lwe_add(&ca, &cb).unwrap()).coeffs, sum);
        }
    }

    #[test]
    fn add_pads_and_identity_holds() {
        let params = LweProfile::TestExhaustive.params();
        let mut rng = seeded_rng(4);
        let keys = lwe_keygen(&params, &mut rng);
        let m = random_plain(&params, &mut rng);
        let cm = lwe_encrypt(&params, &keys.pk, &m, &mut rng).unwrap();
        let c0 = lwe_encrypt(&params, &keys.pk, &RingElement::zero(16), &mut rng).unwrap();
        assert_eq!(lwe_decrypt(&params, &keys.sk, &lwe_add(&cm, &c0).unwrap()), m);
        let c1 = lwe_encrypt(&params, &keys.pk, &RingElement::constant(16, 1), &mut rng).unwrap();
        let prod = lwe_mul(&cm, &c1).unwrap();
        assert_eq!(prod.parts.len(), 3);
        assert_eq!(prod.degree(), 2);
        assert_eq!(lwe_decrypt(&params, &keys.sk, &prod), m);
        let mixed = lwe_add(&prod, &cm).unwrap();
        assert_eq!(mixed.parts.len(), 3);
        let twice: Vec<u64> = m.coeffs.iter().map(|x| 2 * x % 17).collect();
        assert_eq!(lwe_decrypt(&params, &keys.sk, &mixed).coeffs, twice);
    }

    #[test]
    fn mismatched_params_are_rejected() {
        let a = LweCiphertext { q: 65_537, parts: vec![RingElement::zero(16); 2] };
        let b = LweCiphertext { q: Q40, parts: vec![RingElement::zero(16); 2] };
        let c = LweCiphertext { q: 65_537, parts: vec![RingElement::zero(8); 2] };
        assert_eq!(lwe_add(&a, &b), Err(LweError::ParamsMismatch));
        assert_eq!(lwe_mul(&a, &c), Err(LweError::ParamsMismatch));
    }

    #[test]
    fn binary_products_match_ring_oracle() {
        let params = LweParams::new(16, Q40, 2, 3.0).unwrap();
        let mut rng = seeded_rng(8);
        let keys = lwe_keygen(&params, &mut rng);
        for _ in 0..200 {
            let a: Vec<i64> = (0..16).map(|_| rng.gen_range(0..2)).collect();
            let b: Vec<i64> = (0..16).map(|_| rng.gen_range(0..2)).collect();
            let ca = lwe_encrypt(&params, &keys.pk, &RingElement::from_signed(&a, 2), &mut rng).unwrap();
            let cb = lwe_encrypt(&params, &keys.pk, &RingElement::from_signed(&b, 2), &mut rng).unwrap();
            let want: Vec<u64> = negacyclic_oracle(&a, &b).into_iter().map(|v| reduce_i128(v, 2)).collect();
            assert_eq!(lwe_decrypt(&params, &keys.sk, &lwe_mul(&ca, &cb).unwrap()).coeffs, want);
        }
    }

    #[test]
    fn packing_layout() {
        let params = LweProfile::TestExhaustive.params();
        let f = encode_forward(&params, &[1, 0, 1]).unwrap();
        assert_eq!(&f.coeffs[..4], &[1, 0, 1, 0]);
        let r = encode_reverse(&params, &[1, 1, 0]).unwrap();
        assert_eq!(&r.coeffs[..4], &[0, 0, 1, 1]);
        assert!(encode_forward(&params, &[0, 0]).unwrap().is_zero());
        assert_eq!(encode_forward(&params, &[0; 9]), Err(LweError::VectorTooLong { len: 9, max: 8 }));
        assert_eq!(encode_reverse(&params, &[2]), Err(LweError::NotABit));
    }

    #[test]
    fn inner_product_examples() {
        let params = LweProfile::TestExhaustive.params();
        let mut rng = seeded_rng(9);
        let keys = lwe_keygen(&params, &mut rng);
        assert_eq!(encrypted_inner_product(&params, &keys, &[1, 0, 1], &[1, 1, 1], &mut rng).unwrap(), 2);
        assert_eq!(encrypted_inner_product(&params, &keys, &[0, 0, 0], &[0, 0, 0], &mut rng).unwrap(), 0);
        assert_eq!(
            encrypted_inner_product(&params, &keys, &[1], &[1, 0], &mut rng),
            Err(LweError::LengthMismatch(1, 2))
        );
    }

    #[test]
    fn exhaustive_four_bit_inner_products() {
        let params = LweProfile::TestExhaustive.params();
        let mut rng = seeded_rng(10);
        let keys = lwe_keygen(&params, &mut rng);
        let bits = |x: u8| -> Vec<u8> { (0..4).map(|i| (x >> i) & 1).collect() };
        for a in 0..16u8 {
            for b in 0..16u8 {
                let want = (a & b).count_ones() as u64;
                assert_eq!(encrypted_inner_product(&params, &keys, &bits(a), &bits(b), &mut rng).unwrap(), want);
            }
        }
    }

    #[test]
    fn one_multiplication_leaves_twice_the_needed_margin() {
        for profile in [LweProfile::TestExhaustive, LweProfile::Default] {
            let params = profile.params();
            let mut rng = seeded_rng(12);
            let keys = lwe_keygen(&params, &mut rng);
            let mut worst = f64::INFINITY;
            for _ in 0..200 {
                let a = random_plain(&params, &mut rng);
                let b = random_plain(&params, &mut rng);
                let ca = lwe_encrypt(&params, &keys.pk, &a, &mut rng).unwrap();
                let cb = lwe_encrypt(&params, &keys.pk, &b, &mut rng).unwrap();
                worst = worst.min(noise_margin(&params, &keys.sk, &lwe_mul(&ca, &cb).unwrap()));
            }
            assert!(worst >= 2.0, "{profile}: margin {worst}");
        }
    }

    #[test]
    fn ciphertext_json_uses_decimal_strings() {
        let ct = LweCiphertext { q: 17, parts: vec![RingElement::from_coeffs(vec![1, 2]), RingElement::from_coeffs(vec![3, 4])] };
        let json = serde_json::to_string(&ct).unwrap();
        assert_eq!(json, r#"{"q":17,"parts":[["1","2"],["3","4"]]}"#);
        assert_eq!(serde_json::from_str::<LweCiphertext>(&json).unwrap(), ct);
    }
}
