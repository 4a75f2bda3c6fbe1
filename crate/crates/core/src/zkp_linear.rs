//! Verifiable encrypted linear computation.
//!
//! A prover holds private inputs `x_i` and publishes ElGamal encryptions of
//! `g^{x_i}` together with an encryption of `g^y`, `y = sum a_i x_i`, for public
//! coefficients `a_i`. Anyone can fold the input ciphertexts into
//! `(C, D) = (prod c_i^{a_i}, prod d_i^{a_i})`, which encrypts `g^y` under the
//! aggregate randomness `r' = sum a_i r_i`. The prover then shows, without
//! revealing `y`, that `(C, D)` and the published output ciphertext hold the
//! same plaintext: the component-wise quotient `(C / c_out, D / d_out)` must be
//! `(g^w, pk^w)` for `w = r' - r_out`, which is a discrete-log-equality
//! statement proved with Chaum-Pedersen made non-interactive by Fiat-Shamir.
//!
//! Feldman commitments to a secret polynomial are included for share
//! verification.

use num_bigint::{BigInt, BigUint};
use num_traits::One;
use rand::RngCore;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::decimal::{bigint_vec_str, biguint_str, biguint_vec_str};
use crate::group_crypto::{self, Ciphertext, GroupError, GroupParams};

/// Domain separator mixed into every challenge.
pub const LOGEQ_DOMAIN_TAG: &[u8] = b"hmnd/logeq/v1";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ZkpError {
    #[error(transparent)]
    Group(#[from] GroupError),
    #[error("input, randomness and coefficient lists differ in length ({inputs}, {randomness}, {coefficients})")]
    LengthMismatch { inputs: usize, randomness: usize, coefficients: usize },
    #[error("linear statement has no inputs")]
    EmptyStatement,
    #[error("witness does not satisfy h1 = g1^w and h2 = g2^w")]
    WitnessInconsistent,
    #[error("kernel of length {kernel} exceeds input of length {inputs}")]
    KernelLargerThanInput { kernel: usize, inputs: usize },
}

/// Feldman commitments `h_i = g^{a_i}` to polynomial coefficients.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VssCommitment {
    #[serde(with = "biguint_vec_str")]
    pub h: Vec<BigUint>,
}

/// Commits to `f(x) = sum a_i x^i`. Coefficients are reduced mod `q`.
pub fn vss_commit(params: &GroupParams, coefficients: &[BigUint]) -> VssCommitment {
    VssCommitment {
        h: coefficients.iter().map(|a| params.exp_g(&(a % params.q()))).collect(),
    }
}

/// Checks `g^b = prod_i h_i^{a^i}` for the share `(a, b)`.
pub fn vss_verify_share(params: &GroupParams, commitment: &VssCommitment, share: (&BigUint, &BigUint)) -> bool {
    let (abscissa, value) = share;
    let q = params.q();
    let abscissa = abscissa % q;
    let mut power = BigUint::one();
    let mut rhs = BigUint::one();
    for h in &commitment.h {
        rhs = params.mul(&rhs, &params.pow(h, &power));
        power = (&power * &abscissa) % q;
    }
    params.exp_g(&(value % q)) == rhs
}

/// Public data of an encrypted linear computation.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinearStatement {
    #[serde(with = "bigint_vec_str")]
    pub coefficients: Vec<BigInt>,
    pub input_cts: Vec<Ciphertext>,
    pub output_ct: Ciphertext,
}

/// Chaum-Pedersen statement: `h1 = g1^w` and `h2 = g2^w` for one `w`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LogEqStatement {
    pub g1: BigUint,
    pub h1: BigUint,
    pub g2: BigUint,
    pub h2: BigUint,
}

/// Proof `(A, B, t)` with `A = g1^r`, `B = g2^r`, `t = r + w z mod q`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LogEqProof {
    #[serde(rename = "A", with = "biguint_str")]
    pub a: BigUint,
    #[serde(rename = "B", with = "biguint_str")]
    pub b: BigUint,
    #[serde(with = "biguint_str")]
    pub t: BigUint,
}

fn absorb(hasher: &mut Sha256, x: &BigUint) {
    let bytes = x.to_bytes_be();
    hasher.update((bytes.len() as u64).to_be_bytes());
    hasher.update(&bytes);
}

/// Fiat-Shamir challenge bound to the group, the full statement and the
/// commitments.
pub fn challenge(params: &GroupParams, stmt: &LogEqStatement, a: &BigUint, b: &BigUint) -> BigUint {
    challenge_with_context(params, stmt, a, b, &[])
}

/// As [`challenge`], with caller data appended as one more field.
pub fn challenge_with_context(
    params: &GroupParams,
    stmt: &LogEqStatement,
    a: &BigUint,
    b: &BigUint,
    context: &[u8],
) -> BigUint {
    let mut hasher = Sha256::new();
    hasher.update(LOGEQ_DOMAIN_TAG);
    for x in [params.p(), params.q(), params.g(), &stmt.g1, &stmt.h1, &stmt.g2, &stmt.h2, a, b] {
        absorb(&mut hasher, x);
    }
    if !context.is_empty() {
        hasher.update((context.len() as u64).to_be_bytes());
        hasher.update(context);
    }
    BigUint::from_bytes_be(&hasher.finalize()) % params.q()
}

pub fn logeq_prove<R: RngCore + ?Sized>(
    params: &GroupParams,
    stmt: &LogEqStatement,
    witness: &BigUint,
    rng: &mut R,
) -> Result<LogEqProof, ZkpError> {
    logeq_prove_in_context(params, stmt, witness, &[], rng)
}

fn logeq_prove_in_context<R: RngCore + ?Sized>(
    params: &GroupParams,
    stmt: &LogEqStatement,
    witness: &BigUint,
    context: &[u8],
    rng: &mut R,
) -> Result<LogEqProof, ZkpError> {
    let w = witness % params.q();
    if params.pow(&stmt.g1, &w) != stmt.h1 || params.pow(&stmt.g2, &w) != stmt.h2 {
        return Err(ZkpError::WitnessInconsistent);
    }
    let r = params.random_scalar(rng);
    let a = params.pow(&stmt.g1, &r);
    let b = params.pow(&stmt.g2, &r);
    let z = challenge_with_context(params, stmt, &a, &b, context);
    let t = (r + w * z) % params.q();
    Ok(LogEqProof { a, b, t })
}

/// Accepts iff `g1^t = A h1^z` and `g2^t = B h2^z` with `z` recomputed.
pub fn logeq_verify(params: &GroupParams, stmt: &LogEqStatement, proof: &LogEqProof) -> bool {
    logeq_verify_in_context(params, stmt, proof, &[])
}

fn logeq_verify_in_context(params: &GroupParams, stmt: &LogEqStatement, proof: &LogEqProof, context: &[u8]) -> bool {
    let members = [&stmt.g1, &stmt.h1, &stmt.g2, &stmt.h2, &proof.a, &proof.b];
    if !members.iter().all(|x| params.is_member(x)) || &proof.t >= params.q() {
        return false;
    }
    let z = challenge_with_context(params, stmt, &proof.a, &proof.b, context);
    let lhs1 = params.pow(&stmt.g1, &proof.t);
    let rhs1 = params.mul(&proof.a, &params.pow(&stmt.h1, &z));
    let lhs2 = params.pow(&stmt.g2, &proof.t);
    let rhs2 = params.mul(&proof.b, &params.pow(&stmt.h2, &z));
    lhs1 == rhs1 && lhs2 == rhs2
}

/// Length-prefixed encoding of every coefficient and ciphertext, so inputs
/// with a zero coefficient are still bound by the proof.
fn statement_context(statement: &LinearStatement) -> Vec<u8> {
    let mut out = Vec::new();
    let mut put = |bytes: &[u8]| {
        out.extend_from_slice(&(bytes.len() as u64).to_be_bytes());
        out.extend_from_slice(bytes);
    };
    for a in &statement.coefficients {
        put(&a.to_signed_bytes_be());
    }
    for ct in statement.input_cts.iter().chain([&statement.output_ct]) {
        put(&ct.c.to_bytes_be());
        put(&ct.d.to_bytes_be());
    }
    out
}

/// Folds the input ciphertexts under the public coefficients.
pub fn aggregate(params: &GroupParams, statement: &LinearStatement) -> Result<Ciphertext, ZkpError> {
    if statement.coefficients.len() != statement.input_cts.len() {
        return Err(ZkpError::LengthMismatch {
            inputs: statement.input_cts.len(),
            randomness: statement.input_cts.len(),
            coefficients: statement.coefficients.len(),
        });
    }
    let mut acc = Ciphertext::identity();
    for (a, ct) in statement.coefficients.iter().zip(&statement.input_cts) {
        let scaled = group_crypto::hom_scalar(params, ct, a)?;
        acc = Ciphertext {
            c: params.mul(&acc.c, &scaled.c),
            d: params.mul(&acc.d, &scaled.d),
        };
    }
    Ok(acc)
}

fn quotient_statement(
    params: &GroupParams,
    pk: &BigUint,
    aggregated: &Ciphertext,
    output: &Ciphertext,
) -> LogEqStatement {
    LogEqStatement {
        g1: params.g().clone(),
        h1: params.div(&aggregated.c, &output.c),
        g2: pk.clone(),
        h2: params.div(&aggregated.d, &output.d),
    }
}

/// `sum a_i v_i` over signed integers.
fn dot(coefficients: &[BigInt], values: &[BigInt]) -> BigInt {
    coefficients.iter().zip(values).map(|(a, v)| a * v).sum()
}

/// Proves a linear statement over ciphertexts the prover already produced.
///
/// `input_randomness[i]` must be the randomness used for `input_cts[i]`.
pub fn prove_linear_with_inputs<R: RngCore + ?Sized>(
    params: &GroupParams,
    pk: &BigUint,
    inputs: &[BigInt],
    input_cts: &[Ciphertext],
    input_randomness: &[BigUint],
    coefficients: &[BigInt],
    rng: &mut R,
) -> Result<(LinearStatement, LogEqProof), ZkpError> {
    if inputs.len() != input_randomness.len()
        || inputs.len() != coefficients.len()
        || inputs.len() != input_cts.len()
    {
        return Err(ZkpError::LengthMismatch {
            inputs: inputs.len(),
            randomness: input_randomness.len(),
            coefficients: coefficients.len(),
        });
    }
    if inputs.is_empty() {
        return Err(ZkpError::EmptyStatement);
    }
    let y = dot(coefficients, inputs);
    let r_out = params.random_scalar(rng);
    let output_ct = group_crypto::encrypt_with_randomness(params, pk, &params.encode(&y), &r_out)?;

    let statement = LinearStatement {
        coefficients: coefficients.to_vec(),
        input_cts: input_cts.to_vec(),
        output_ct,
    };

    let r_agg: BigInt = coefficients
        .iter()
        .zip(input_randomness)
        .map(|(a, r)| a * BigInt::from(r.clone()))
        .sum();
    let witness = params.reduce_exponent(&(r_agg - BigInt::from(r_out)));

    let aggregated = aggregate(params, &statement)?;
    let stmt = quotient_statement(params, pk, &aggregated, &statement.output_ct);
    let proof = logeq_prove_in_context(params, &stmt, &witness, &statement_context(&statement), rng)?;
    Ok((statement, proof))
}

/// Encrypts `g^{x_i}` with the given randomness, computes `y`, encrypts `g^y`
/// and proves consistency.
pub fn prove_linear<R: RngCore + ?Sized>(
    params: &GroupParams,
    pk: &BigUint,
    inputs: &[BigInt],
    randomness: &[BigUint],
    coefficients: &[BigInt],
    rng: &mut R,
) -> Result<(LinearStatement, LogEqProof), ZkpError> {
    if inputs.len() != randomness.len() {
        return Err(ZkpError::LengthMismatch {
            inputs: inputs.len(),
            randomness: randomness.len(),
            coefficients: coefficients.len(),
        });
    }
    let input_cts = inputs
        .iter()
        .zip(randomness)
        .map(|(x, r)| group_crypto::encrypt_with_randomness(params, pk, &params.encode(x), r))
        .collect::<Result<Vec<_>, _>>()?;
    prove_linear_with_inputs(params, pk, inputs, &input_cts, randomness, coefficients, rng)
}

/// Accepts iff the aggregated ciphertext and the output ciphertext provably
/// hold the same plaintext. Malformed statements are rejected.
pub fn verify_linear(params: &GroupParams, pk: &BigUint, statement: &LinearStatement, proof: &LogEqProof) -> bool {
    if statement.input_cts.is_empty() || !params.is_member(pk) {
        return false;
    }
    let Ok(aggregated) = aggregate(params, statement) else {
        return false;
    };
    let out = &statement.output_ct;
    if !params.is_member(&out.c) || !params.is_member(&out.d) {
        return false;
    }
    let stmt = quotient_statement(params, pk, &aggregated, out);
    logeq_verify_in_context(params, &stmt, proof, &statement_context(statement))
}

/// One sliding window of a 1-D convolution `y_j = sum_i a_i x_{j+i}`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConvWindow {
    pub output_index: usize,
    pub start: usize,
    pub coefficients: Vec<BigInt>,
}

impl ConvWindow {
    pub fn select<'a, T>(&self, inputs: &'a [T]) -> &'a [T] {
        &inputs[self.start..self.start + self.coefficients.len()]
    }
}

/// Splits a convolution over `input_len` inputs into `input_len - m + 1`
/// linear statements, one per window.
pub fn conv_as_linear(input_len: usize, kernel: &[BigInt]) -> Result<Vec<ConvWindow>, ZkpError> {
    if kernel.is_empty() || kernel.len() > input_len {
        return Err(ZkpError::KernelLargerThanInput { kernel: kernel.len(), inputs: input_len });
    }
    Ok((0..=input_len - kernel.len())
        .map(|j| ConvWindow { output_index: j, start: j, coefficients: kernel.to_vec() })
        .collect())
}

/// Proves a convolution window by window. Inputs are encrypted once and the
/// same ciphertexts are shared by every window that reads them.
pub fn prove_convolution<R: RngCore + ?Sized>(
    params: &GroupParams,
    pk: &BigUint,
    inputs: &[BigInt],
    kernel: &[BigInt],
    rng: &mut R,
) -> Result<Vec<(LinearStatement, LogEqProof)>, ZkpError> {
    let windows = conv_as_linear(inputs.len(), kernel)?;
    let randomness: Vec<BigUint> = inputs.iter().map(|_| params.random_scalar(rng)).collect();
    let cts = inputs
        .iter()
        .zip(&randomness)
        .map(|(x, r)| group_crypto::encrypt_with_randomness(params, pk, &params.encode(x), r))
        .collect::<Result<Vec<_>, _>>()?;
    windows
        .iter()
        .map(|w| {
            prove_linear_with_inputs(
                params,
                pk,
                w.select(inputs),
                w.select(&cts),
                w.select(&randomness),
                &w.coefficients,
                rng,
            )
        })
        .collect()
}

/// Statement and proof as exchanged in files.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinearProofDocument {
    pub statement: LinearStatement,
    pub proof: LogEqProof,
}

/// True when every window proof verifies and windows match the kernel.
pub fn verify_convolution(
    params: &GroupParams,
    pk: &BigUint,
    kernel: &[BigInt],
    proofs: &[(LinearStatement, LogEqProof)],
) -> bool {
    !proofs.is_empty()
        && proofs.iter().enumerate().all(|(j, (stmt, proof))| {
            let shares_inputs = j == 0 || proofs[j - 1].0.input_cts[1..] == stmt.input_cts[..stmt.input_cts.len() - 1];
            stmt.coefficients == kernel && shares_inputs && verify_linear(params, pk, stmt, proof)
        })
}
