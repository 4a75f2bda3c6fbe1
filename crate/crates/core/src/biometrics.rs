//! Feature-vector matching, quantization, encrypted matching over packed bit
//! templates, CNN shape arithmetic and modality scoring.

use num_traits::Float;
use rand::RngCore;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lwe_he::{self, LweError, LweKeyPair, LweParams};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BiometricError {
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("zero vector has no direction")]
    ZeroVector,
    #[error("vector contains NaN or infinity")]
    NonFinite,
    #[error("quantization scales differ ({0} vs {1})")]
    ScaleMismatch(u64, u64),
    #[error("scale must be positive")]
    ZeroScale,
    #[error("({numerator}) is not divisible by stride {stride}")]
    NonIntegralOutput { numerator: i64, stride: usize },
    #[error("shape fields must be positive and the kernel must fit the padded input")]
    InvalidShape,
    #[error("modality {name:?} has level {level} outside 1..=3")]
    InvalidLevel { name: String, level: u8 },
    #[error(transparent)]
    Lwe(#[from] LweError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector<T> {
    values: Vec<T>,
    normalized: bool,
}

impl<T: Float> FeatureVector<T> {
    pub fn new(values: Vec<T>) -> Result<Self, BiometricError> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(BiometricError::NonFinite);
        }
        Ok(Self { values, normalized: false })
    }

    /// Scales to unit Euclidean norm.
    pub fn normalized(values: Vec<T>) -> Result<Self, BiometricError> {
        let v = Self::new(values)?;
        let norm = v.norm();
        if norm == T::zero() {
            return Err(BiometricError::ZeroVector);
        }
        Ok(Self {
            values: v.values.into_iter().map(|x| x / norm).collect(),
            normalized: true,
        })
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn norm(&self) -> T {
        self.values.iter().fold(T::zero(), |acc, &x| acc + x * x).sqrt()
    }
}

/// `(a . b) / (|a| |b|)`, clamped to `[-1, 1]` against rounding.
pub fn cosine_similarity<T: Float>(a: &FeatureVector<T>, b: &FeatureVector<T>) -> Result<T, BiometricError> {
    if a.dim() != b.dim() {
        return Err(BiometricError::DimensionMismatch(a.dim(), b.dim()));
    }
    let (na, nb) = (a.norm(), b.norm());
    if na == T::zero() || nb == T::zero() {
        return Err(BiometricError::ZeroVector);
    }
    let dot = a.values.iter().zip(&b.values).fold(T::zero(), |acc, (&x, &y)| acc + x * y);
    let one = T::one();
    Ok((dot / (na * nb)).max(-one).min(one))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchResult {
    Match,
    NoMatch,
}

impl MatchResult {
    pub fn is_match(self) -> bool {
        self == MatchResult::Match
    }
}

/// Closed boundary: a score equal to the threshold matches.
pub fn match_decision<T: PartialOrd>(score: T, threshold: T) -> MatchResult {
    if score >= threshold {
        MatchResult::Match
    } else {
        MatchResult::NoMatch
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuantizedVector {
    pub values: Vec<i64>,
    pub scale: u64,
}

/// `values[i] = round(v[i] * scale)`.
pub fn quantize<T: Float>(v: &FeatureVector<T>, scale: u64) -> Result<QuantizedVector, BiometricError> {
    if scale == 0 {
        return Err(BiometricError::ZeroScale);
    }
    let s = T::from(scale).ok_or(BiometricError::NonFinite)?;
    let values = v
        .values
        .iter()
        .map(|&x| (x * s).round().to_i64().ok_or(BiometricError::NonFinite))
        .collect::<Result<_, _>>()?;
    Ok(QuantizedVector { values, scale })
}

pub fn dot_q(a: &QuantizedVector, b: &QuantizedVector) -> Result<i128, BiometricError> {
    if a.scale != b.scale {
        return Err(BiometricError::ScaleMismatch(a.scale, b.scale));
    }
    if a.values.len() != b.values.len() {
        return Err(BiometricError::DimensionMismatch(a.values.len(), b.values.len()));
    }
    Ok(a.values.iter().zip(&b.values).map(|(&x, &y)| x as i128 * y as i128).sum())
}

/// Worst-case gap between `dot_q / S^2` and the exact cosine of two unit
/// vectors of dimension `dim`.
pub fn quantization_error_bound(dim: usize, scale: u64) -> f64 {
    let s = scale as f64;
    dim as f64 * (2.0 / s + 1.0 / (s * s))
}

/// Reference pipeline on plaintext bits.
pub fn plaintext_match(template_bits: &[u8], probe_bits: &[u8], threshold_count: u64) -> Result<MatchResult, BiometricError> {
    if template_bits.len() != probe_bits.len() {
        return Err(BiometricError::DimensionMismatch(template_bits.len(), probe_bits.len()));
    }
    let dot: u64 = template_bits.iter().zip(probe_bits).map(|(&a, &b)| (a & b) as u64).sum();
    Ok(match_decision(dot, threshold_count))
}

/// Encodes, encrypts both templates, multiplies once, extracts the inner
/// product and thresholds it.
pub fn encrypted_match<R: RngCore + ?Sized>(
    params: &LweParams,
    keys: &LweKeyPair,
    template_bits: &[u8],
    probe_bits: &[u8],
    threshold_count: u64,
    rng: &mut R,
) -> Result<MatchResult, BiometricError> {
    let dot = lwe_he::encrypted_inner_product(params, keys, template_bits, probe_bits, rng)?;
    Ok(match_decision(dot, threshold_count))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CnnShape {
    /// Input width.
    pub w: usize,
    /// Kernel size.
    pub f: usize,
    /// Padding.
    pub p: usize,
    /// Stride.
    pub s: usize,
    /// Depth.
    pub d: usize,
}

fn out_size(w: usize, f: usize, pad: usize, stride: usize) -> Result<usize, BiometricError> {
    if w == 0 || f == 0 || stride == 0 || f > w + 2 * pad {
        return Err(BiometricError::InvalidShape);
    }
    let numerator = w + 2 * pad - f;
    if !numerator.is_multiple_of(stride) {
        return Err(BiometricError::NonIntegralOutput { numerator: numerator as i64, stride });
    }
    Ok(numerator / stride + 1)
}

/// `(W - F + 2P) / S + 1`.
pub fn conv_out_size(shape: &CnnShape) -> Result<usize, BiometricError> {
    if shape.d == 0 {
        return Err(BiometricError::InvalidShape);
    }
    out_size(shape.w, shape.f, shape.p, shape.s)
}

/// `(W - F) / S + 1`.
pub fn pool_out_size(w: usize, f: usize, s: usize) -> Result<usize, BiometricError> {
    out_size(w, f, 0, s)
}

/// Factor order of a profile's levels.
pub const FACTORS: [&str; 10] = [
    "Acceptability",
    "Collectability",
    "Permanence",
    "Universality",
    "Uniqueness",
    "Accuracy",
    "Security",
    "Processing Speed",
    "Circumvention",
    "Hardware",
];

/// Weight of each factor, in [`FACTORS`] order.
pub const FACTOR_WEIGHTS: [u32; 10] = [6, 6, 5, 5, 10, 8, 10, 3, 10, 8];

/// Modalities scoring strictly above this are eligible.
pub const ELIGIBILITY_THRESHOLD: u32 = 147;

/// Levels are 1 (low) to 3 (high). Circumvention is stored already
/// inverted, so 3 means hard to circumvent.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModalityProfile {
    pub name: String,
    pub levels: [u8; 10],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub published_score: Option<u32>,
}

impl ModalityProfile {
    pub fn validate(&self) -> Result<(), BiometricError> {
        match self.levels.iter().find(|l| !(1..=3).contains(*l)) {
            Some(&level) => Err(BiometricError::InvalidLevel { name: self.name.clone(), level }),
            None => Ok(()),
        }
    }
}

pub fn modality_score(profile: &ModalityProfile) -> Result<u32, BiometricError> {
    profile.validate()?;
    Ok(profile.levels.iter().zip(FACTOR_WEIGHTS).map(|(&l, w)| l as u32 * w).sum())
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScoredModality {
    pub rank: usize,
    pub name: String,
    pub score: u32,
    pub published_score: Option<u32>,
    pub matches_published: Option<bool>,
    pub eligible: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub rows: Vec<ScoredModality>,
}

impl ScoreReport {
    pub fn mismatches(&self) -> impl Iterator<Item = &ScoredModality> {
        self.rows.iter().filter(|r| r.matches_published == Some(false))
    }

    pub fn eligible(&self) -> impl Iterator<Item = &ScoredModality> {
        self.rows.iter().filter(|r| r.eligible)
    }
}

/// Scores every profile and ranks by score, highest first. Ties keep input
/// order.
pub fn score_table(profiles: &[ModalityProfile]) -> Result<ScoreReport, BiometricError> {
    let mut rows = profiles
        .iter()
        .map(|p| {
            let score = modality_score(p)?;
            Ok(ScoredModality {
                rank: 0,
                name: p.name.clone(),
                score,
                published_score: p.published_score,
                matches_published: p.published_score.map(|s| s == score),
                eligible: score > ELIGIBILITY_THRESHOLD,
            })
        })
        .collect::<Result<Vec<_>, BiometricError>>()?;
    rows.sort_by_key(|r| std::cmp::Reverse(r.score));
    for (i, row) in rows.iter_mut().enumerate() {
        row.rank = i + 1;
    }
    Ok(ScoreReport { rows })
}

/// The shipped modality matrix.
pub const MODALITIES_JSON: &str = include_str!("../data/modalities.json");

pub fn builtin_modalities() -> Vec<ModalityProfile> {
    serde_json::from_str(MODALITIES_JSON).expect("bundled modality fixture parses")
}
