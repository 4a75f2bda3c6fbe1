//! Cost-based fee pricing.
//!
//! A transaction pays the quoted compute cost once per validator plus the
//! perpetual cost of storing its payload on every validator. Storage cost per
//! GB falls by a fixed fraction `d` each year, so the perpetual price of one
//! year's storage cost `C` is the geometric sum `C / d`. Amounts are computed
//! in USD in the scalar type, converted at the quoted rate and rounded up to
//! the smallest native unit.

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::decimal::format_rational;
use crate::scalar::Scalar;
use crate::Rational;

/// Decimal places of the native token.
pub const NATIVE_DECIMALS: u32 = 6;

/// Julian year in hours.
pub const HOURS_PER_YEAR: u32 = 8766;

/// Default annual decline of storage cost.
pub const DEFAULT_ANNUAL_DECLINE: &str = "0.3057";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FeeError {
    #[error("annual decline must lie strictly between 0 and 1")]
    DeclineOutOfRange,
    #[error("quote field {0} must be strictly positive")]
    NonPositiveQuote(&'static str),
    #[error("at least one validator is required")]
    NoValidators,
    #[error("data size must be non-negative")]
    NegativeSize,
    #[error("quote fixture lists no providers")]
    NoProviders,
    #[error("invalid quote fixture: {0}")]
    Fixture(String),
    #[error("amount is not representable in native units")]
    Overflow,
}

/// Costs in USD and the native exchange rate.
#[derive(Clone, Debug, PartialEq)]
pub struct PriceQuote<S> {
    pub compute_cost_per_tx_usd: S,
    /// Cost of one GB for one hour in the first year.
    pub storage_cost_gb_hour_usd: S,
    pub hmnd_per_usd: S,
    pub timestamp: i64,
}

impl<S: Scalar> PriceQuote<S> {
    pub fn new(compute: S, storage: S, rate: S, timestamp: i64) -> Result<Self, FeeError> {
        let quote = Self {
            compute_cost_per_tx_usd: compute,
            storage_cost_gb_hour_usd: storage,
            hmnd_per_usd: rate,
            timestamp,
        };
        quote.validate()?;
        Ok(quote)
    }

    // Negated comparisons also reject NaN for float scalars.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self) -> Result<(), FeeError> {
        let zero = S::zero();
        if !(self.compute_cost_per_tx_usd > zero) {
            return Err(FeeError::NonPositiveQuote("compute_cost_per_tx_usd"));
        }
        if !(self.storage_cost_gb_hour_usd > zero) {
            return Err(FeeError::NonPositiveQuote("storage_cost_gb_hour_usd"));
        }
        if !(self.hmnd_per_usd > zero) {
            return Err(FeeError::NonPositiveQuote("hmnd_per_usd"));
        }
        Ok(())
    }

    /// Uses the highest compute and highest storage price among providers.
    pub fn from_fixture(fixture: &QuoteFixture) -> Result<Self, FeeError> {
        let parse = |s: &str| S::from_decimal_str(s).ok_or_else(|| FeeError::Fixture(format!("bad decimal {s:?}")));
        let mut compute: Option<S> = None;
        let mut storage: Option<S> = None;
        for p in &fixture.providers {
            let c = parse(&p.compute_usd)?;
            let s = parse(&p.storage_gb_hour_usd)?;
            if compute.as_ref().is_none_or(|m| c > *m) {
                compute = Some(c);
            }
            if storage.as_ref().is_none_or(|m| s > *m) {
                storage = Some(s);
            }
        }
        let (compute, storage) = compute.zip(storage).ok_or(FeeError::NoProviders)?;
        Self::new(compute, storage, parse(&fixture.hmnd_per_usd)?, fixture.timestamp)
    }

    /// Storage cost of one GB for the first year.
    pub fn storage_cost_gb_year_usd(&self) -> S {
        self.storage_cost_gb_hour_usd.clone() * S::from_u32(HOURS_PER_YEAR).expect("small integer")
    }

    /// USD amount to smallest native units, rounded up.
    pub fn usd_to_native(&self, usd: S) -> Result<u128, FeeError> {
        (usd * self.hmnd_per_usd.clone() * S::pow10(NATIVE_DECIMALS))
            .ceil_to_u128()
            .ok_or(FeeError::Overflow)
    }
}

/// One provider's quote. Prices are decimal text so exact scalars lose nothing.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProviderQuote {
    pub name: String,
    #[serde(deserialize_with = "decimal_text")]
    pub compute_usd: String,
    #[serde(deserialize_with = "decimal_text")]
    pub storage_gb_hour_usd: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuoteFixture {
    pub providers: Vec<ProviderQuote>,
    #[serde(deserialize_with = "decimal_text")]
    pub hmnd_per_usd: String,
    #[serde(default)]
    pub timestamp: i64,
}

impl QuoteFixture {
    pub fn from_json(text: &str) -> Result<Self, FeeError> {
        serde_json::from_str(text).map_err(|e| FeeError::Fixture(e.to_string()))
    }
}

/// Accepts a JSON number or a string holding one.
fn decimal_text<'de, D: serde::Deserializer<'de>>(d: D) -> Result<String, D::Error> {
    use serde::de::Error;
    match Value::deserialize(d)? {
        Value::String(s) => Ok(s),
        Value::Number(n) => Ok(n.to_string()),
        other => Err(D::Error::custom(format!("expected a decimal, got {other}"))),
    }
}

fn check_decline<S: Scalar>(d: &S) -> Result<(), FeeError> {
    if *d > S::zero() && *d < S::one() {
        Ok(())
    } else {
        Err(FeeError::DeclineOutOfRange)
    }
}

fn validators_scalar<S: Scalar>(validators: u32) -> Result<S, FeeError> {
    if validators == 0 {
        return Err(FeeError::NoValidators);
    }
    Ok(S::from_u32(validators).expect("u32 fits every scalar"))
}

/// `compute_cost * validators` in USD.
pub fn computational_fee_usd<S: Scalar>(quote: &PriceQuote<S>, validators: u32) -> Result<S, FeeError> {
    Ok(quote.compute_cost_per_tx_usd.clone() * validators_scalar(validators)?)
}

/// Computational fee in smallest native units.
pub fn computational_fee<S: Scalar>(quote: &PriceQuote<S>, validators: u32) -> Result<u128, FeeError> {
    quote.usd_to_native(computational_fee_usd(quote, validators)?)
}

/// Closed form `C / d` of `sum_i C (1 - d)^i`.
pub fn perpetual_cost<S: Scalar>(first_year_cost: S, d: S) -> Result<S, FeeError> {
    check_decline(&d)?;
    Ok(first_year_cost / d)
}

/// First `terms` terms of `sum_i C (1 - d)^i`.
pub fn perpetual_cost_partial_sum<S: Scalar>(first_year_cost: S, d: S, terms: usize) -> Result<S, FeeError> {
    check_decline(&d)?;
    let keep = S::one() - d;
    let mut term = first_year_cost;
    let mut sum = S::zero();
    for _ in 0..terms {
        sum = sum + term.clone();
        term = term * keep.clone();
    }
    Ok(sum)
}

/// Perpetual storage of `data_size_gb` on one node, in USD.
pub fn perpetual_storage_usd<S: Scalar>(quote: &PriceQuote<S>, data_size_gb: S, d: S) -> Result<S, FeeError> {
    if data_size_gb < S::zero() {
        return Err(FeeError::NegativeSize);
    }
    perpetual_cost(data_size_gb * quote.storage_cost_gb_year_usd(), d)
}

/// Perpetual storage of `data_size_gb` on one node, in native units.
pub fn perpetual_storage_price<S: Scalar>(quote: &PriceQuote<S>, data_size_gb: S, d: S) -> Result<u128, FeeError> {
    quote.usd_to_native(perpetual_storage_usd(quote, data_size_gb, d)?)
}

/// Fee components in smallest native units.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeeBreakdown {
    pub computational: u128,
    pub storage_perpetual: u128,
    pub total: u128,
    pub validators: u32,
    pub data_size_gb: String,
}

impl FeeBreakdown {
    /// Renders a native amount as a token decimal string.
    pub fn format_native(units: u128) -> String {
        let r = Rational::new(units.into(), num_traits::pow(num_bigint::BigInt::from(10), NATIVE_DECIMALS as usize));
        format_rational(&r, NATIVE_DECIMALS)
    }
}

/// Each component is rounded up on its own; the total is their sum.
pub fn quote_transaction<S: Scalar>(
    quote: &PriceQuote<S>,
    data_size_gb: &str,
    validators: u32,
    annual_decline: &S,
) -> Result<FeeBreakdown, FeeError> {
    let size = S::from_decimal_str(data_size_gb).ok_or_else(|| FeeError::Fixture(format!("bad size {data_size_gb:?}")))?;
    let storage_usd = perpetual_storage_usd(quote, size, annual_decline.clone())? * validators_scalar(validators)?;
    let computational = computational_fee(quote, validators)?;
    let storage_perpetual = quote.usd_to_native(storage_usd)?;
    Ok(FeeBreakdown {
        computational,
        storage_perpetual,
        total: computational.checked_add(storage_perpetual).ok_or(FeeError::Overflow)?,
        validators,
        data_size_gb: data_size_gb.trim().to_string(),
    })
}
