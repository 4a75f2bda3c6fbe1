//! Fath rebalancing.
//!
//! Total fees of consecutive periods are compared. When they rise by a ratio
//! `r`, the supply is scaled by `1 + r` and the new tokens are minted to every
//! balance in proportion (inFath); when they fall, the same proportional burn
//! applies (outFath). Balances are integers; the per-account split uses
//! largest-remainder apportionment so the ledger always sums to the new supply.

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FathError {
    #[error("previous period paid no fees, so the change ratio is undefined")]
    UndefinedBaseline,
    #[error("ratio {0} would leave a negative supply")]
    RatioBelowNegativeOne(String),
    #[error("balances sum to {sum} but total supply is {supply}")]
    SupplyMismatch { sum: u128, supply: u128 },
    #[error("supply does not fit in 128 bits")]
    Overflow,
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AccountId(pub String);

impl fmt::Display for AccountId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for AccountId {
    fn from(s: &str) -> Self {
        AccountId(s.to_string())
    }
}

/// Balances in smallest units. Iteration order (and so tie-breaking) is the
/// account id order.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LedgerSnapshot {
    balances: BTreeMap<AccountId, u128>,
    total_supply: u128,
}

impl LedgerSnapshot {
    pub fn new(balances: BTreeMap<AccountId, u128>) -> Result<Self, FathError> {
        let mut total: u128 = 0;
        for b in balances.values() {
            total = total.checked_add(*b).ok_or(FathError::Overflow)?;
        }
        Ok(Self { balances, total_supply: total })
    }

    pub fn from_pairs<I, K>(pairs: I) -> Result<Self, FathError>
    where
        I: IntoIterator<Item = (K, u128)>,
        K: Into<AccountId>,
    {
        let mut map = BTreeMap::new();
        for (k, v) in pairs {
            *map.entry(k.into()).or_insert(0) += v;
        }
        Self::new(map)
    }

    pub fn total_supply(&self) -> u128 {
        self.total_supply
    }

    pub fn balance(&self, account: &AccountId) -> u128 {
        self.balances.get(account).copied().unwrap_or(0)
    }

    pub fn balances(&self) -> &BTreeMap<AccountId, u128> {
        &self.balances
    }

    /// Adds `amount` to an account, creating it if needed.
    pub fn credit(&mut self, account: &AccountId, amount: u128) -> Result<(), FathError> {
        let supply = self.total_supply.checked_add(amount).ok_or(FathError::Overflow)?;
        *self.balances.entry(account.clone()).or_insert(0) += amount;
        self.total_supply = supply;
        Ok(())
    }

    /// Checks that balances sum to the recorded supply.
    pub fn check(&self) -> Result<(), FathError> {
        let sum: u128 = self.balances.values().sum();
        if sum != self.total_supply {
            return Err(FathError::SupplyMismatch { sum, supply: self.total_supply });
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PeriodStats {
    pub period_index: u64,
    pub fees_paid: u128,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum RebalanceKind {
    #[serde(rename = "inFath")]
    InFath,
    #[serde(rename = "outFath")]
    OutFath,
    #[serde(rename = "none")]
    None,
}

impl fmt::Display for RebalanceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RebalanceKind::InFath => "inFath",
            RebalanceKind::OutFath => "outFath",
            RebalanceKind::None => "none",
        })
    }
}

/// Record of one rebalance. Serializes as
/// `{"period","kind","ratio_num","ratio_den","new_supply","deltas"}`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RebalanceOutcome {
    pub period: u64,
    pub kind: RebalanceKind,
    pub ratio_num: i128,
    pub ratio_den: i128,
    pub old_supply: u128,
    pub new_supply: u128,
    pub deltas: BTreeMap<AccountId, i128>,
}

impl RebalanceOutcome {
    pub fn ratio(&self) -> BigRational {
        BigRational::new(self.ratio_num.into(), self.ratio_den.into())
    }
}

/// `(curr - prev) / prev`.
pub fn compute_ratio(prev: &PeriodStats, curr: &PeriodStats) -> Result<BigRational, FathError> {
    if prev.fees_paid == 0 {
        return Err(FathError::UndefinedBaseline);
    }
    let p = BigInt::from(prev.fees_paid);
    Ok(BigRational::new(BigInt::from(curr.fees_paid) - &p, p))
}

fn kind_of(ratio: &BigRational) -> RebalanceKind {
    if ratio.is_positive() {
        RebalanceKind::InFath
    } else if ratio.is_negative() {
        RebalanceKind::OutFath
    } else {
        RebalanceKind::None
    }
}

fn to_u128(x: &BigInt) -> Result<u128, FathError> {
    x.to_u128().ok_or(FathError::Overflow)
}

/// Splits `total` across `weights` in proportion. Each share is the floor of
/// its exact quota; leftover units go to the largest fractional parts, ties
/// to the earlier index.
pub fn apportion(weights: &[BigRational], total: u128) -> Result<Vec<u128>, FathError> {
    let mut shares = Vec::with_capacity(weights.len());
    let mut fracs = Vec::with_capacity(weights.len());
    let mut assigned: u128 = 0;
    for (i, w) in weights.iter().enumerate() {
        let floor = w.floor();
        let share = to_u128(&floor.to_integer())?;
        assigned = assigned.checked_add(share).ok_or(FathError::Overflow)?;
        shares.push(share);
        fracs.push((w - floor, i));
    }
    let leftover = total.checked_sub(assigned).ok_or(FathError::Overflow)?;
    if leftover > shares.len() as u128 {
        return Err(FathError::Overflow);
    }
    fracs.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    for (_, i) in fracs.into_iter().take(leftover as usize) {
        shares[i] += 1;
    }
    Ok(shares)
}

/// Scales every balance by `1 + ratio`. The new supply is
/// `round(old_supply * (1 + ratio))`, rounding half away from zero.
pub fn rebalance(
    ledger: &LedgerSnapshot,
    ratio: &BigRational,
    period: u64,
) -> Result<(LedgerSnapshot, RebalanceOutcome), FathError> {
    let factor = BigRational::one() + ratio;
    if factor.is_negative() {
        return Err(FathError::RatioBelowNegativeOne(ratio.to_string()));
    }
    let old_supply = ledger.total_supply;
    let new_supply = to_u128(&(BigRational::from_integer(old_supply.into()) * &factor).round().to_integer())?;
    let weights: Vec<BigRational> = ledger
        .balances
        .values()
        .map(|&b| BigRational::from_integer(b.into()) * &factor)
        .collect();
    let shares = apportion(&weights, new_supply)?;
    let mut balances = BTreeMap::new();
    let mut deltas = BTreeMap::new();
    for ((id, &old), new) in ledger.balances.iter().zip(shares) {
        balances.insert(id.clone(), new);
        deltas.insert(id.clone(), new as i128 - old as i128);
    }
    let (num, den) = (ratio.numer(), ratio.denom());
    let g = num.gcd(den);
    let outcome = RebalanceOutcome {
        period,
        kind: kind_of(ratio),
        ratio_num: (num / &g).to_i128().ok_or(FathError::Overflow)?,
        ratio_den: (den / &g).to_i128().ok_or(FathError::Overflow)?,
        old_supply,
        new_supply,
        deltas,
    };
    Ok((LedgerSnapshot { balances, total_supply: new_supply }, outcome))
}

/// Compares the two periods and rebalances. A zero-fee baseline leaves the
/// ledger untouched with kind `none`.
pub fn run_period(
    ledger: &LedgerSnapshot,
    prev: &PeriodStats,
    curr: &PeriodStats,
) -> Result<(LedgerSnapshot, RebalanceOutcome), FathError> {
    match compute_ratio(prev, curr) {
        Ok(ratio) => rebalance(ledger, &ratio, curr.period_index),
        Err(FathError::UndefinedBaseline) => rebalance(ledger, &BigRational::zero(), curr.period_index),
        Err(e) => Err(e),
    }
}

/// One row of the worked example.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DemoRow {
    pub year: u64,
    pub fees_paid: u128,
    pub supply_before: u128,
    pub kind: RebalanceKind,
    pub ratio_num: i128,
    pub ratio_den: i128,
    pub supply_after: u128,
    pub wallet_after: u128,
}

/// Account holding the tracked wallet in [`worked_example`].
pub const DEMO_WALLET: &str = "wallet";

/// Three yearly periods: fees 1,000,000 then 2,000,000 then 1,500,000 on a
/// 10,000,000 supply that includes a 1000-unit wallet.
pub fn worked_example() -> Result<Vec<DemoRow>, FathError> {
    let wallet = AccountId::from(DEMO_WALLET);
    let mut ledger = LedgerSnapshot::from_pairs([(DEMO_WALLET, 1_000u128), ("others", 9_999_000)])?;
    let fees = [1_000_000u128, 2_000_000, 1_500_000];
    let mut rows = vec![DemoRow {
        year: 0,
        fees_paid: fees[0],
        supply_before: ledger.total_supply(),
        kind: RebalanceKind::None,
        ratio_num: 0,
        ratio_den: 1,
        supply_after: ledger.total_supply(),
        wallet_after: ledger.balance(&wallet),
    }];
    for year in 1..fees.len() {
        let prev = PeriodStats { period_index: year as u64 - 1, fees_paid: fees[year - 1] };
        let curr = PeriodStats { period_index: year as u64, fees_paid: fees[year] };
        let supply_before = ledger.total_supply();
        let (next, outcome) = run_period(&ledger, &prev, &curr)?;
        ledger = next;
        rows.push(DemoRow {
            year: year as u64,
            fees_paid: fees[year],
            supply_before,
            kind: outcome.kind,
            ratio_num: outcome.ratio_num,
            ratio_den: outcome.ratio_den,
            supply_after: ledger.total_supply(),
            wallet_after: ledger.balance(&wallet),
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decimal::ratio;
    use proptest::prelude::*;

    fn stats(i: u64, fees: u128) -> PeriodStats {
        PeriodStats { period_index: i, fees_paid: fees }
    }

    #[test]
    fn ratio_examples() {
        assert_eq!(compute_ratio(&stats(0, 1_000_000), &stats(1, 2_000_000)), Ok(ratio(1, 1)));
        assert_eq!(compute_ratio(&stats(1, 2_000_000), &stats(2, 1_500_000)), Ok(ratio(-1, 4)));
        assert_eq!(compute_ratio(&stats(0, 5), &stats(1, 5)), Ok(ratio(0, 1)));
        assert_eq!(compute_ratio(&stats(0, 0), &stats(1, 5)), Err(FathError::UndefinedBaseline));
    }

    #[test]
    fn worked_example_paths() {
        let rows = worked_example().unwrap();
        let supply: Vec<u128> = rows.iter().map(|r| r.supply_after).collect();
        let wallet: Vec<u128> = rows.iter().map(|r| r.wallet_after).collect();
        assert_eq!(supply, vec![10_000_000, 20_000_000, 15_000_000]);
        assert_eq!(wallet, vec![1000, 2000, 1500]);
        assert_eq!(rows[1].kind, RebalanceKind::InFath);
        assert_eq!(rows[2].kind, RebalanceKind::OutFath);
        assert_eq!((rows[2].ratio_num, rows[2].ratio_den), (-1, 4));
    }

    #[test]
    fn zero_ratio_is_identity() {
        let ledger = LedgerSnapshot::from_pairs([("a", 7u128), ("b", 3)]).unwrap();
        let (next, out) = rebalance(&ledger, &ratio(0, 1), 1).unwrap();
        assert_eq!(next, ledger);
        assert_eq!(out.kind, RebalanceKind::None);
        assert!(out.deltas.values().all(|&d| d == 0));
    }

    #[test]
    fn zero_fee_baseline_does_nothing() {
        let ledger = LedgerSnapshot::from_pairs([("a", 7u128)]).unwrap();
        let (next, out) = run_period(&ledger, &stats(0, 0), &stats(1, 100)).unwrap();
        assert_eq!(next, ledger);
        assert_eq!(out.kind, RebalanceKind::None);
    }

    #[test]
    fn single_account_holds_everything() {
        let mut ledger = LedgerSnapshot::from_pairs([("solo", 333u128)]).unwrap();
        for (num, den) in [(1, 3), (-2, 7), (5, 1), (-1, 2)] {
            ledger = rebalance(&ledger, &ratio(num, den), 0).unwrap().0;
            assert_eq!(ledger.balance(&"solo".into()), ledger.total_supply());
        }
    }

    #[test]
    fn rejects_ratio_below_minus_one() {
        let ledger = LedgerSnapshot::from_pairs([("a", 7u128)]).unwrap();
        assert!(matches!(rebalance(&ledger, &ratio(-3, 2), 0), Err(FathError::RatioBelowNegativeOne(_))));
        // A full burn is allowed.
        assert_eq!(rebalance(&ledger, &ratio(-1, 1), 0).unwrap().0.total_supply(), 0);
    }

    #[test]
    fn leftover_goes_to_largest_fraction_then_first() {
        let w = [ratio(5, 2), ratio(5, 2), ratio(11, 4)];
        // floors 2,2,2; fractions .5,.5,.75; 2 leftover
        assert_eq!(apportion(&w, 8).unwrap(), vec![3, 2, 3]);
    }

    #[test]
    fn outcome_json_shape() {
        let ledger = LedgerSnapshot::from_pairs([("a", 10u128)]).unwrap();
        let (_, out) = rebalance(&ledger, &ratio(1, 2), 4).unwrap();
        let v = serde_json::to_value(&out).unwrap();
        assert_eq!(v["period"], 4);
        assert_eq!(v["kind"], "inFath");
        assert_eq!(v["ratio_num"], 1);
        assert_eq!(v["ratio_den"], 2);
        assert_eq!(v["new_supply"], 15);
    }

    fn ledger_strategy() -> impl Strategy<Value = LedgerSnapshot> {
        prop::collection::vec(0u128..1_000_000_000, 1..30).prop_map(|v| {
            LedgerSnapshot::from_pairs(v.into_iter().enumerate().map(|(i, b)| (AccountId(format!("acct{i:03}")), b))).unwrap()
        })
    }

    fn ratio_strategy() -> impl Strategy<Value = BigRational> {
        (-999i64..5000, 1i64..1000).prop_map(|(n, d)| {
            let r = ratio(n, d);
            if r <= ratio(-1, 1) { ratio(0, 1) } else { r }
        })
    }

    proptest! {
        #[test]
        fn conservation_and_proportionality(ledger in ledger_strategy(), r in ratio_strategy()) {
            let (next, out) = rebalance(&ledger, &r, 0).unwrap();
            next.check().unwrap();
            prop_assert_eq!(next.total_supply(), out.new_supply);
            let factor = BigRational::one() + &r;
            for (id, &old) in ledger.balances() {
                let ideal = BigRational::from_integer(old.into()) * &factor;
                let got = BigRational::from_integer(next.balance(id).into());
                prop_assert!((got - ideal).abs() < BigRational::one());
                let delta = out.deltas[id];
                match out.kind {
                    RebalanceKind::InFath => prop_assert!(delta >= 0),
                    RebalanceKind::OutFath => prop_assert!(delta <= 0),
                    RebalanceKind::None => prop_assert_eq!(delta, 0),
                }
            }
        }

        #[test]
        fn share_is_preserved(ledger in ledger_strategy(), r in ratio_strategy()) {
            prop_assume!(ledger.total_supply() > 0);
            let (next, _) = rebalance(&ledger, &r, 0).unwrap();
            prop_assume!(next.total_supply() > 0);
            let n = ledger.balances().len() as i64;
            let tol = ratio(n, 1) / BigRational::from_integer(next.total_supply().into());
            for (id, &old) in ledger.balances() {
                let before = BigRational::new(old.into(), ledger.total_supply().into());
                let after = BigRational::new(next.balance(id).into(), next.total_supply().into());
                prop_assert!((after - before).abs() <= tol.clone());
            }
        }

        #[test]
        fn mint_then_matching_burn_round_trips(ledger in ledger_strategy(), n in 1i64..5000, d in 1i64..1000) {
            let r = ratio(n, d);
            let back = -(&r) / (BigRational::one() + &r);
            let (up, _) = rebalance(&ledger, &r, 0).unwrap();
            let (down, _) = rebalance(&up, &back, 1).unwrap();
            for (id, &old) in ledger.balances() {
                prop_assert!(down.balance(id).abs_diff(old) <= 1);
            }
        }
    }
}
