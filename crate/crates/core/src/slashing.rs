//! Perpetrations, the blacklist ladder and enforcement.
//!
//! Blacklist periods are measured in half-months. Scalable offenses start at
//! the ladder rung of their base period and climb one rung per repeat of the
//! same kind; the rung after 20 years is permanent exclusion.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::time::{Timestamp, SECONDS_PER_HALF_MONTH};
use crate::vortex::Vortex;
use crate::NodeId;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SlashingError {
    #[error("unknown perpetration kind {0:?}")]
    UnknownKind(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum PerpetrationKind {
    MissedMonthlyVerification,
    MismatchedProposalType,
    FailedFormationDelivery,
    Offline48h,
    MismatchedProposalTypeNoRight,
    UptimeBelow91,
    FalseTransaction,
}

impl PerpetrationKind {
    pub const ALL: [PerpetrationKind; 7] = [
        PerpetrationKind::MissedMonthlyVerification,
        PerpetrationKind::MismatchedProposalType,
        PerpetrationKind::FailedFormationDelivery,
        PerpetrationKind::Offline48h,
        PerpetrationKind::MismatchedProposalTypeNoRight,
        PerpetrationKind::UptimeBelow91,
        PerpetrationKind::FalseTransaction,
    ];

    /// Kebab-case name used on the command line.
    pub fn slug(self) -> &'static str {
        match self {
            PerpetrationKind::MissedMonthlyVerification => "missed-monthly-verification",
            PerpetrationKind::MismatchedProposalType => "mismatched-proposal-type",
            PerpetrationKind::FailedFormationDelivery => "failed-formation-delivery",
            PerpetrationKind::Offline48h => "offline48h",
            PerpetrationKind::MismatchedProposalTypeNoRight => "mismatched-proposal-type-no-right",
            PerpetrationKind::UptimeBelow91 => "uptime-below91",
            PerpetrationKind::FalseTransaction => "false-transaction",
        }
    }

    pub fn perpetration(self) -> Perpetration {
        use Effect::*;
        use PerpetrationKind::*;
        let (severity, base_half_months, scalable, effects): (u8, u32, bool, &[Effect]) = match self {
            MissedMonthlyVerification => (0, 1, false, &[ExcludedFromValidators, FeesStopped]),
            MismatchedProposalType => (1, 2, false, &[]),
            FailedFormationDelivery => (2, 2, true, &[]),
            Offline48h => (2, 1, true, &[Deactivated, FeesStopped]),
            MismatchedProposalTypeNoRight => (3, 2, true, &[Deactivated, FeesStopped]),
            UptimeBelow91 => (3, 2, true, &[]),
            FalseTransaction => (5, 240, true, &[Deactivated, FeesStopped, DevotionNullified]),
        };
        Perpetration {
            kind: self,
            severity,
            base_period: BlacklistPeriod::HalfMonths(base_half_months),
            scalable,
            effects: effects.iter().copied().collect(),
        }
    }
}

impl fmt::Display for PerpetrationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.slug())
    }
}

impl FromStr for PerpetrationKind {
    type Err = SlashingError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm: String = s.chars().filter(|c| c.is_ascii_alphanumeric()).collect::<String>().to_ascii_lowercase();
        PerpetrationKind::ALL
            .into_iter()
            .find(|k| k.slug().replace('-', "") == norm)
            .ok_or_else(|| SlashingError::UnknownKind(s.to_string()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Effect {
    ExcludedFromValidators,
    Deactivated,
    FeesStopped,
    DevotionNullified,
}

/// Length of a blacklisting.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum BlacklistPeriod {
    HalfMonths(u32),
    Forever,
}

impl BlacklistPeriod {
    pub fn seconds(self) -> Option<Timestamp> {
        match self {
            BlacklistPeriod::HalfMonths(h) => Some(h as Timestamp * SECONDS_PER_HALF_MONTH),
            BlacklistPeriod::Forever => None,
        }
    }

    pub fn months(self) -> Option<f64> {
        match self {
            BlacklistPeriod::HalfMonths(h) => Some(h as f64 / 2.0),
            BlacklistPeriod::Forever => None,
        }
    }
}

impl fmt::Display for BlacklistPeriod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BlacklistPeriod::HalfMonths(h) if h % 2 == 1 => write!(f, "{}.5", h / 2),
            BlacklistPeriod::HalfMonths(h) => write!(f, "{}", h / 2),
            BlacklistPeriod::Forever => f.write_str("forever"),
        }
    }
}

/// Months as a JSON number, or the string `"forever"`.
impl Serialize for BlacklistPeriod {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            BlacklistPeriod::HalfMonths(h) if h % 2 == 0 => s.serialize_u32(h / 2),
            BlacklistPeriod::HalfMonths(h) => s.serialize_f64(*h as f64 / 2.0),
            BlacklistPeriod::Forever => s.serialize_str("forever"),
        }
    }
}

impl<'de> Deserialize<'de> for BlacklistPeriod {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        use serde::de::Error;
        match serde_json::Value::deserialize(d)? {
            serde_json::Value::String(s) if s == "forever" => Ok(BlacklistPeriod::Forever),
            serde_json::Value::Number(n) => {
                let halves = n.as_f64().map(|m| m * 2.0).filter(|h| h.fract() == 0.0 && *h >= 0.0);
                halves.map(|h| BlacklistPeriod::HalfMonths(h as u32)).ok_or_else(|| D::Error::custom("period must be a multiple of 0.5 months"))
            }
            other => Err(D::Error::custom(format!("invalid blacklist period {other}"))),
        }
    }
}

/// Finite rungs in half-months: 0.5, 1, 2, 3, 6, 12, 24, 36, 120, 240 months.
pub const LADDER_HALF_MONTHS: [u32; 10] = [1, 2, 4, 6, 12, 24, 48, 72, 240, 480];

/// Rung `index`; from index 10 on, forever.
pub fn scaling_ladder(index: usize) -> BlacklistPeriod {
    LADDER_HALF_MONTHS
        .get(index)
        .map_or(BlacklistPeriod::Forever, |&h| BlacklistPeriod::HalfMonths(h))
}

/// Ladder index of a period; periods between rungs map to the rung below.
pub fn ladder_index(period: BlacklistPeriod) -> usize {
    match period {
        BlacklistPeriod::Forever => LADDER_HALF_MONTHS.len(),
        BlacklistPeriod::HalfMonths(h) => LADDER_HALF_MONTHS.iter().rposition(|&r| r <= h).unwrap_or(0),
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Perpetration {
    pub kind: PerpetrationKind,
    pub severity: u8,
    pub base_period: BlacklistPeriod,
    pub scalable: bool,
    pub effects: BTreeSet<Effect>,
}

/// The full kind-to-consequence table.
pub fn perpetration_table() -> Vec<Perpetration> {
    PerpetrationKind::ALL.iter().map(|k| k.perpetration()).collect()
}

/// Period for the offense with zero-based `offense_index` among the node's
/// offenses of that kind.
pub fn period_for(kind: PerpetrationKind, offense_index: usize) -> BlacklistPeriod {
    let p = kind.perpetration();
    if !p.scalable {
        return p.base_period;
    }
    scaling_ladder(ladder_index(p.base_period).saturating_add(offense_index))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlacklistEntry {
    pub node: NodeId,
    pub kind: PerpetrationKind,
    pub offense_index: usize,
    pub period: BlacklistPeriod,
    pub effects: BTreeSet<Effect>,
    pub start: Timestamp,
    /// Exclusive end; `None` for a permanent entry.
    pub until: Option<Timestamp>,
}

impl BlacklistEntry {
    pub fn covers(&self, now: Timestamp) -> bool {
        now >= self.start && self.until.is_none_or(|u| now < u)
    }
}

/// Prior offense counts per node and kind.
pub type OffenseHistory = BTreeMap<(NodeId, PerpetrationKind), usize>;

/// Builds the entry for a new offense given the history so far.
pub fn slash(node: NodeId, kind: PerpetrationKind, history: &OffenseHistory, now: Timestamp) -> BlacklistEntry {
    let offense_index = history.get(&(node, kind)).copied().unwrap_or(0);
    let period = period_for(kind, offense_index);
    BlacklistEntry {
        node,
        kind,
        offense_index,
        period,
        effects: kind.perpetration().effects,
        start: now,
        until: period.seconds().map(|s| now.saturating_add(s)),
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Blacklist {
    pub entries: Vec<BlacklistEntry>,
    #[serde(with = "history_pairs")]
    pub history: OffenseHistory,
}

impl Blacklist {
    /// Records a new offense and returns its entry.
    pub fn slash(&mut self, node: NodeId, kind: PerpetrationKind, now: Timestamp) -> BlacklistEntry {
        let entry = slash(node, kind, &self.history, now);
        *self.history.entry((node, kind)).or_insert(0) += 1;
        self.entries.push(entry.clone());
        entry
    }

    pub fn is_blacklisted(&self, node: NodeId, now: Timestamp) -> bool {
        self.entries.iter().any(|e| e.node == node && e.covers(now))
    }

    pub fn entries_for(&self, node: NodeId) -> impl Iterator<Item = &BlacklistEntry> {
        self.entries.iter().filter(move |e| e.node == node)
    }
}

mod history_pairs {
    use super::*;
    use serde::{Deserializer, Serializer};

    #[derive(Serialize, Deserialize)]
    struct Row {
        node: NodeId,
        kind: PerpetrationKind,
        count: usize,
    }

    pub fn serialize<S: Serializer>(h: &OffenseHistory, s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(h.iter().map(|(&(node, kind), &count)| Row { node, kind, count }))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<OffenseHistory, D::Error> {
        Ok(Vec::<Row>::deserialize(d)?.into_iter().map(|r| ((r.node, r.kind), r.count)).collect())
    }
}

/// Rosters touched by enforcement.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkState {
    pub validators: BTreeSet<NodeId>,
    pub fee_roster: BTreeSet<NodeId>,
    pub deactivated: BTreeSet<NodeId>,
}

impl NetworkState {
    /// Every node validating and receiving fees.
    pub fn with_nodes(nodes: impl IntoIterator<Item = NodeId>) -> Self {
        let validators: BTreeSet<NodeId> = nodes.into_iter().collect();
        Self { fee_roster: validators.clone(), validators, deactivated: BTreeSet::new() }
    }

    /// Returns a node to the rosters once its blacklisting has run out.
    pub fn restore(&mut self, node: NodeId) {
        self.deactivated.remove(&node);
        self.validators.insert(node);
        self.fee_roster.insert(node);
    }
}

/// Applies an entry's effects. Every blacklisted node leaves the validator
/// set, since it may not sign while listed; deactivation, the fee stop and
/// devotion nullification follow the table.
pub fn apply_effects(entry: &BlacklistEntry, state: &mut NetworkState, mut dao: Option<&mut Vortex>) {
    let node = entry.node;
    state.validators.remove(&node);
    for effect in &entry.effects {
        match effect {
            Effect::ExcludedFromValidators => {}
            Effect::Deactivated => {
                state.deactivated.insert(node);
            }
            Effect::FeesStopped => {
                state.fee_roster.remove(&node);
            }
            Effect::DevotionNullified => {
                if let Some(dao) = dao.as_deref_mut() {
                    let _ = dao.nullify_devotion(node, entry.start);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::time::SECONDS_PER_DAY;
    use crate::time::SECONDS_PER_YEAR;
    use crate::vortex::{Tier, VortexConfig};
    use proptest::prelude::*;

    #[test]
    fn ladder_examples() {
        assert_eq!(scaling_ladder(0), BlacklistPeriod::HalfMonths(1));
        assert_eq!(scaling_ladder(5).months(), Some(12.0));
        assert_eq!(scaling_ladder(10), BlacklistPeriod::Forever);
        assert_eq!(scaling_ladder(99), BlacklistPeriod::Forever);
        assert_eq!(ladder_index(BlacklistPeriod::HalfMonths(240)), 8);
    }

    #[test]
    fn offline_progression() {
        let mut bl = Blacklist::default();
        let node = NodeId(1);
        let first = bl.slash(node, PerpetrationKind::Offline48h, 0);
        assert_eq!(first.period.to_string(), "0.5");
        assert_eq!(first.effects, [Effect::Deactivated, Effect::FeesStopped].into());
        let second = bl.slash(node, PerpetrationKind::Offline48h, 0);
        assert_eq!(second.period.to_string(), "1");
        let path: Vec<String> = (0..10).map(|_| bl.slash(node, PerpetrationKind::Offline48h, 0).period.to_string()).collect();
        assert_eq!(path, ["2", "3", "6", "12", "24", "36", "120", "240", "forever", "forever"]);
    }

    #[test]
    fn non_scalable_kinds_keep_their_base() {
        let mut bl = Blacklist::default();
        for _ in 0..5 {
            assert_eq!(bl.slash(NodeId(0), PerpetrationKind::MismatchedProposalType, 0).period, BlacklistPeriod::HalfMonths(2));
        }
        let uptime = bl.slash(NodeId(0), PerpetrationKind::UptimeBelow91, 0);
        assert_eq!(uptime.period, BlacklistPeriod::HalfMonths(2));
        assert!(uptime.effects.is_empty());
    }

    #[test]
    fn false_transaction() {
        let mut bl = Blacklist::default();
        let e = bl.slash(NodeId(3), PerpetrationKind::FalseTransaction, 0);
        assert_eq!(e.period.months(), Some(120.0));
        assert!(e.effects.contains(&Effect::DevotionNullified));
        assert_eq!(bl.slash(NodeId(3), PerpetrationKind::FalseTransaction, 0).period.months(), Some(240.0));
        assert_eq!(bl.slash(NodeId(3), PerpetrationKind::FalseTransaction, 0).period, BlacklistPeriod::Forever);
    }

    #[test]
    fn half_month_window() {
        let mut bl = Blacklist::default();
        bl.slash(NodeId(0), PerpetrationKind::MissedMonthlyVerification, 0);
        assert!(bl.is_blacklisted(NodeId(0), 10 * SECONDS_PER_DAY));
        assert!(!bl.is_blacklisted(NodeId(0), 16 * SECONDS_PER_DAY));
        assert!(!bl.is_blacklisted(NodeId(1), 0));
        assert!(!bl.is_blacklisted(NodeId(0), -1));
        let mut forever = Blacklist::default();
        for _ in 0..3 {
            forever.slash(NodeId(0), PerpetrationKind::FalseTransaction, 0);
        }
        assert!(forever.is_blacklisted(NodeId(0), i64::MAX));
    }

    #[test]
    fn effects_on_state() {
        let mut state = NetworkState::with_nodes((0..3).map(NodeId));
        let mut bl = Blacklist::default();
        let e = bl.slash(NodeId(0), PerpetrationKind::MissedMonthlyVerification, 0);
        apply_effects(&e, &mut state, None);
        assert!(!state.validators.contains(&NodeId(0)));
        assert!(!state.fee_roster.contains(&NodeId(0)));
        assert!(!state.deactivated.contains(&NodeId(0)));

        let e = bl.slash(NodeId(1), PerpetrationKind::UptimeBelow91, 0);
        apply_effects(&e, &mut state, None);
        assert!(state.fee_roster.contains(&NodeId(1)));

        let mut dao = Vortex::new(VortexConfig::default());
        dao.add_governor(NodeId(2), 0, true, 5 * SECONDS_PER_YEAR).unwrap();
        assert_eq!(dao.record(NodeId(2)).unwrap().tier, Tier::Consul);
        let now = 5 * SECONDS_PER_YEAR;
        let e = bl.slash(NodeId(2), PerpetrationKind::FalseTransaction, now);
        apply_effects(&e, &mut state, Some(&mut dao));
        let rec = dao.record(NodeId(2)).unwrap();
        assert_eq!(rec.governing_since, Some(now));
        assert!(!rec.formation_participant);
        assert_eq!(rec.tier, Tier::Citizen);
        assert!(state.deactivated.contains(&NodeId(2)));
    }

    #[test]
    fn kinds_parse_from_cli_spellings() {
        for k in PerpetrationKind::ALL {
            assert_eq!(k.slug().parse::<PerpetrationKind>().unwrap(), k);
        }
        assert_eq!("Offline48h".parse::<PerpetrationKind>().unwrap(), PerpetrationKind::Offline48h);
        assert!("nope".parse::<PerpetrationKind>().is_err());
    }

    #[test]
    fn period_json() {
        let v = serde_json::to_string(&[BlacklistPeriod::HalfMonths(1), BlacklistPeriod::HalfMonths(240), BlacklistPeriod::Forever]).unwrap();
        assert_eq!(v, r#"[0.5,120,"forever"]"#);
        let back: Vec<BlacklistPeriod> = serde_json::from_str(&v).unwrap();
        assert_eq!(back[2], BlacklistPeriod::Forever);
        assert!(serde_json::from_str::<BlacklistPeriod>("0.3").is_err());
    }

    proptest! {
        #[test]
        fn ladder_is_monotone(i in 0usize..20) {
            prop_assert!(scaling_ladder(i) <= scaling_ladder(i + 1));
        }

        #[test]
        fn repeats_never_shorten(kind_idx in 0usize..7, repeats in 1usize..15) {
            let kind = PerpetrationKind::ALL[kind_idx];
            let periods: Vec<_> = (0..repeats).map(|i| period_for(kind, i)).collect();
            prop_assert!(periods.windows(2).all(|w| w[0] <= w[1]));
        }
    }
}
