//! Log checker. Replays tickets and blacklistings from the events alone and
//! reports every record that contradicts them.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::config::{Fault, SimConfig};
use super::event::{EventKind, SimEvent, SkipReason};
use crate::slashing::Effect;
use crate::time::Timestamp;
use crate::NodeId;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub seq: u64,
    pub slot: u64,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "seq {} slot {}: {}", self.seq, self.slot, self.message)
    }
}

#[derive(Default)]
struct Replay {
    expiry: BTreeMap<NodeId, u64>,
    /// `(start, until)` per blacklisting.
    windows: BTreeMap<NodeId, Vec<(Timestamp, Option<Timestamp>)>>,
}

impl Replay {
    fn listed(&self, node: NodeId, now: Timestamp) -> bool {
        self.windows
            .get(&node)
            .is_some_and(|ws| ws.iter().any(|&(s, u)| now >= s && u.is_none_or(|u| now < u)))
    }

    fn authorized(&self, node: NodeId, slot: u64, now: Timestamp) -> bool {
        self.expiry.get(&node).is_some_and(|&e| e > slot) && !self.listed(node, now)
    }
}

fn offline(cfg: &SimConfig, node: NodeId, slot: u64) -> bool {
    cfg.faults.iter().any(|f| {
        matches!(f, Fault::Offline { node: n, from_slot, to_slot } if *n == node.0 && (*from_slot..*to_slot).contains(&slot))
    })
}

/// Checks that every author held a valid ticket, was not blacklisted and was
/// the round-robin pick; that fees are conserved; and that sequence numbers
/// and slots are ordered. An empty result means the log is consistent.
pub fn check_invariants(events: &[SimEvent], cfg: &SimConfig) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut replay = Replay::default();
    let mut last: Option<&SimEvent> = None;
    for e in events {
        let mut bad = |message: String| out.push(Violation { seq: e.seq, slot: e.slot, message });
        if let Some(prev) = last {
            if e.seq <= prev.seq {
                bad(format!("sequence number {} follows {}", e.seq, prev.seq));
            }
            if e.slot < prev.slot {
                bad(format!("slot {} follows slot {}", e.slot, prev.slot));
            }
        }
        last = Some(e);
        let now = cfg.slot_time(e.slot);
        match &e.kind {
            EventKind::TicketRenewed { node, expiry_slot } => {
                if replay.listed(*node, now) {
                    bad(format!("{node} renewed a ticket while blacklisted"));
                }
                replay.expiry.insert(*node, *expiry_slot);
            }
            EventKind::Slashed { node, perpetration, until, .. } => {
                replay.windows.entry(*node).or_default().push((now, *until));
                if perpetration.perpetration().effects.contains(&Effect::Deactivated) {
                    let exp = replay.expiry.entry(*node).or_default();
                    *exp = (*exp).min(e.slot);
                }
            }
            EventKind::BlockAuthored { author } => {
                if !replay.authorized(*author, e.slot, now) {
                    bad(format!("{author} authored without a valid ticket or while blacklisted"));
                }
                if offline(cfg, *author, e.slot) {
                    bad(format!("{author} authored while offline"));
                }
                let roster = roster(&replay, cfg, e.slot, now);
                if super::next_author(e.slot, &roster) != Some(*author) {
                    bad(format!("{author} authored out of turn"));
                }
            }
            EventKind::SlotSkipped { reason, expected } => {
                let roster = roster(&replay, cfg, e.slot, now);
                let pick = super::next_author(e.slot, &roster);
                match reason {
                    SkipReason::EmptyRoster if pick.is_some() => bad("slot skipped with a non-empty roster".into()),
                    SkipReason::AuthorOffline if pick != *expected => bad("skipped slot names the wrong author".into()),
                    SkipReason::AuthorOffline if expected.is_some_and(|n| !offline(cfg, n, e.slot)) => {
                        bad("skipped slot blames an online author".into())
                    }
                    _ => {}
                }
            }
            EventKind::FeesDistributed { epoch, fees, vault_delta, payouts } => {
                let paid: u128 = payouts.values().sum();
                if paid.checked_add(*vault_delta) != Some(*fees) {
                    bad(format!("epoch {epoch}: {fees} in, {paid} paid plus {vault_delta} to the vault"));
                }
                if *fees != cfg.fees_for_epoch(*epoch) {
                    bad(format!("epoch {epoch}: distributed {fees}, scenario injects {}", cfg.fees_for_epoch(*epoch)));
                }
                for node in payouts.keys() {
                    if !replay.authorized(*node, e.slot, now) {
                        bad(format!("{node} was paid fees without a valid ticket or while blacklisted"));
                    }
                }
            }
            _ => {}
        }
    }
    out
}

fn roster(replay: &Replay, cfg: &SimConfig, slot: u64, now: Timestamp) -> Vec<NodeId> {
    cfg.node_ids().filter(|&n| replay.authorized(n, slot, now)).collect()
}
