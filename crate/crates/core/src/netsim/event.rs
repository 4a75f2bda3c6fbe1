//! Event log records.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::fath::RebalanceOutcome;
use crate::slashing::{BlacklistPeriod, PerpetrationKind};
use crate::time::Timestamp;
use crate::vortex::{ProposalState, ProposalType};
use crate::NodeId;

/// One log line: `{"seq":..,"slot":..,"event":{"<kind>":{...}}}`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimEvent {
    pub seq: u64,
    pub slot: u64,
    #[serde(rename = "event")]
    pub kind: EventKind,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SkipReason {
    EmptyRoster,
    AuthorOffline,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    BlockAuthored {
        author: NodeId,
    },
    SlotSkipped {
        reason: SkipReason,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        expected: Option<NodeId>,
    },
    TicketRenewed {
        node: NodeId,
        expiry_slot: u64,
    },
    TicketExpired {
        node: NodeId,
    },
    BioauthFailed {
        node: NodeId,
    },
    EncryptedMatch {
        node: NodeId,
        matched: bool,
        plaintext_agrees: bool,
    },
    Slashed {
        node: NodeId,
        perpetration: PerpetrationKind,
        offense_index: usize,
        period_months: BlacklistPeriod,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        until: Option<Timestamp>,
    },
    BlacklistLifted {
        node: NodeId,
    },
    FeesDistributed {
        epoch: u64,
        fees: u128,
        vault_delta: u128,
        payouts: BTreeMap<NodeId, u128>,
    },
    FathRebalance {
        outcome: RebalanceOutcome,
    },
    ProposalSubmitted {
        proposal: u64,
        pseudonym: String,
        ptype: ProposalType,
    },
    ProposalRejected {
        proposer: NodeId,
        ptype: ProposalType,
        reason: String,
    },
    ProposalClosed {
        proposal: u64,
        state: ProposalState,
        votes_cast: u64,
        yes: u64,
        eligible: u64,
    },
    GovernorsDemoted {
        nodes: Vec<NodeId>,
    },
}

/// Renders events as newline-delimited JSON.
pub fn to_ndjson(events: &[SimEvent]) -> String {
    let mut out = String::new();
    for e in events {
        out.push_str(&serde_json::to_string(e).expect("events serialize"));
        out.push('\n');
    }
    out
}

pub fn from_ndjson(text: &str) -> Result<Vec<SimEvent>, serde_json::Error> {
    text.lines().filter(|l| !l.trim().is_empty()).map(serde_json::from_str).collect()
}
