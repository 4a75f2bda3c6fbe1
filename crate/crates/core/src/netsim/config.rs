//! Scenario files.

use serde::{Deserialize, Serialize};

use super::NetsimError;
use crate::lwe_he::LweProfile;
use crate::slashing::PerpetrationKind;
use crate::time::{Timestamp, DEFAULT_SLOT_SECONDS, SECONDS_PER_MONTH};
use crate::vortex::{ProposalType, QuorumBasis};
use crate::NodeId;

fn default_slot_seconds() -> i64 {
    DEFAULT_SLOT_SECONDS
}

fn default_one() -> u64 {
    1
}

fn default_balance() -> u128 {
    1_000_000
}

/// A scenario. Unknown fields are rejected.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    pub num_nodes: u32,
    pub slots_per_epoch: u64,
    pub epochs: u64,
    #[serde(default = "default_slot_seconds")]
    pub slot_seconds: i64,
    /// Defaults to one month of slots.
    #[serde(default)]
    pub ticket_validity_slots: Option<u64>,
    #[serde(default = "default_one")]
    pub fath_period_epochs: u64,
    /// Starting balance of every node, in smallest units.
    #[serde(default = "default_balance")]
    pub initial_balance: u128,
    /// Fees injected at the end of each epoch. The last value repeats.
    #[serde(default)]
    pub epoch_fees: Vec<u128>,
    /// Probability that a bioauth attempt fails at random.
    #[serde(default)]
    pub bioauth_failure_rate: f64,
    #[serde(default)]
    pub faults: Vec<Fault>,
    #[serde(default)]
    pub governors: Vec<GovernorSeed>,
    #[serde(default)]
    pub proposals: Vec<ScriptedProposal>,
    #[serde(default)]
    pub quorum_basis: QuorumBasis,
    #[serde(default)]
    pub pipeline: Option<PipelineConfig>,
}

/// Scripted misbehaviour.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Fault {
    /// Node is offline for slots `from_slot..to_slot`.
    Offline { node: u32, from_slot: u64, to_slot: u64 },
    /// Node makes no bioauth attempt in `from_slot..to_slot`.
    SkipRenewal { node: u32, from_slot: u64, to_slot: u64 },
    /// Bioauth attempts in `from_slot..to_slot` fail.
    BioauthFailure { node: u32, from_slot: u64, to_slot: u64 },
    /// A detected perpetration at `slot`.
    Perpetration { node: u32, slot: u64, kind: PerpetrationKind },
}

impl Fault {
    pub fn node(&self) -> u32 {
        match self {
            Fault::Offline { node, .. }
            | Fault::SkipRenewal { node, .. }
            | Fault::BioauthFailure { node, .. }
            | Fault::Perpetration { node, .. } => *node,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GovernorSeed {
    pub node: u32,
    /// Years of governing before genesis.
    #[serde(default)]
    pub years_governing: f64,
    #[serde(default)]
    pub formation: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScriptedProposal {
    pub slot: u64,
    pub proposer: u32,
    #[serde(rename = "type")]
    pub ptype: ProposalType,
    #[serde(default)]
    pub yes: Vec<u32>,
    #[serde(default)]
    pub no: Vec<u32>,
}

/// Runs an encrypted template match for every bioauth attempt.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub profile: LweProfile,
    pub template_bits: usize,
    pub threshold: u64,
    /// Set bits dropped from a genuine probe.
    #[serde(default)]
    pub noise_flips: usize,
    /// Nodes whose probes are unrelated to their template.
    #[serde(default)]
    pub impostors: Vec<u32>,
}

impl SimConfig {
    pub fn from_json(text: &str) -> Result<Self, NetsimError> {
        let cfg: SimConfig = serde_json::from_str(text).map_err(|e| NetsimError::ConfigInvalid(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), NetsimError> {
        let bad = |m: String| Err(NetsimError::ConfigInvalid(m));
        if self.num_nodes == 0 {
            return bad("num_nodes must be at least 1".into());
        }
        if self.slots_per_epoch == 0 {
            return bad("slots_per_epoch must be at least 1".into());
        }
        if self.slot_seconds <= 0 {
            return bad("slot_seconds must be positive".into());
        }
        if self.fath_period_epochs == 0 {
            return bad("fath_period_epochs must be at least 1".into());
        }
        if self.ticket_validity_slots == Some(0) {
            return bad("ticket_validity_slots must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.bioauth_failure_rate) {
            return bad("bioauth_failure_rate must lie in [0, 1]".into());
        }
        let known = |n: u32| n < self.num_nodes;
        for f in &self.faults {
            if !known(f.node()) {
                return bad(format!("fault names unknown node {}", f.node()));
            }
            if let Fault::Offline { from_slot, to_slot, .. }
            | Fault::SkipRenewal { from_slot, to_slot, .. }
            | Fault::BioauthFailure { from_slot, to_slot, .. } = f
            {
                if from_slot > to_slot {
                    return bad(format!("fault window {from_slot}..{to_slot} is reversed"));
                }
            }
        }
        for g in &self.governors {
            if !known(g.node) || g.years_governing.is_nan() || g.years_governing < 0.0 {
                return bad(format!("invalid governor entry for node {}", g.node));
            }
        }
        for p in &self.proposals {
            if !known(p.proposer) || p.yes.iter().chain(&p.no).any(|&n| !known(n)) {
                return bad(format!("proposal at slot {} names an unknown node", p.slot));
            }
        }
        if let Some(p) = &self.pipeline {
            if !p.profile.supports_multiplication() {
                return bad(format!("profile {} cannot evaluate a product", p.profile));
            }
            let max = p.profile.params().max_packed_len();
            if p.template_bits == 0 || p.template_bits > max {
                return bad(format!("template_bits must lie in 1..={max} for profile {}", p.profile));
            }
            if p.impostors.iter().any(|&n| !known(n)) {
                return bad("pipeline impostor names an unknown node".into());
            }
        }
        Ok(())
    }

    pub fn total_slots(&self) -> u64 {
        self.slots_per_epoch * self.epochs
    }

    /// Slots in one simulated month, rounded up.
    pub fn month_slots(&self) -> u64 {
        (SECONDS_PER_MONTH as u64).div_ceil(self.slot_seconds as u64)
    }

    pub fn ticket_validity(&self) -> u64 {
        self.ticket_validity_slots.unwrap_or_else(|| self.month_slots())
    }

    pub fn slot_time(&self, slot: u64) -> Timestamp {
        slot as Timestamp * self.slot_seconds
    }

    pub fn fees_for_epoch(&self, epoch: u64) -> u128 {
        match self.epoch_fees.len() {
            0 => 0,
            n => self.epoch_fees[(epoch as usize).min(n - 1)],
        }
    }

    pub fn node_ids(&self) -> impl Iterator<Item = NodeId> {
        (0..self.num_nodes).map(NodeId)
    }
}
