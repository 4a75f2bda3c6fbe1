//! Deterministic slot-by-slot network simulation.
//!
//! Each slot runs, in order: blacklist expiry, scripted perpetrations, ticket
//! renewal, the monthly verification check, offline tracking, round-robin
//! authoring, scripted governance, and at epoch ends uptime checks, fee
//! distribution and Fath rebalancing. Every state change is appended to the
//! event log; the same config and seed always give the same log.

mod config;
mod event;
mod invariants;

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::biometrics::{encrypted_match, plaintext_match};
use crate::fath::{self, AccountId, LedgerSnapshot, PeriodStats, RebalanceOutcome};
use crate::lwe_he::{lwe_keygen, LweKeyPair, LweParams};
use crate::slashing::{apply_effects, Blacklist, BlacklistEntry, NetworkState, PerpetrationKind};
use crate::time::{Timestamp, SECONDS_PER_HOUR, SECONDS_PER_MONTH, SECONDS_PER_YEAR};
use crate::vortex::{Proposer, ProposalState, Vortex, VortexConfig, VortexError};
use crate::{seeded_rng, NodeId, SeededRng};

pub use config::{Fault, GovernorSeed, PipelineConfig, ScriptedProposal, SimConfig};
pub use event::{from_ndjson, to_ndjson, EventKind, SimEvent, SkipReason};
pub use invariants::{check_invariants, Violation};

/// Offline stretches longer than this are slashable.
pub const OFFLINE_LIMIT: Timestamp = 48 * SECONDS_PER_HOUR;
/// Uptime below this share of an epoch is slashable.
pub const MIN_UPTIME: (u64, u64) = (91, 100);

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum NetsimError {
    #[error("invalid scenario: {0}")]
    ConfigInvalid(String),
    #[error("no fee-eligible nodes; fees go to the vault")]
    EmptyRoster,
    #[error(transparent)]
    Fath(#[from] fath::FathError),
}

/// Account name of a node in the ledger.
pub fn account(node: NodeId) -> AccountId {
    AccountId(format!("node-{:03}", node.0))
}

/// `roster[slot mod len]`, or `None` for an empty roster.
pub fn next_author(slot: u64, roster: &[NodeId]) -> Option<NodeId> {
    if roster.is_empty() {
        None
    } else {
        Some(roster[(slot % roster.len() as u64) as usize])
    }
}

/// Result of splitting one epoch's fees.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeeDistribution {
    pub vault_delta: u128,
    pub payouts: BTreeMap<NodeId, u128>,
}

/// Sends 2% (rounded down) to the vault and splits the rest equally over
/// `roster`; leftover units go to the lowest node ids. An empty roster is an
/// error and the caller keeps the fees in the vault.
pub fn distribute_fees(
    epoch_fees: u128,
    roster: &BTreeSet<NodeId>,
    ledger: &mut LedgerSnapshot,
    dao: &mut Vortex,
) -> Result<FeeDistribution, NetsimError> {
    if roster.is_empty() {
        return Err(NetsimError::EmptyRoster);
    }
    let vault_delta = dao.fund_formation(epoch_fees);
    let rest = epoch_fees - vault_delta;
    let n = roster.len() as u128;
    let (each, extra) = (rest / n, rest % n);
    let mut payouts = BTreeMap::new();
    for (i, &node) in roster.iter().enumerate() {
        let amount = each + u128::from((i as u128) < extra);
        ledger.credit(&account(node), amount)?;
        payouts.insert(node, amount);
    }
    Ok(FeeDistribution { vault_delta, payouts })
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeState {
    pub node: NodeId,
    /// First slot at which the ticket is no longer valid.
    pub ticket_expiry_slot: u64,
    pub online: bool,
    /// Next slot by which a bioauth must have succeeded.
    pub verification_due_slot: u64,
    pub offline_since: Option<Timestamp>,
    pub offline_slashed: bool,
    pub epoch_slots: u64,
    pub epoch_online_slots: u64,
    pub blocks: u64,
    pub expired_reported: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProposalSummary {
    pub id: u64,
    pub pseudonym: String,
    pub ptype: crate::vortex::ProposalType,
    pub state: ProposalState,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimReport {
    pub scenario: String,
    pub seed: u64,
    pub slots: u64,
    pub blocks_authored: u64,
    pub slots_skipped: u64,
    pub blocks_per_node: BTreeMap<NodeId, u64>,
    pub fees_injected: u128,
    pub fees_paid_to_nodes: u128,
    pub vault_balance: u128,
    pub initial_supply: u128,
    pub final_supply: u128,
    pub final_balances: BTreeMap<AccountId, u128>,
    pub rebalances: Vec<RebalanceOutcome>,
    pub slashes: Vec<BlacklistEntry>,
    pub governors: Vec<NodeId>,
    pub proposals: Vec<ProposalSummary>,
    pub event_count: u64,
    /// SHA-256 of the newline-delimited event log.
    pub event_log_sha256: String,
}

pub struct SimOutput {
    pub events: Vec<SimEvent>,
    pub report: SimReport,
}

impl SimOutput {
    pub fn ndjson(&self) -> String {
        to_ndjson(&self.events)
    }
}

struct Pipeline {
    cfg: PipelineConfig,
    params: LweParams,
    keys: LweKeyPair,
    templates: BTreeMap<NodeId, Vec<u8>>,
}

struct PendingProposal {
    id: u64,
}

struct Sim<'a> {
    cfg: &'a SimConfig,
    rng: SeededRng,
    events: Vec<SimEvent>,
    slot: u64,
    nodes: BTreeMap<NodeId, NodeState>,
    blacklist: Blacklist,
    lifted: BTreeSet<usize>,
    state: NetworkState,
    ledger: LedgerSnapshot,
    dao: Vortex,
    pipeline: Option<Pipeline>,
    pending: Vec<PendingProposal>,
    fath_prev: Option<u128>,
    fath_acc: u128,
    rebalances: Vec<RebalanceOutcome>,
    fees_injected: u128,
    fees_paid: u128,
}

impl<'a> Sim<'a> {
    fn new(cfg: &'a SimConfig, seed: u64) -> Result<Self, NetsimError> {
        let mut rng = seeded_rng(seed);
        let ledger = LedgerSnapshot::from_pairs(cfg.node_ids().map(|n| (account(n), cfg.initial_balance)))?;
        let mut dao = Vortex::new(VortexConfig {
            genesis: 0,
            quorum_basis: cfg.quorum_basis,
            pseudonym_salt: format!("{}:{seed}", cfg.name),
        });
        for n in cfg.node_ids() {
            dao.add_human(n).expect("ids are unique");
        }
        for g in &cfg.governors {
            let since = -(g.years_governing * SECONDS_PER_YEAR as f64).round() as Timestamp;
            let rec = dao.records.get_mut(&NodeId(g.node)).expect("validated");
            rec.role = crate::vortex::Role::Governor;
            rec.governing_since = Some(since);
            rec.formation_participant = g.formation;
            rec.has_approved_proposal = true;
        }
        dao.refresh_tiers(0);
        let pipeline = cfg.pipeline.as_ref().map(|p| {
            let params = p.profile.params();
            let keys = lwe_keygen(&params, &mut rng);
            let templates = cfg
                .node_ids()
                .map(|n| (n, (0..p.template_bits).map(|_| rng.gen_range(0..2u8)).collect()))
                .collect();
            Pipeline { cfg: p.clone(), params, keys, templates }
        });
        let month = cfg.month_slots();
        let nodes = cfg
            .node_ids()
            .map(|n| (n, NodeState { node: n, online: true, verification_due_slot: month, ..NodeState::default() }))
            .collect();
        Ok(Self {
            cfg,
            rng,
            events: Vec::new(),
            slot: 0,
            nodes,
            blacklist: Blacklist::default(),
            lifted: BTreeSet::new(),
            state: NetworkState::with_nodes(cfg.node_ids()),
            ledger,
            dao,
            pipeline,
            pending: Vec::new(),
            fath_prev: None,
            fath_acc: 0,
            rebalances: Vec::new(),
            fees_injected: 0,
            fees_paid: 0,
        })
    }

    fn now(&self) -> Timestamp {
        self.cfg.slot_time(self.slot)
    }

    fn emit(&mut self, kind: EventKind) {
        let seq = self.events.len() as u64;
        self.events.push(SimEvent { seq, slot: self.slot, kind });
    }

    fn blacklisted(&self, node: NodeId) -> bool {
        self.blacklist.is_blacklisted(node, self.now())
    }

    fn authorized(&self, node: NodeId) -> bool {
        self.nodes[&node].ticket_expiry_slot > self.slot && !self.blacklisted(node) && !self.state.deactivated.contains(&node)
    }

    fn in_window(&self, node: NodeId, pick: impl Fn(&Fault) -> Option<(u32, u64, u64)>) -> bool {
        self.cfg.faults.iter().filter_map(pick).any(|(n, a, b)| n == node.0 && (a..b).contains(&self.slot))
    }

    fn slash(&mut self, node: NodeId, kind: PerpetrationKind) {
        let entry = self.blacklist.slash(node, kind, self.now());
        apply_effects(&entry, &mut self.state, Some(&mut self.dao));
        if self.state.deactivated.contains(&node) {
            let st = self.nodes.get_mut(&node).expect("known node");
            st.ticket_expiry_slot = st.ticket_expiry_slot.min(self.slot);
        }
        self.emit(EventKind::Slashed {
            node,
            perpetration: kind,
            offense_index: entry.offense_index,
            period_months: entry.period,
            until: entry.until,
        });
    }

    fn lift_expired(&mut self) {
        let now = self.now();
        let done: Vec<(usize, NodeId)> = self
            .blacklist
            .entries
            .iter()
            .enumerate()
            .filter(|(i, e)| !self.lifted.contains(i) && e.until.is_some_and(|u| u <= now))
            .map(|(i, e)| (i, e.node))
            .collect();
        for (i, node) in done {
            self.lifted.insert(i);
            if !self.blacklisted(node) {
                self.state.restore(node);
                let month = self.cfg.month_slots();
                let st = self.nodes.get_mut(&node).expect("known node");
                st.verification_due_slot = st.verification_due_slot.max(self.slot + month);
                st.offline_since = None;
                st.offline_slashed = false;
                self.emit(EventKind::BlacklistLifted { node });
            }
        }
    }

    fn scripted_perpetrations(&mut self) {
        let hits: Vec<(u32, PerpetrationKind)> = self
            .cfg
            .faults
            .iter()
            .filter_map(|f| match f {
                Fault::Perpetration { node, slot, kind } if *slot == self.slot => Some((*node, *kind)),
                _ => None,
            })
            .collect();
        for (node, kind) in hits {
            self.slash(NodeId(node), kind);
        }
    }

    fn bioauth(&mut self, node: NodeId) -> bool {
        let scripted_fail = self.in_window(node, |f| match f {
            Fault::BioauthFailure { node, from_slot, to_slot } => Some((*node, *from_slot, *to_slot)),
            _ => None,
        });
        let random_fail = self.cfg.bioauth_failure_rate > 0.0 && self.rng.gen::<f64>() < self.cfg.bioauth_failure_rate;
        let mut ok = !scripted_fail && !random_fail;
        if let Some(p) = &self.pipeline {
            let template = p.templates[&node].clone();
            let probe: Vec<u8> = if p.cfg.impostors.contains(&node.0) {
                (0..template.len()).map(|_| self.rng.gen_range(0..2u8)).collect()
            } else {
                let mut probe = template.clone();
                let ones: Vec<usize> = (0..probe.len()).filter(|&i| probe[i] == 1).collect();
                for _ in 0..p.cfg.noise_flips.min(ones.len()) {
                    probe[ones[self.rng.gen_range(0..ones.len())]] = 0;
                }
                probe
            };
            let p = self.pipeline.as_ref().expect("checked above");
            let matched = encrypted_match(&p.params, &p.keys, &template, &probe, p.cfg.threshold, &mut self.rng)
                .expect("validated template length")
                .is_match();
            let plain = plaintext_match(&template, &probe, p.cfg.threshold).expect("same length").is_match();
            self.emit(EventKind::EncryptedMatch { node, matched, plaintext_agrees: matched == plain });
            ok &= matched;
        }
        ok
    }

    fn renew_tickets(&mut self) {
        let validity = self.cfg.ticket_validity();
        let month = self.cfg.month_slots();
        let ids: Vec<NodeId> = self.nodes.keys().copied().collect();
        for node in ids {
            let st = &self.nodes[&node];
            if st.ticket_expiry_slot > self.slot || !st.online || self.blacklisted(node) {
                continue;
            }
            let skipping = self.in_window(node, |f| match f {
                Fault::SkipRenewal { node, from_slot, to_slot } => Some((*node, *from_slot, *to_slot)),
                _ => None,
            });
            if skipping {
                continue;
            }
            if self.bioauth(node) {
                let slot = self.slot;
                let st = self.nodes.get_mut(&node).expect("known node");
                st.ticket_expiry_slot = slot + validity;
                st.verification_due_slot = slot + month;
                st.expired_reported = false;
                self.emit(EventKind::TicketRenewed { node, expiry_slot: slot + validity });
            } else {
                self.emit(EventKind::BioauthFailed { node });
            }
        }
        for node in self.nodes.keys().copied().collect::<Vec<_>>() {
            let st = &self.nodes[&node];
            if st.ticket_expiry_slot <= self.slot && !st.expired_reported && self.slot > 0 {
                self.nodes.get_mut(&node).expect("known node").expired_reported = true;
                self.emit(EventKind::TicketExpired { node });
            }
        }
    }

    fn check_verification(&mut self) {
        let month = self.cfg.month_slots();
        for node in self.nodes.keys().copied().collect::<Vec<_>>() {
            if self.blacklisted(node) || self.slot < self.nodes[&node].verification_due_slot {
                continue;
            }
            let slot = self.slot;
            self.nodes.get_mut(&node).expect("known node").verification_due_slot = slot + month;
            self.slash(node, PerpetrationKind::MissedMonthlyVerification);
        }
    }

    fn track_presence(&mut self) {
        let now = self.now();
        for node in self.nodes.keys().copied().collect::<Vec<_>>() {
            let offline = self.in_window(node, |f| match f {
                Fault::Offline { node, from_slot, to_slot } => Some((*node, *from_slot, *to_slot)),
                _ => None,
            });
            let listed = self.blacklisted(node);
            let st = self.nodes.get_mut(&node).expect("known node");
            st.online = !offline;
            if listed {
                st.offline_since = None;
                continue;
            }
            st.epoch_slots += 1;
            if !offline {
                st.epoch_online_slots += 1;
                st.offline_since = None;
                st.offline_slashed = false;
                continue;
            }
            let since = *st.offline_since.get_or_insert(now);
            if !st.offline_slashed && now + self.cfg.slot_seconds - since > OFFLINE_LIMIT {
                st.offline_slashed = true;
                st.offline_since = None;
                self.slash(node, PerpetrationKind::Offline48h);
            }
        }
    }

    fn author(&mut self) {
        let roster: Vec<NodeId> = self.nodes.keys().copied().filter(|&n| self.authorized(n)).collect();
        match next_author(self.slot, &roster) {
            None => self.emit(EventKind::SlotSkipped { reason: SkipReason::EmptyRoster, expected: None }),
            Some(n) if !self.nodes[&n].online => {
                self.emit(EventKind::SlotSkipped { reason: SkipReason::AuthorOffline, expected: Some(n) })
            }
            Some(n) => {
                self.nodes.get_mut(&n).expect("known node").blocks += 1;
                self.emit(EventKind::BlockAuthored { author: n });
            }
        }
    }

    fn governance(&mut self) {
        let now = self.now();
        let month_before = (now - self.cfg.slot_seconds).div_euclid(SECONDS_PER_MONTH);
        if self.slot > 0 && now.div_euclid(SECONDS_PER_MONTH) > month_before {
            let demoted = self.dao.monthly_activity_sweep(now);
            if !demoted.is_empty() {
                self.emit(EventKind::GovernorsDemoted { nodes: demoted });
            }
        }
        self.dao.expire_pool(now);
        self.close_votes(now);
        let scripted: Vec<ScriptedProposal> = self.cfg.proposals.iter().filter(|p| p.slot == self.slot).cloned().collect();
        for p in scripted {
            self.submit(p, now);
        }
    }

    fn submit(&mut self, p: ScriptedProposal, now: Timestamp) {
        let proposer = NodeId(p.proposer);
        if self.blacklisted(proposer) {
            self.emit(EventKind::ProposalRejected { proposer, ptype: p.ptype, reason: "blacklisted".into() });
            return;
        }
        let id = match self.dao.submit_proposal(Proposer::Node(proposer), p.ptype, now) {
            Ok(id) => id,
            Err(e) => {
                self.emit(EventKind::ProposalRejected { proposer, ptype: p.ptype, reason: e.to_string() });
                if matches!(e, VortexError::TierInsufficient { .. }) {
                    self.slash(proposer, PerpetrationKind::MismatchedProposalTypeNoRight);
                }
                return;
            }
        };
        let pseudonym = self.dao.proposal(id).expect("just inserted").pseudonym.clone();
        self.emit(EventKind::ProposalSubmitted { proposal: id, pseudonym, ptype: p.ptype });
        let voters: Vec<NodeId> = self.dao.governors().map(|r| r.node).filter(|&n| !self.blacklisted(n)).collect();
        for v in voters {
            if self.dao.proposal(id).expect("exists").state != ProposalState::InPool {
                break;
            }
            let _ = self.dao.pool_vote(v, id, true, now);
        }
        if self.dao.proposal(id).expect("exists").state == ProposalState::InVote {
            for (list, yes) in [(&p.yes, true), (&p.no, false)] {
                for &n in list {
                    if !self.blacklisted(NodeId(n)) {
                        let _ = self.dao.cast_vote(NodeId(n), id, yes, now);
                    }
                }
            }
            self.pending.push(PendingProposal { id });
        }
    }

    fn close_votes(&mut self, now: Timestamp) {
        let due: Vec<u64> = self
            .pending
            .iter()
            .filter(|p| self.dao.proposal(p.id).ok().and_then(|x| x.vote_deadline).is_some_and(|d| now >= d))
            .map(|p| p.id)
            .collect();
        self.pending.retain(|p| !due.contains(&p.id));
        for id in due {
            if let Ok(t) = self.dao.tally(id, now) {
                let state = self.dao.proposal(id).expect("exists").state;
                self.emit(EventKind::ProposalClosed {
                    proposal: id,
                    state,
                    votes_cast: t.votes_cast,
                    yes: t.yes,
                    eligible: t.eligible_governors,
                });
            }
        }
    }

    fn end_epoch(&mut self, epoch: u64) -> Result<(), NetsimError> {
        for node in self.nodes.keys().copied().collect::<Vec<_>>() {
            let listed = self.blacklisted(node);
            let st = self.nodes.get_mut(&node).expect("known node");
            let (total, online) = (st.epoch_slots, st.epoch_online_slots);
            st.epoch_slots = 0;
            st.epoch_online_slots = 0;
            if !listed && total > 0 && (online as u128) * (MIN_UPTIME.1 as u128) < (total as u128) * (MIN_UPTIME.0 as u128) {
                self.slash(node, PerpetrationKind::UptimeBelow91);
            }
        }

        let fees = self.cfg.fees_for_epoch(epoch);
        self.fees_injected += fees;
        let roster: BTreeSet<NodeId> =
            self.state.fee_roster.iter().copied().filter(|&n| self.authorized(n)).collect();
        let dist = match distribute_fees(fees, &roster, &mut self.ledger, &mut self.dao) {
            Ok(d) => d,
            Err(NetsimError::EmptyRoster) => {
                self.dao.formation_vault += fees;
                FeeDistribution { vault_delta: fees, payouts: BTreeMap::new() }
            }
            Err(e) => return Err(e),
        };
        self.fees_paid += dist.payouts.values().sum::<u128>();
        self.emit(EventKind::FeesDistributed { epoch, fees, vault_delta: dist.vault_delta, payouts: dist.payouts });

        self.fath_acc += fees;
        if (epoch + 1).is_multiple_of(self.cfg.fath_period_epochs) {
            let period = (epoch + 1) / self.cfg.fath_period_epochs - 1;
            let curr = self.fath_acc;
            self.fath_acc = 0;
            if let Some(prev) = self.fath_prev.replace(curr) {
                let (next, outcome) = fath::run_period(
                    &self.ledger,
                    &PeriodStats { period_index: period.saturating_sub(1), fees_paid: prev },
                    &PeriodStats { period_index: period, fees_paid: curr },
                )?;
                self.ledger = next;
                self.rebalances.push(outcome.clone());
                self.emit(EventKind::FathRebalance { outcome });
            }
        }
        Ok(())
    }

    fn run(mut self) -> Result<SimOutput, NetsimError> {
        let initial_supply = self.ledger.total_supply();
        let total = self.cfg.total_slots();
        for slot in 0..total {
            self.slot = slot;
            self.lift_expired();
            self.scripted_perpetrations();
            self.track_presence();
            self.renew_tickets();
            self.check_verification();
            self.author();
            self.governance();
            if (slot + 1).is_multiple_of(self.cfg.slots_per_epoch) {
                self.end_epoch(slot / self.cfg.slots_per_epoch)?;
            }
        }
        let log = to_ndjson(&self.events);
        let digest = Sha256::digest(log.as_bytes());
        let blocks_per_node: BTreeMap<NodeId, u64> = self.nodes.iter().map(|(&n, s)| (n, s.blocks)).collect();
        let blocks_authored: u64 = blocks_per_node.values().sum();
        let report = SimReport {
            scenario: self.cfg.name.clone(),
            seed: 0,
            slots: total,
            blocks_authored,
            slots_skipped: total - blocks_authored,
            blocks_per_node,
            fees_injected: self.fees_injected,
            fees_paid_to_nodes: self.fees_paid,
            vault_balance: self.dao.formation_vault,
            initial_supply,
            final_supply: self.ledger.total_supply(),
            final_balances: self.ledger.balances().clone(),
            rebalances: self.rebalances,
            slashes: self.blacklist.entries,
            governors: self.dao.governors().map(|r| r.node).collect(),
            proposals: self
                .dao
                .proposals
                .values()
                .map(|p| ProposalSummary { id: p.id, pseudonym: p.pseudonym.clone(), ptype: p.ptype, state: p.state })
                .collect(),
            event_count: self.events.len() as u64,
            event_log_sha256: digest.iter().map(|b| format!("{b:02x}")).collect(),
        };
        Ok(SimOutput { events: self.events, report })
    }
}

/// Runs a scenario with its own seed.
pub fn run(config: &SimConfig) -> Result<SimOutput, NetsimError> {
    run_with_seed(config, config.seed)
}

/// Runs a scenario with an explicit seed.
pub fn run_with_seed(config: &SimConfig, seed: u64) -> Result<SimOutput, NetsimError> {
    config.validate()?;
    let mut out = Sim::new(config, seed)?.run()?;
    out.report.seed = seed;
    Ok(out)
}
