//! Vortex governance.
//!
//! Human nodes become Governors once one of their proposals is approved.
//! Governors vote with power `1 + delegations`, climb tiers with governing
//! time and Formation participation, and lose Governor status after a month
//! without any proposal or vote. Proposals move from the pool to a one-week
//! vote once enough Governors have looked at them; Consuls may veto an
//! approved proposal unless it has been approved three times.
//!
//! Percentages are compared as exact ceilings: "at least 33% of N" means
//! `ceil(33 N / 100)`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::time::{Timestamp, SECONDS_PER_DAY, SECONDS_PER_HOUR, SECONDS_PER_MONTH, SECONDS_PER_WEEK, SECONDS_PER_YEAR};
use crate::NodeId;

/// Share of Governors whose pool votes move a proposal to voting.
pub const POOL_THRESHOLD: (u64, u64) = (22, 100);
/// Share of eligible voting power that must participate.
pub const QUORUM: (u64, u64) = (33, 100);
/// Share of cast power that must approve.
pub const APPROVAL: (u64, u64) = (66, 100);
/// Share of Consuls needed to veto or to release an early Formation grant.
pub const CONSUL_SUPERMAJORITY: (u64, u64) = (66, 100);
/// Share of every fee that funds the Formation vault.
pub const FORMATION_FEE_SHARE: (u64, u64) = (2, 100);

pub const MAX_OPEN_PROPOSALS: usize = 5;
pub const VOTE_PERIOD: Timestamp = SECONDS_PER_WEEK;
pub const RESUBMIT_COOLDOWN: Timestamp = 2 * SECONDS_PER_WEEK;
/// A proposal approved this many times can no longer be vetoed.
pub const VETO_LIMIT: u32 = 3;
/// Years after genesis during which Formation grants need Consul approval.
pub const FORMATION_GATE_YEARS: i64 = 4;
/// Window of the trending board.
pub const TRENDING_WINDOW: Timestamp = 72 * SECONDS_PER_HOUR;

/// `ceil(n * num / den)`.
pub fn ceil_fraction(n: u64, (num, den): (u64, u64)) -> u64 {
    ((n as u128 * num as u128).div_ceil(den as u128)) as u64
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum VortexError {
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
    #[error("node {0} is already registered")]
    DuplicateNode(NodeId),
    #[error("unknown proposal {0}")]
    UnknownProposal(u64),
    #[error("tier {tier} may not submit {ptype} proposals")]
    TierInsufficient { tier: Tier, ptype: ProposalType },
    #[error("{0} already has the maximum number of open proposals")]
    TooManyOpenProposals(NodeId),
    #[error("proposals from outside the network need a Governor's nomination")]
    NotNominated,
    #[error("{0} is not a Governor")]
    NotGovernor(NodeId),
    #[error("{0} already voted on this proposal in the pool")]
    DuplicatePoolVote(NodeId),
    #[error("{0} already voted on this proposal")]
    DuplicateVote(NodeId),
    #[error("proposal {id} is {state:?}, expected {expected:?}")]
    WrongState { id: u64, state: ProposalState, expected: ProposalState },
    #[error("voting on proposal {0} is still open")]
    VotingStillOpen(u64),
    #[error("voting on proposal {0} has closed")]
    VotingClosed(u64),
    #[error("proposal {0} has been approved three times and can no longer be vetoed")]
    VetoExhausted(u64),
    #[error("proposal {0} is not approved")]
    NotApproved(u64),
    #[error("Formation grants need approval by 66% of Consuls during the first four years")]
    ConsulApprovalMissing,
    #[error("Formation vault holds {vault}, grant asks for {amount}")]
    InsufficientVault { vault: u128, amount: u128 },
    #[error("proposal {id} may be resubmitted from {eligible_at}")]
    CooldownActive { id: u64, eligible_at: Timestamp },
    #[error("delegation target {0} must be a Governor")]
    InvalidDelegationTarget(NodeId),
    #[error("{0} receives delegations and cannot delegate")]
    DelegationDepth(NodeId),
    #[error("{0} has not delegated")]
    NotDelegating(NodeId),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Role {
    HumanNode,
    Governor,
    Delegator,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Tier {
    Citizen,
    Senator,
    Legate,
    Consul,
}

impl Tier {
    pub const ALL: [Tier; 4] = [Tier::Citizen, Tier::Senator, Tier::Legate, Tier::Consul];

    pub fn years_required(self) -> i64 {
        match self {
            Tier::Citizen => 0,
            Tier::Senator => 1,
            Tier::Legate => 2,
            Tier::Consul => 4,
        }
    }

    pub fn needs_formation(self) -> bool {
        self >= Tier::Legate
    }

    pub fn may_propose(self, ptype: ProposalType) -> bool {
        self >= ptype.min_tier()
    }

    pub fn may_veto(self) -> bool {
        self == Tier::Consul
    }
}

impl fmt::Display for Tier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ProposalType {
    Product,
    FeeDistribution,
    Monetary,
    Protocol,
    Administrative,
    VortexCore,
}

impl ProposalType {
    pub const ALL: [ProposalType; 6] = [
        ProposalType::Product,
        ProposalType::FeeDistribution,
        ProposalType::Monetary,
        ProposalType::Protocol,
        ProposalType::Administrative,
        ProposalType::VortexCore,
    ];

    pub fn min_tier(self) -> Tier {
        match self {
            ProposalType::Product => Tier::Citizen,
            ProposalType::FeeDistribution => Tier::Senator,
            ProposalType::Monetary | ProposalType::Protocol | ProposalType::Administrative => Tier::Legate,
            ProposalType::VortexCore => Tier::Consul,
        }
    }

    /// Longest time a proposal of this type may wait in the pool.
    pub fn max_pool_time(self) -> Timestamp {
        match self {
            ProposalType::Product => 2 * SECONDS_PER_WEEK,
            ProposalType::FeeDistribution | ProposalType::Monetary => SECONDS_PER_MONTH,
            ProposalType::Protocol => 2 * SECONDS_PER_MONTH,
            ProposalType::Administrative => 3 * SECONDS_PER_MONTH,
            ProposalType::VortexCore => 6 * SECONDS_PER_MONTH,
        }
    }
}

impl fmt::Display for ProposalType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GovernorRecord {
    pub node: NodeId,
    pub role: Role,
    pub tier: Tier,
    /// Start of the current governing stretch.
    pub governing_since: Option<Timestamp>,
    pub formation_participant: bool,
    pub has_approved_proposal: bool,
    pub runs_node: bool,
    pub delegations_received: BTreeSet<NodeId>,
    pub delegated_to: Option<NodeId>,
    pub active_this_month: bool,
}

impl GovernorRecord {
    pub fn human(node: NodeId) -> Self {
        Self {
            node,
            role: Role::HumanNode,
            tier: Tier::Citizen,
            governing_since: None,
            formation_participant: false,
            has_approved_proposal: false,
            runs_node: true,
            delegations_received: BTreeSet::new(),
            delegated_to: None,
            active_this_month: false,
        }
    }

    /// Votes in its own right (Governors only).
    pub fn is_governor(&self) -> bool {
        self.role == Role::Governor
    }

    /// Governors and Delegators both count as governing.
    pub fn is_governing(&self) -> bool {
        matches!(self.role, Role::Governor | Role::Delegator)
    }
}

/// Highest tier whose requirements all hold at `now`. Records without an
/// approved proposal, without a running node or not governing stay Citizen.
pub fn tier_promotion(record: &GovernorRecord, now: Timestamp) -> Tier {
    let Some(since) = record.governing_since else {
        return Tier::Citizen;
    };
    if !record.has_approved_proposal || !record.runs_node || !record.is_governing() {
        return Tier::Citizen;
    }
    let governed = now - since;
    Tier::ALL
        .into_iter()
        .rev()
        .find(|t| governed >= t.years_required() * SECONDS_PER_YEAR && (!t.needs_formation() || record.formation_participant))
        .unwrap_or(Tier::Citizen)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ProposalState {
    InPool,
    InVote,
    Approved,
    Declined,
    Expired,
}

impl ProposalState {
    pub fn is_open(self) -> bool {
        matches!(self, ProposalState::InPool | ProposalState::InVote)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Proposer {
    Node(NodeId),
    /// Outside party; the nominating Governor's tier applies.
    External { nominated_by: NodeId },
}

impl Proposer {
    /// The node accountable for the proposal.
    pub fn sponsor(self) -> NodeId {
        match self {
            Proposer::Node(n) => n,
            Proposer::External { nominated_by } => nominated_by,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PoolVote {
    pub up: bool,
    pub at: Timestamp,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Proposal {
    pub id: u64,
    pub proposer: Proposer,
    /// Unlinkable label shown in reports instead of the proposer.
    pub pseudonym: String,
    pub ptype: ProposalType,
    pub state: ProposalState,
    pub pool_votes: BTreeMap<NodeId, PoolVote>,
    pub vote_yes: BTreeSet<NodeId>,
    pub vote_no: BTreeSet<NodeId>,
    pub submitted_at: Timestamp,
    pub vote_deadline: Option<Timestamp>,
    pub resubmit_eligible_at: Option<Timestamp>,
    pub approval_count: u32,
    pub resubmission_of: Option<u64>,
}

impl Proposal {
    pub fn upvotes(&self) -> usize {
        self.pool_votes.values().filter(|v| v.up).count()
    }

    pub fn downvotes(&self) -> usize {
        self.pool_votes.values().filter(|v| !v.up).count()
    }

    pub fn pool_deadline(&self) -> Timestamp {
        self.submitted_at + self.ptype.max_pool_time()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TallyResult {
    pub eligible_governors: u64,
    pub votes_cast: u64,
    pub yes: u64,
    pub quorum_met: bool,
    pub approved: bool,
}

/// Threshold arithmetic on already-counted totals.
pub fn tally_counts(eligible: u64, cast: u64, yes: u64) -> TallyResult {
    let quorum_met = eligible > 0 && cast >= ceil_fraction(eligible, QUORUM);
    let approved = quorum_met && yes >= ceil_fraction(cast, APPROVAL);
    TallyResult { eligible_governors: eligible, votes_cast: cast, yes, quorum_met, approved }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum VetoResult {
    Vetoed,
    NotVetoed,
}

/// Whether a quorum is weighed by voting power or by Governor heads.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuorumBasis {
    #[default]
    Power,
    Heads,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum PoolBoard {
    Fresh,
    Trending,
    Popular,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FormationGrant {
    pub proposal: u64,
    pub amount: u128,
    pub vault_after: u128,
    pub granted_at: Timestamp,
    pub consul_gated: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VortexConfig {
    pub genesis: Timestamp,
    pub quorum_basis: QuorumBasis,
    /// Salt of proposer pseudonyms.
    pub pseudonym_salt: String,
}

impl Default for VortexConfig {
    fn default() -> Self {
        Self { genesis: 0, quorum_basis: QuorumBasis::Power, pseudonym_salt: "vortex".into() }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vortex {
    pub config: VortexConfig,
    pub records: BTreeMap<NodeId, GovernorRecord>,
    pub proposals: BTreeMap<u64, Proposal>,
    pub formation_vault: u128,
    pub grants: Vec<FormationGrant>,
    next_id: u64,
}

impl Vortex {
    pub fn new(config: VortexConfig) -> Self {
        Self { config, ..Self::default() }
    }

    pub fn add_human(&mut self, node: NodeId) -> Result<&mut GovernorRecord, VortexError> {
        if self.records.contains_key(&node) {
            return Err(VortexError::DuplicateNode(node));
        }
        Ok(self.records.entry(node).or_insert_with(|| GovernorRecord::human(node)))
    }

    /// Seeds an existing Governor, as loaded from a scenario.
    pub fn add_governor(
        &mut self,
        node: NodeId,
        governing_since: Timestamp,
        formation_participant: bool,
        now: Timestamp,
    ) -> Result<&GovernorRecord, VortexError> {
        let rec = self.add_human(node)?;
        rec.role = Role::Governor;
        rec.governing_since = Some(governing_since);
        rec.formation_participant = formation_participant;
        rec.has_approved_proposal = true;
        rec.tier = tier_promotion(rec, now);
        Ok(rec)
    }

    pub fn record(&self, node: NodeId) -> Result<&GovernorRecord, VortexError> {
        self.records.get(&node).ok_or(VortexError::UnknownNode(node))
    }

    fn record_mut(&mut self, node: NodeId) -> Result<&mut GovernorRecord, VortexError> {
        self.records.get_mut(&node).ok_or(VortexError::UnknownNode(node))
    }

    pub fn proposal(&self, id: u64) -> Result<&Proposal, VortexError> {
        self.proposals.get(&id).ok_or(VortexError::UnknownProposal(id))
    }

    fn proposal_mut(&mut self, id: u64) -> Result<&mut Proposal, VortexError> {
        self.proposals.get_mut(&id).ok_or(VortexError::UnknownProposal(id))
    }

    fn governor(&self, node: NodeId) -> Result<&GovernorRecord, VortexError> {
        let rec = self.record(node)?;
        if !rec.is_governor() {
            return Err(VortexError::NotGovernor(node));
        }
        Ok(rec)
    }

    pub fn governors(&self) -> impl Iterator<Item = &GovernorRecord> {
        self.records.values().filter(|r| r.is_governor())
    }

    pub fn governor_count(&self) -> u64 {
        self.governors().count() as u64
    }

    pub fn consuls(&self) -> impl Iterator<Item = &GovernorRecord> {
        self.governors().filter(|r| r.tier == Tier::Consul)
    }

    /// `1 + delegators`, zero for anyone who is not a Governor.
    pub fn voting_power(&self, node: NodeId) -> u64 {
        match self.records.get(&node) {
            Some(r) if r.is_governor() => 1 + r.delegations_received.len() as u64,
            _ => 0,
        }
    }

    pub fn total_voting_power(&self) -> u64 {
        self.governors().map(|r| 1 + r.delegations_received.len() as u64).sum()
    }

    fn weight(&self, node: NodeId) -> u64 {
        match self.config.quorum_basis {
            QuorumBasis::Power => self.voting_power(node),
            QuorumBasis::Heads => u64::from(self.voting_power(node) > 0),
        }
    }

    fn eligible_weight(&self) -> u64 {
        match self.config.quorum_basis {
            QuorumBasis::Power => self.total_voting_power(),
            QuorumBasis::Heads => self.governor_count(),
        }
    }

    /// Hands the delegator's vote to a Governor. Re-delegating moves it at
    /// once.
    pub fn delegate(&mut self, delegator: NodeId, to: NodeId) -> Result<(), VortexError> {
        let rec = self.record(delegator)?;
        if !rec.is_governing() {
            return Err(VortexError::NotGovernor(delegator));
        }
        if !rec.delegations_received.is_empty() {
            return Err(VortexError::DelegationDepth(delegator));
        }
        if to == delegator || !self.record(to)?.is_governor() {
            return Err(VortexError::InvalidDelegationTarget(to));
        }
        if let Some(old) = rec.delegated_to {
            self.record_mut(old)?.delegations_received.remove(&delegator);
        }
        let rec = self.record_mut(delegator)?;
        rec.role = Role::Delegator;
        rec.delegated_to = Some(to);
        self.record_mut(to)?.delegations_received.insert(delegator);
        Ok(())
    }

    /// Takes the vote back; the delegator governs in its own right again.
    pub fn revoke_delegation(&mut self, delegator: NodeId) -> Result<(), VortexError> {
        let rec = self.record_mut(delegator)?;
        let Some(old) = rec.delegated_to.take() else {
            return Err(VortexError::NotDelegating(delegator));
        };
        rec.role = Role::Governor;
        self.record_mut(old)?.delegations_received.remove(&delegator);
        Ok(())
    }

    pub fn open_proposals(&self, sponsor: NodeId) -> usize {
        self.proposals
            .values()
            .filter(|p| p.state.is_open() && p.proposer.sponsor() == sponsor)
            .count()
    }

    /// Label that hides the proposer: the first 16 hex digits of
    /// SHA-256(salt || id).
    pub fn pseudonym(&self, id: u64) -> String {
        let mut h = Sha256::new();
        h.update(self.config.pseudonym_salt.as_bytes());
        h.update(id.to_be_bytes());
        h.finalize()[..8].iter().map(|b| format!("{b:02x}")).collect()
    }

    fn check_submission(&self, proposer: Proposer, ptype: ProposalType) -> Result<NodeId, VortexError> {
        let sponsor = proposer.sponsor();
        let rec = self.record(sponsor)?;
        if let Proposer::External { .. } = proposer {
            if !rec.is_governor() {
                return Err(VortexError::NotNominated);
            }
        }
        if !rec.tier.may_propose(ptype) {
            return Err(VortexError::TierInsufficient { tier: rec.tier, ptype });
        }
        if self.open_proposals(sponsor) >= MAX_OPEN_PROPOSALS {
            return Err(VortexError::TooManyOpenProposals(sponsor));
        }
        Ok(sponsor)
    }

    fn insert_proposal(&mut self, proposer: Proposer, ptype: ProposalType, now: Timestamp, prior: Option<&Proposal>) -> u64 {
        let id = self.next_id;
        self.next_id += 1;
        let proposal = Proposal {
            id,
            proposer,
            pseudonym: self.pseudonym(id),
            ptype,
            state: ProposalState::InPool,
            pool_votes: BTreeMap::new(),
            vote_yes: BTreeSet::new(),
            vote_no: BTreeSet::new(),
            submitted_at: now,
            vote_deadline: None,
            resubmit_eligible_at: None,
            approval_count: prior.map_or(0, |p| p.approval_count),
            resubmission_of: prior.map(|p| p.id),
        };
        self.proposals.insert(id, proposal);
        id
    }

    /// Puts a proposal into the pool. A tier violation is returned as
    /// [`VortexError::TierInsufficient`]; callers treat it as a slashable
    /// perpetration.
    pub fn submit_proposal(&mut self, proposer: Proposer, ptype: ProposalType, now: Timestamp) -> Result<u64, VortexError> {
        let sponsor = self.check_submission(proposer, ptype)?;
        self.record_mut(sponsor)?.active_this_month = true;
        Ok(self.insert_proposal(proposer, ptype, now, None))
    }

    /// Submits a declined or expired proposal again under a new id, keeping
    /// its approval history.
    pub fn resubmit(&mut self, id: u64, now: Timestamp) -> Result<u64, VortexError> {
        let old = self.proposal(id)?.clone();
        if old.state.is_open() || old.state == ProposalState::Approved {
            return Err(VortexError::WrongState { id, state: old.state, expected: ProposalState::Declined });
        }
        if let Some(at) = old.resubmit_eligible_at {
            if now < at {
                return Err(VortexError::CooldownActive { id, eligible_at: at });
            }
        }
        let sponsor = self.check_submission(old.proposer, old.ptype)?;
        self.record_mut(sponsor)?.active_this_month = true;
        Ok(self.insert_proposal(old.proposer, old.ptype, now, Some(&old)))
    }

    /// Expires pool proposals past their type's pool time.
    pub fn expire_pool(&mut self, now: Timestamp) -> Vec<u64> {
        let mut expired = Vec::new();
        for p in self.proposals.values_mut() {
            if p.state == ProposalState::InPool && now > p.pool_deadline() {
                p.state = ProposalState::Expired;
                p.resubmit_eligible_at = Some(now + RESUBMIT_COOLDOWN);
                expired.push(p.id);
            }
        }
        expired
    }

    /// Records an up or down pool vote. Once `ceil(22%)` of current Governors
    /// have voted, the proposal enters a one-week vote.
    pub fn pool_vote(&mut self, voter: NodeId, id: u64, up: bool, now: Timestamp) -> Result<ProposalState, VortexError> {
        self.governor(voter)?;
        self.expire_pool(now);
        let threshold = ceil_fraction(self.governor_count(), POOL_THRESHOLD).max(1);
        let p = self.proposal_mut(id)?;
        if p.state != ProposalState::InPool {
            return Err(VortexError::WrongState { id, state: p.state, expected: ProposalState::InPool });
        }
        if p.pool_votes.contains_key(&voter) {
            return Err(VortexError::DuplicatePoolVote(voter));
        }
        p.pool_votes.insert(voter, PoolVote { up, at: now });
        if p.pool_votes.len() as u64 >= threshold {
            p.state = ProposalState::InVote;
            p.vote_deadline = Some(now + VOTE_PERIOD);
        }
        let state = p.state;
        self.record_mut(voter)?.active_this_month = true;
        Ok(state)
    }

    pub fn cast_vote(&mut self, voter: NodeId, id: u64, yes: bool, now: Timestamp) -> Result<(), VortexError> {
        self.governor(voter)?;
        let p = self.proposal_mut(id)?;
        if p.state != ProposalState::InVote {
            return Err(VortexError::WrongState { id, state: p.state, expected: ProposalState::InVote });
        }
        if p.vote_deadline.is_some_and(|d| now >= d) {
            return Err(VortexError::VotingClosed(id));
        }
        if p.vote_yes.contains(&voter) || p.vote_no.contains(&voter) {
            return Err(VortexError::DuplicateVote(voter));
        }
        if yes {
            p.vote_yes.insert(voter);
        } else {
            p.vote_no.insert(voter);
        }
        self.record_mut(voter)?.active_this_month = true;
        Ok(())
    }

    /// Counts the current standing of a vote without closing it.
    pub fn count(&self, id: u64) -> Result<TallyResult, VortexError> {
        let p = self.proposal(id)?;
        let weigh = |set: &BTreeSet<NodeId>| set.iter().map(|&n| self.weight(n)).sum::<u64>();
        let yes = weigh(&p.vote_yes);
        let cast = yes + weigh(&p.vote_no);
        Ok(tally_counts(self.eligible_weight(), cast, yes))
    }

    /// Closes a vote whose deadline has passed.
    pub fn tally(&mut self, id: u64, now: Timestamp) -> Result<TallyResult, VortexError> {
        let p = self.proposal(id)?;
        if p.state != ProposalState::InVote {
            return Err(VortexError::WrongState { id, state: p.state, expected: ProposalState::InVote });
        }
        if p.vote_deadline.is_some_and(|d| now < d) {
            return Err(VortexError::VotingStillOpen(id));
        }
        let result = self.count(id)?;
        let p = self.proposal_mut(id)?;
        let sponsor = p.proposer;
        if result.approved {
            p.state = ProposalState::Approved;
            p.approval_count += 1;
            if let Proposer::Node(node) = sponsor {
                let rec = self.record_mut(node)?;
                rec.has_approved_proposal = true;
                if rec.role == Role::HumanNode {
                    rec.role = Role::Governor;
                    rec.governing_since = Some(now);
                    rec.active_this_month = true;
                }
                rec.tier = tier_promotion(rec, now);
            }
        } else {
            p.state = ProposalState::Declined;
            p.resubmit_eligible_at = Some(now + RESUBMIT_COOLDOWN);
        }
        Ok(result)
    }

    /// Consul veto of an approved proposal. A successful veto declines it.
    pub fn veto(&mut self, id: u64, consul_yes: u64, consul_total: u64, now: Timestamp) -> Result<VetoResult, VortexError> {
        let p = self.proposal_mut(id)?;
        if p.state != ProposalState::Approved {
            return Err(VortexError::NotApproved(id));
        }
        if p.approval_count >= VETO_LIMIT {
            return Err(VortexError::VetoExhausted(id));
        }
        if consul_total == 0 || consul_yes < ceil_fraction(consul_total, CONSUL_SUPERMAJORITY) {
            return Ok(VetoResult::NotVetoed);
        }
        p.state = ProposalState::Declined;
        p.resubmit_eligible_at = Some(now + RESUBMIT_COOLDOWN);
        Ok(VetoResult::Vetoed)
    }

    /// Recomputes every tier.
    pub fn refresh_tiers(&mut self, now: Timestamp) {
        for rec in self.records.values_mut() {
            rec.tier = tier_promotion(rec, now);
        }
    }

    pub fn set_formation_participant(&mut self, node: NodeId, now: Timestamp) -> Result<(), VortexError> {
        let rec = self.record_mut(node)?;
        rec.formation_participant = true;
        rec.tier = tier_promotion(rec, now);
        Ok(())
    }

    /// Clears governing time and Formation participation.
    pub fn nullify_devotion(&mut self, node: NodeId, now: Timestamp) -> Result<(), VortexError> {
        let rec = self.record_mut(node)?;
        if rec.governing_since.is_some() {
            rec.governing_since = Some(now);
        }
        rec.formation_participant = false;
        rec.tier = tier_promotion(rec, now);
        Ok(())
    }

    /// Month boundary: Governors that neither proposed nor voted become plain
    /// human nodes. Their delegators govern in their own right again.
    /// Returns the demoted nodes.
    pub fn monthly_activity_sweep(&mut self, now: Timestamp) -> Vec<NodeId> {
        let demoted: Vec<NodeId> = self
            .records
            .values()
            .filter(|r| r.is_governor() && !r.active_this_month)
            .map(|r| r.node)
            .collect();
        for node in &demoted {
            let rec = self.records.get_mut(node).expect("listed above");
            rec.role = Role::HumanNode;
            rec.governing_since = None;
            let released = std::mem::take(&mut rec.delegations_received);
            rec.tier = Tier::Citizen;
            for d in released {
                let drec = self.records.get_mut(&d).expect("delegators are registered");
                drec.delegated_to = None;
                drec.role = Role::Governor;
            }
        }
        for rec in self.records.values_mut() {
            rec.active_this_month = false;
            rec.tier = tier_promotion(rec, now);
        }
        demoted
    }

    /// Adds the Formation share of `fees` to the vault and returns it.
    pub fn fund_formation(&mut self, fees: u128) -> u128 {
        let share = fees * FORMATION_FEE_SHARE.0 as u128 / FORMATION_FEE_SHARE.1 as u128;
        self.formation_vault += share;
        share
    }

    /// Pays an approved proposal's grant from the vault. In the first four
    /// years after genesis it also needs 66% of Consuls.
    pub fn route_to_formation(
        &mut self,
        id: u64,
        amount: u128,
        consul_yes: u64,
        consul_total: u64,
        now: Timestamp,
    ) -> Result<FormationGrant, VortexError> {
        if self.proposal(id)?.state != ProposalState::Approved {
            return Err(VortexError::NotApproved(id));
        }
        let gated = now - self.config.genesis < FORMATION_GATE_YEARS * SECONDS_PER_YEAR;
        if gated && (consul_total == 0 || consul_yes < ceil_fraction(consul_total, CONSUL_SUPERMAJORITY)) {
            return Err(VortexError::ConsulApprovalMissing);
        }
        if amount > self.formation_vault {
            return Err(VortexError::InsufficientVault { vault: self.formation_vault, amount });
        }
        self.formation_vault -= amount;
        let grant = FormationGrant { proposal: id, amount, vault_after: self.formation_vault, granted_at: now, consul_gated: gated };
        self.grants.push(grant.clone());
        Ok(grant)
    }

    /// Pool proposals ordered for one of the boards. Fresh: newest first.
    /// Popular: most upvotes. Trending: most upvotes in the last 72 hours.
    pub fn pool_board(&self, board: PoolBoard, now: Timestamp) -> Vec<u64> {
        let mut pool: Vec<&Proposal> = self.proposals.values().filter(|p| p.state == ProposalState::InPool).collect();
        let recent = |p: &Proposal| p.pool_votes.values().filter(|v| v.up && now - v.at <= TRENDING_WINDOW).count();
        match board {
            PoolBoard::Fresh => pool.sort_by(|a, b| b.submitted_at.cmp(&a.submitted_at).then(a.id.cmp(&b.id))),
            PoolBoard::Popular => pool.sort_by(|a, b| b.upvotes().cmp(&a.upvotes()).then(a.id.cmp(&b.id))),
            PoolBoard::Trending => pool.sort_by(|a, b| recent(b).cmp(&recent(a)).then(a.id.cmp(&b.id))),
        }
        pool.into_iter().map(|p| p.id).collect()
    }
}

/// Smallest yes count that approves with `n` unit-power Governors.
pub fn minimum_approving_yes(n: u64) -> u64 {
    ceil_fraction(ceil_fraction(n, QUORUM), APPROVAL)
}

/// Governance time expressed in days, for reports.
pub fn days(t: Timestamp) -> f64 {
    t as f64 / SECONDS_PER_DAY as f64
}
