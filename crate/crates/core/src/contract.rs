//! Crowdfunding campaign with a milestone system, as a logical-time state
//! machine.
//!
//! Every transaction runs against a copy of the contract storage; a revert
//! discards the copy, so a reverted call leaves storage untouched. All
//! comparisons, arithmetic, counter increments and modifier checks go
//! through the mutation sites declared in [`crate::sites`]. The audit ledger
//! (`inflow_total`, `outflow_total`, `paid_out`) plays the role of the chain's
//! own value accounting and is not instrumented.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::mutation::{ArithFault, GuardSite};
use crate::sites::*;
use crate::types::{Address, Amount, BlockContext};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Phase {
    Started,
    Donation,
    Ended,
    Closed,
}

impl Phase {
    pub fn name(self) -> &'static str {
        match self {
            Phase::Started => "STARTED",
            Phase::Donation => "DONATION",
            Phase::Ended => "ENDED",
            Phase::Closed => "CLOSED",
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum MilestoneStatus {
    Pending,
    Achieved,
    Refunded,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Milestone {
    /// Cumulative `total_raised` threshold.
    pub target: Amount,
    pub reward: Amount,
    /// Organizer who escrowed the reward.
    pub creator: Address,
    pub status: MilestoneStatus,
    /// Donor whose donation crossed the target.
    pub achiever: Option<Address>,
}

/// Reason code carried by a reverted transaction.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum RevertReason {
    DuplicateParticipant,
    LimitExceeded,
    EmptyList,
    BadDuration,
    BadMinDonation,
    WrongPhase,
    NotOrganizer,
    AlreadyDonated,
    BelowMin,
    OutOfWindow,
    UnknownBeneficiary,
    InvalidReward,
    InvalidTarget,
    TooEarly,
    NotBeneficiary,
    BeneficiariesPending,
    MilestonesPending,
    Overflow,
    Underflow,
    DivZero,
}

impl RevertReason {
    pub const ALL: [RevertReason; 20] = [
        RevertReason::DuplicateParticipant,
        RevertReason::LimitExceeded,
        RevertReason::EmptyList,
        RevertReason::BadDuration,
        RevertReason::BadMinDonation,
        RevertReason::WrongPhase,
        RevertReason::NotOrganizer,
        RevertReason::AlreadyDonated,
        RevertReason::BelowMin,
        RevertReason::OutOfWindow,
        RevertReason::UnknownBeneficiary,
        RevertReason::InvalidReward,
        RevertReason::InvalidTarget,
        RevertReason::TooEarly,
        RevertReason::NotBeneficiary,
        RevertReason::BeneficiariesPending,
        RevertReason::MilestonesPending,
        RevertReason::Overflow,
        RevertReason::Underflow,
        RevertReason::DivZero,
    ];

    pub fn code(self) -> &'static str {
        match self {
            RevertReason::DuplicateParticipant => "DUPLICATE_PARTICIPANT",
            RevertReason::LimitExceeded => "LIMIT_EXCEEDED",
            RevertReason::EmptyList => "EMPTY_LIST",
            RevertReason::BadDuration => "BAD_DURATION",
            RevertReason::BadMinDonation => "BAD_MIN_DONATION",
            RevertReason::WrongPhase => "WRONG_PHASE",
            RevertReason::NotOrganizer => "NOT_ORGANIZER",
            RevertReason::AlreadyDonated => "ALREADY_DONATED",
            RevertReason::BelowMin => "BELOW_MIN",
            RevertReason::OutOfWindow => "OUT_OF_WINDOW",
            RevertReason::UnknownBeneficiary => "UNKNOWN_BENEFICIARY",
            RevertReason::InvalidReward => "INVALID_REWARD",
            RevertReason::InvalidTarget => "INVALID_TARGET",
            RevertReason::TooEarly => "TOO_EARLY",
            RevertReason::NotBeneficiary => "NOT_BENEFICIARY",
            RevertReason::BeneficiariesPending => "BENEFICIARIES_PENDING",
            RevertReason::MilestonesPending => "MILESTONES_PENDING",
            RevertReason::Overflow => "OVERFLOW",
            RevertReason::Underflow => "UNDERFLOW",
            RevertReason::DivZero => "DIV_ZERO",
        }
    }
}

impl fmt::Display for RevertReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl From<ArithFault> for RevertReason {
    fn from(fault: ArithFault) -> Self {
        match fault {
            ArithFault::Overflow => RevertReason::Overflow,
            ArithFault::Underflow => RevertReason::Underflow,
            ArithFault::DivZero => RevertReason::DivZero,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(
    tag = "status",
    content = "reason",
    rename_all = "SCREAMING_SNAKE_CASE"
)]
pub enum TxResult {
    Accepted,
    Reverted(RevertReason),
}

impl TxResult {
    pub fn is_accepted(self) -> bool {
        matches!(self, TxResult::Accepted)
    }

    pub fn reason(self) -> Option<RevertReason> {
        match self {
            TxResult::Accepted => None,
            TxResult::Reverted(r) => Some(r),
        }
    }
}

impl From<Result<(), RevertReason>> for TxResult {
    fn from(r: Result<(), RevertReason>) -> Self {
        match r {
            Ok(()) => TxResult::Accepted,
            Err(reason) => TxResult::Reverted(reason),
        }
    }
}

impl fmt::Display for TxResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TxResult::Accepted => f.write_str("ACCEPTED"),
            TxResult::Reverted(r) => write!(f, "REVERTED({r})"),
        }
    }
}

/// Deployment parameters. Validated by [`Campaign::deploy`].
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CampaignConfig {
    pub organizers: Vec<Address>,
    pub beneficiaries: Vec<Address>,
    pub min_donation: Amount,
    pub start_time: u64,
    pub duration: u64,
    /// Cap on organizers and, independently, on beneficiaries.
    pub max_participants: usize,
    pub max_reward: Amount,
}

/// Contract storage.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Storage {
    pub phase: Phase,
    pub config: CampaignConfig,
    pub organizer_donated: BTreeMap<Address, Amount>,
    pub organizers_donated_count: u32,
    pub total_raised: Amount,
    pub balance: Amount,
    pub allocation: BTreeMap<Address, Amount>,
    pub withdrawn: BTreeMap<Address, Amount>,
    pub withdrawers: BTreeSet<Address>,
    pub beneficiaries_withdrawn_count: u32,
    pub milestones: Vec<Milestone>,
    pub achieved_count: u32,
    pub inflow_total: Amount,
    pub outflow_total: Amount,
    pub paid_out: BTreeMap<Address, Amount>,
}

/// Pure snapshot of the observable campaign state.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Observation {
    pub phase: Phase,
    pub total_raised: Amount,
    pub balance: Amount,
    pub allocations: BTreeMap<Address, Amount>,
    pub withdrawn: BTreeMap<Address, Amount>,
    pub milestone_statuses: Vec<MilestoneStatus>,
    pub payouts: BTreeMap<Address, Amount>,
    pub inflow_total: Amount,
    pub outflow_total: Amount,
    pub last_tx_result: TxResult,
}

impl Observation {
    pub fn total_withdrawn(&self) -> Option<Amount> {
        sum(self.withdrawn.values())
    }

    pub fn paid_to(&self, who: Address) -> Amount {
        self.payouts.get(&who).copied().unwrap_or_default()
    }
}

/// Ledger inconsistency found by [`Campaign::audit`].
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AuditBreach {
    /// inflow != balance + outflow
    Conservation {
        inflow: Amount,
        balance: Amount,
        outflow: Amount,
    },
    /// allocations still claimable plus amounts withdrawn != total raised
    Allocation {
        claimable: Option<Amount>,
        withdrawn: Option<Amount>,
        total_raised: Amount,
    },
    /// balance != claimable allocations + escrow of pending milestones
    Backing {
        balance: Amount,
        owed: Option<Amount>,
    },
}

fn sum<'a>(values: impl IntoIterator<Item = &'a Amount>) -> Option<Amount> {
    values
        .into_iter()
        .try_fold(0u128, |acc, a| acc.checked_add(a.0))
        .map(Amount)
}

fn require(
    site: GuardSite,
    predicate: impl FnOnce() -> bool,
    reason: RevertReason,
) -> Result<(), RevertReason> {
    if site.check(predicate) {
        Ok(())
    } else {
        Err(reason)
    }
}

fn fail_unless(ok: bool, reason: RevertReason) -> Result<(), RevertReason> {
    if ok {
        Ok(())
    } else {
        Err(reason)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Campaign {
    storage: Storage,
    last_tx: TxResult,
}

impl Campaign {
    /// Validates `config` and creates a campaign in the STARTED phase.
    pub fn deploy(config: CampaignConfig, _ctx: BlockContext) -> Result<Campaign, RevertReason> {
        fail_unless(
            DEPLOY_ORGANIZERS_NON_EMPTY.eval(config.organizers.len(), 0),
            RevertReason::EmptyList,
        )?;
        fail_unless(
            DEPLOY_BENEFICIARIES_NON_EMPTY.eval(config.beneficiaries.len(), 0),
            RevertReason::EmptyList,
        )?;
        require(
            DEPLOY_ORGANIZER_LIMIT,
            || {
                DEPLOY_ORGANIZERS_WITHIN_LIMIT
                    .eval(config.organizers.len(), config.max_participants)
            },
            RevertReason::LimitExceeded,
        )?;
        require(
            DEPLOY_BENEFICIARY_LIMIT,
            || {
                DEPLOY_BENEFICIARIES_WITHIN_LIMIT
                    .eval(config.beneficiaries.len(), config.max_participants)
            },
            RevertReason::LimitExceeded,
        )?;
        require(
            DEPLOY_UNIQUE_PARTICIPANTS,
            || {
                let all: Vec<Address> = config
                    .organizers
                    .iter()
                    .chain(&config.beneficiaries)
                    .copied()
                    .collect();
                !all.iter()
                    .enumerate()
                    .any(|(i, a)| all[i + 1..].iter().any(|b| DEPLOY_ADDRESS_EQ.eval(a, b)))
            },
            RevertReason::DuplicateParticipant,
        )?;
        fail_unless(
            DEPLOY_DURATION_POSITIVE.eval(config.duration, 0),
            RevertReason::BadDuration,
        )?;
        fail_unless(
            DEPLOY_MIN_DONATION_POSITIVE.eval(config.min_donation, Amount::ZERO),
            RevertReason::BadMinDonation,
        )?;
        let deadline = DEPLOY_DEADLINE
            .apply(config.start_time as u128, config.duration as u128)
            .map_err(|_| RevertReason::BadDuration)?;
        fail_unless(
            DEPLOY_DEADLINE_IN_RANGE.eval(deadline, u64::MAX as u128),
            RevertReason::BadDuration,
        )?;

        let zeroed: BTreeMap<Address, Amount> = config
            .beneficiaries
            .iter()
            .map(|b| (*b, Amount::ZERO))
            .collect();
        Ok(Campaign {
            storage: Storage {
                phase: Phase::Started,
                organizer_donated: BTreeMap::new(),
                organizers_donated_count: 0,
                total_raised: Amount::ZERO,
                balance: Amount::ZERO,
                allocation: zeroed.clone(),
                withdrawn: zeroed,
                withdrawers: BTreeSet::new(),
                beneficiaries_withdrawn_count: 0,
                milestones: Vec::new(),
                achieved_count: 0,
                inflow_total: Amount::ZERO,
                outflow_total: Amount::ZERO,
                paid_out: BTreeMap::new(),
                config,
            },
            last_tx: TxResult::Accepted,
        })
    }

    pub fn storage(&self) -> &Storage {
        &self.storage
    }

    pub fn config(&self) -> &CampaignConfig {
        &self.storage.config
    }

    pub fn phase(&self) -> Phase {
        self.storage.phase
    }

    pub fn last_tx(&self) -> TxResult {
        self.last_tx
    }

    pub fn snapshot(&self) -> Observation {
        let s = &self.storage;
        Observation {
            phase: s.phase,
            total_raised: s.total_raised,
            balance: s.balance,
            allocations: s.allocation.clone(),
            withdrawn: s.withdrawn.clone(),
            milestone_statuses: s.milestones.iter().map(|m| m.status).collect(),
            payouts: s.paid_out.clone(),
            inflow_total: s.inflow_total,
            outflow_total: s.outflow_total,
            last_tx_result: self.last_tx,
        }
    }

    fn transact(
        &mut self,
        tx: impl FnOnce(&mut Storage) -> Result<(), RevertReason>,
    ) -> Observation {
        let mut working = self.storage.clone();
        self.last_tx = match tx(&mut working) {
            Ok(()) => {
                self.storage = working;
                TxResult::Accepted
            }
            Err(reason) => TxResult::Reverted(reason),
        };
        self.snapshot()
    }

    /// Initial donation of an organizer. The last one moves the campaign to
    /// DONATION.
    pub fn organizer_donate(&mut self, ctx: BlockContext, amount: Amount) -> Observation {
        self.transact(|s| {
            require(
                ORG_IN_STARTED,
                || s.phase == Phase::Started,
                RevertReason::WrongPhase,
            )?;
            require(
                ORG_ONLY_ORGANIZER,
                || s.config.organizers.contains(&ctx.sender),
                RevertReason::NotOrganizer,
            )?;
            require(
                ORG_NOT_ALREADY_DONATED,
                || !s.organizer_donated.contains_key(&ctx.sender),
                RevertReason::AlreadyDonated,
            )?;
            fail_unless(
                ORG_AMOUNT_AT_LEAST_MIN.eval(amount, s.config.min_donation),
                RevertReason::BelowMin,
            )?;
            s.receive(amount)?;
            s.balance = Amount(ORG_BALANCE_CREDIT.apply(s.balance.0, amount.0)?);
            s.total_raised = Amount(ORG_TOTAL_RAISED_CREDIT.apply(s.total_raised.0, amount.0)?);
            s.split_uniform(amount)?;
            let entry = s.organizer_donated.entry(ctx.sender).or_default();
            *entry = Amount(ORG_RECORD_CONTRIBUTION.apply(entry.0, amount.0)?);
            s.organizers_donated_count = ORG_DONATED_COUNT.apply(s.organizers_donated_count, 1)?;
            let organizers = s.config.organizers.len() as u32;
            if ORG_ALL_DONATED.eval(s.organizers_donated_count, organizers) {
                s.phase = Phase::Donation;
            }
            Ok(())
        })
    }

    /// Public donation split evenly across beneficiaries. The remainder of
    /// the division goes to the first beneficiary.
    pub fn donate_uniform(&mut self, ctx: BlockContext, amount: Amount) -> Observation {
        self.transact(|s| {
            require(
                DONATE_IN_DONATION,
                || s.phase == Phase::Donation,
                RevertReason::WrongPhase,
            )?;
            s.check_window(ctx.now, Window::UNIFORM)?;
            fail_unless(
                DONATE_AMOUNT_AT_LEAST_MIN.eval(amount, s.config.min_donation),
                RevertReason::BelowMin,
            )?;
            s.receive(amount)?;
            s.balance = Amount(DONATE_BALANCE_CREDIT.apply(s.balance.0, amount.0)?);
            s.total_raised = Amount(DONATE_TOTAL_RAISED_CREDIT.apply(s.total_raised.0, amount.0)?);
            s.split_uniform(amount)?;
            s.evaluate_milestones(ctx.sender)?;
            Ok(())
        })
    }

    /// Public donation with an explicit amount per beneficiary.
    pub fn donate_split(
        &mut self,
        ctx: BlockContext,
        shares: &BTreeMap<Address, Amount>,
    ) -> Observation {
        self.transact(|s| {
            require(
                SPLIT_DONATE_KNOWN_BENEFICIARIES,
                || shares.keys().all(|b| s.config.beneficiaries.contains(b)),
                RevertReason::UnknownBeneficiary,
            )?;
            require(
                SPLIT_DONATE_IN_DONATION,
                || s.phase == Phase::Donation,
                RevertReason::WrongPhase,
            )?;
            s.check_window(ctx.now, Window::SPLIT)?;
            let mut total = 0u128;
            for share in shares.values() {
                total = SPLIT_DONATE_SUM_SHARES.apply(total, share.0)?;
            }
            let total = Amount(total);
            fail_unless(
                SPLIT_DONATE_SUM_AT_LEAST_MIN.eval(total, s.config.min_donation),
                RevertReason::BelowMin,
            )?;
            s.receive(total)?;
            for (beneficiary, share) in shares {
                let entry = s.allocation.entry(*beneficiary).or_default();
                *entry = Amount(SPLIT_DONATE_ALLOCATION_CREDIT.apply(entry.0, share.0)?);
            }
            s.balance = Amount(SPLIT_DONATE_BALANCE_CREDIT.apply(s.balance.0, total.0)?);
            s.total_raised =
                Amount(SPLIT_DONATE_TOTAL_RAISED_CREDIT.apply(s.total_raised.0, total.0)?);
            s.evaluate_milestones(ctx.sender)?;
            Ok(())
        })
    }

    /// Registers a milestone and escrows its reward from the calling
    /// organizer.
    pub fn add_milestone(
        &mut self,
        ctx: BlockContext,
        target: Amount,
        reward: Amount,
    ) -> Observation {
        self.transact(|s| {
            require(
                MILESTONE_ONLY_ORGANIZER,
                || s.config.organizers.contains(&ctx.sender),
                RevertReason::NotOrganizer,
            )?;
            require(
                MILESTONE_IN_STARTED,
                || s.phase == Phase::Started,
                RevertReason::WrongPhase,
            )?;
            fail_unless(
                MILESTONE_REWARD_POSITIVE.eval(reward, Amount::ZERO),
                RevertReason::InvalidReward,
            )?;
            fail_unless(
                MILESTONE_REWARD_WITHIN_CAP.eval(reward, s.config.max_reward),
                RevertReason::InvalidReward,
            )?;
            fail_unless(
                MILESTONE_TARGET_POSITIVE.eval(target, Amount::ZERO),
                RevertReason::InvalidTarget,
            )?;
            s.receive(reward)?;
            s.balance = Amount(MILESTONE_BALANCE_ESCROW.apply(s.balance.0, reward.0)?);
            let position = s
                .milestones
                .iter()
                .position(|m| MILESTONE_INSERT_POSITION.eval(m.target, target))
                .unwrap_or(s.milestones.len());
            s.milestones.insert(
                position,
                Milestone {
                    target,
                    reward,
                    creator: ctx.sender,
                    status: MilestoneStatus::Pending,
                    achiever: None,
                },
            );
            Ok(())
        })
    }

    /// Moves DONATION to ENDED once the deadline passed or every milestone
    /// was achieved. Callable by anyone.
    pub fn end_campaign(&mut self, ctx: BlockContext) -> Observation {
        self.transact(|s| {
            require(
                END_IN_DONATION,
                || s.phase == Phase::Donation,
                RevertReason::WrongPhase,
            )?;
            let deadline = END_DEADLINE.apply(s.config.start_time, s.config.duration)?;
            let count = s.milestones.len() as u32;
            let finished = END_DEADLINE_PASSED.eval(ctx.now, deadline)
                || (END_HAS_MILESTONES.eval(count, 0)
                    && END_ALL_ACHIEVED.eval(s.achieved_count, count));
            fail_unless(finished, RevertReason::TooEarly)?;
            s.phase = Phase::Ended;
            Ok(())
        })
    }

    /// Pays the caller's whole remaining allocation. Repeated calls succeed
    /// and transfer nothing.
    pub fn withdraw(&mut self, ctx: BlockContext) -> Observation {
        self.transact(|s| {
            require(
                WITHDRAW_IN_ENDED,
                || s.phase == Phase::Ended,
                RevertReason::WrongPhase,
            )?;
            require(
                WITHDRAW_ONLY_BENEFICIARY,
                || s.config.beneficiaries.contains(&ctx.sender),
                RevertReason::NotBeneficiary,
            )?;
            let allocation = s.allocation.entry(ctx.sender).or_default();
            let amount = *allocation;
            *allocation = Amount(WITHDRAW_ALLOCATION_DEBIT.apply(allocation.0, amount.0)?);
            let withdrawn = s.withdrawn.entry(ctx.sender).or_default();
            *withdrawn = Amount(WITHDRAW_WITHDRAWN_CREDIT.apply(withdrawn.0, amount.0)?);
            s.balance = Amount(WITHDRAW_BALANCE_DEBIT.apply(s.balance.0, amount.0)?);
            s.send(ctx.sender, amount)?;
            if s.withdrawers.insert(ctx.sender) {
                s.beneficiaries_withdrawn_count =
                    WITHDRAW_WITHDRAWN_COUNT.apply(s.beneficiaries_withdrawn_count, 1)?;
            }
            Ok(())
        })
    }

    /// Returns the escrow of every still-pending milestone to its creator.
    pub fn refund_unreached(&mut self, ctx: BlockContext) -> Observation {
        self.transact(|s| {
            require(
                REFUND_IN_ENDED,
                || s.phase == Phase::Ended,
                RevertReason::WrongPhase,
            )?;
            require(
                REFUND_ONLY_ORGANIZER,
                || s.config.organizers.contains(&ctx.sender),
                RevertReason::NotOrganizer,
            )?;
            let mut refunds = Vec::new();
            for m in s.milestones.iter_mut() {
                if REFUND_IS_PENDING.eval(m.status, MilestoneStatus::Pending) {
                    m.status = MilestoneStatus::Refunded;
                    refunds.push((m.creator, m.reward));
                }
            }
            for (creator, reward) in refunds {
                s.balance = Amount(REFUND_BALANCE_DEBIT.apply(s.balance.0, reward.0)?);
                s.send(creator, reward)?;
            }
            Ok(())
        })
    }

    /// Distributes the residual balance across organizers and closes the
    /// campaign.
    pub fn close_contract(&mut self, ctx: BlockContext) -> Observation {
        self.transact(|s| {
            require(
                CLOSE_IN_ENDED,
                || s.phase == Phase::Ended,
                RevertReason::WrongPhase,
            )?;
            require(
                CLOSE_ONLY_ORGANIZER,
                || s.config.organizers.contains(&ctx.sender),
                RevertReason::NotOrganizer,
            )?;
            fail_unless(
                CLOSE_ALL_WITHDREW.eval(
                    s.beneficiaries_withdrawn_count,
                    s.config.beneficiaries.len() as u32,
                ),
                RevertReason::BeneficiariesPending,
            )?;
            require(
                CLOSE_MILESTONES_RESOLVED,
                || {
                    s.milestones
                        .iter()
                        .all(|m| m.status != MilestoneStatus::Pending)
                },
                RevertReason::MilestonesPending,
            )?;
            let residual = s.balance.0;
            let organizers = s.config.organizers.clone();
            let n = organizers.len() as u128;
            let share = CLOSE_RESIDUAL_SHARE.apply(residual, n)?;
            let remainder = CLOSE_RESIDUAL_REMAINDER.apply(residual, n)?;
            for (i, organizer) in organizers.into_iter().enumerate() {
                let pay = if i == 0 {
                    CLOSE_FIRST_SHARE.apply(share, remainder)?
                } else {
                    share
                };
                s.balance = Amount(CLOSE_BALANCE_DEBIT.apply(s.balance.0, pay)?);
                s.send(organizer, Amount(pay))?;
            }
            s.phase = Phase::Closed;
            Ok(())
        })
    }

    /// Ledger consistency checks. Empty on a sound state.
    pub fn audit(&self) -> Vec<AuditBreach> {
        let s = &self.storage;
        let mut breaches = Vec::new();
        if s.balance.0.checked_add(s.outflow_total.0) != Some(s.inflow_total.0) {
            breaches.push(AuditBreach::Conservation {
                inflow: s.inflow_total,
                balance: s.balance,
                outflow: s.outflow_total,
            });
        }
        let claimable = sum(s.allocation.values());
        let withdrawn = sum(s.withdrawn.values());
        let accounted = claimable
            .zip(withdrawn)
            .and_then(|(c, w)| c.0.checked_add(w.0));
        if accounted != Some(s.total_raised.0) {
            breaches.push(AuditBreach::Allocation {
                claimable,
                withdrawn,
                total_raised: s.total_raised,
            });
        }
        let owed = if s.phase == Phase::Closed {
            Some(Amount::ZERO)
        } else {
            let escrow = sum(s
                .milestones
                .iter()
                .filter(|m| m.status == MilestoneStatus::Pending)
                .map(|m| &m.reward));
            claimable
                .zip(escrow)
                .and_then(|(c, e)| c.0.checked_add(e.0))
                .map(Amount)
        };
        if owed != Some(s.balance) {
            breaches.push(AuditBreach::Backing {
                balance: s.balance,
                owed,
            });
        }
        breaches
    }

    /// inflow == balance + outflow
    pub fn is_conserved(&self) -> bool {
        let s = &self.storage;
        s.balance.0.checked_add(s.outflow_total.0) == Some(s.inflow_total.0)
    }
}

#[derive(Clone, Copy)]
struct Window {
    after_start: crate::mutation::CmpSite,
    deadline: crate::mutation::MathSite,
    before_deadline: crate::mutation::CmpSite,
}

impl Window {
    const UNIFORM: Window = Window {
        after_start: DONATE_AFTER_START,
        deadline: DONATE_DEADLINE,
        before_deadline: DONATE_BEFORE_DEADLINE,
    };
    const SPLIT: Window = Window {
        after_start: SPLIT_DONATE_AFTER_START,
        deadline: SPLIT_DONATE_DEADLINE,
        before_deadline: SPLIT_DONATE_BEFORE_DEADLINE,
    };
}

impl Storage {
    /// Half-open donation window `[start, start + duration)`.
    fn check_window(&self, now: u64, w: Window) -> Result<(), RevertReason> {
        fail_unless(
            w.after_start.eval(now, self.config.start_time),
            RevertReason::OutOfWindow,
        )?;
        let deadline = w
            .deadline
            .apply(self.config.start_time, self.config.duration)?;
        fail_unless(
            w.before_deadline.eval(now, deadline),
            RevertReason::OutOfWindow,
        )
    }

    fn receive(&mut self, amount: Amount) -> Result<(), RevertReason> {
        self.inflow_total = Amount(
            self.inflow_total
                .0
                .checked_add(amount.0)
                .ok_or(RevertReason::Overflow)?,
        );
        Ok(())
    }

    fn send(&mut self, to: Address, amount: Amount) -> Result<(), RevertReason> {
        self.outflow_total = Amount(
            self.outflow_total
                .0
                .checked_add(amount.0)
                .ok_or(RevertReason::Overflow)?,
        );
        let paid = self.paid_out.entry(to).or_default();
        *paid = Amount(paid.0.checked_add(amount.0).ok_or(RevertReason::Overflow)?);
        Ok(())
    }

    fn split_uniform(&mut self, amount: Amount) -> Result<(), RevertReason> {
        let n = self.config.beneficiaries.len() as u128;
        let share = SPLIT_SHARE.apply(amount.0, n)?;
        let remainder = SPLIT_REMAINDER.apply(amount.0, n)?;
        for b in &self.config.beneficiaries {
            let entry = self.allocation.entry(*b).or_default();
            *entry = Amount(SPLIT_ALLOCATION_CREDIT.apply(entry.0, share)?);
        }
        if let Some(first) = self.config.beneficiaries.first() {
            let entry = self.allocation.entry(*first).or_default();
            *entry = Amount(SPLIT_REMAINDER_CREDIT.apply(entry.0, remainder)?);
        }
        Ok(())
    }

    /// Pays out every pending milestone whose target the running total has
    /// reached, in stored (ascending target) order.
    fn evaluate_milestones(
        &mut self,
        donor: Address,
    ) -> Result<Vec<(usize, Amount)>, RevertReason> {
        let mut payouts = Vec::new();
        for i in 0..self.milestones.len() {
            let m = &self.milestones[i];
            if !EVAL_IS_PENDING.eval(m.status, MilestoneStatus::Pending) {
                continue;
            }
            if !EVAL_TARGET_REACHED.eval(self.total_raised, m.target) {
                continue;
            }
            let reward = m.reward;
            self.milestones[i].status = MilestoneStatus::Achieved;
            self.milestones[i].achiever = Some(donor);
            self.balance = Amount(EVAL_REWARD_PAYOUT.apply(self.balance.0, reward.0)?);
            self.send(donor, reward)?;
            self.achieved_count = EVAL_ACHIEVED_COUNT.apply(self.achieved_count, 1)?;
            payouts.push((i, reward));
        }
        Ok(payouts)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mutation::{contract_mutants, with_active_mutant, Operator};

    const O1: Address = Address(1);
    const O2: Address = Address(2);
    const B1: Address = Address(0x101);
    const B2: Address = Address(0x102);
    const B3: Address = Address(0x103);
    const DONOR: Address = Address(0x201);

    fn config() -> CampaignConfig {
        CampaignConfig {
            organizers: vec![O1, O2],
            beneficiaries: vec![B1, B2, B3],
            min_donation: Amount(100),
            start_time: 100,
            duration: 1000,
            max_participants: 10,
            max_reward: Amount(1_000_000),
        }
    }

    fn at(now: u64, sender: Address) -> BlockContext {
        BlockContext::new(now, sender)
    }

    fn deployed() -> Campaign {
        Campaign::deploy(config(), at(0, O1)).unwrap()
    }

    fn active() -> Campaign {
        let mut c = deployed();
        c.organizer_donate(at(0, O1), Amount(100));
        c.organizer_donate(at(0, O2), Amount(100));
        assert_eq!(c.phase(), Phase::Donation);
        c
    }

    fn ended() -> Campaign {
        let mut c = active();
        c.donate_uniform(at(100, DONOR), Amount(300));
        c.end_campaign(at(1100, DONOR));
        assert_eq!(c.phase(), Phase::Ended);
        c
    }

    fn mutant(label: &str, op: Operator) -> crate::mutation::Mutant {
        contract_mutants()
            .into_iter()
            .find(|m| m.label == label && m.operator == op)
            .unwrap()
    }

    #[test]
    fn deploy_starts_in_started_with_zero_ledgers() {
        let c = deployed();
        let obs = c.snapshot();
        assert_eq!(obs.phase, Phase::Started);
        assert_eq!(obs.total_raised, Amount::ZERO);
        assert_eq!(obs.balance, Amount::ZERO);
        assert!(obs.allocations.values().all(|a| a.is_zero()));
        assert_eq!(c.snapshot(), obs);
    }

    #[test]
    fn deploy_validation_reasons() {
        let mut dup = config();
        dup.beneficiaries = vec![B1, B1, B2];
        assert_eq!(
            Campaign::deploy(dup, at(0, O1)),
            Err(RevertReason::DuplicateParticipant)
        );

        let mut cross = config();
        cross.beneficiaries = vec![O1];
        assert_eq!(
            Campaign::deploy(cross, at(0, O1)),
            Err(RevertReason::DuplicateParticipant)
        );

        let mut over = config();
        over.max_participants = 2;
        over.organizers = vec![O1, O2, Address(3)];
        over.beneficiaries = vec![B1];
        assert_eq!(
            Campaign::deploy(over, at(0, O1)),
            Err(RevertReason::LimitExceeded)
        );

        let mut empty = config();
        empty.beneficiaries.clear();
        assert_eq!(
            Campaign::deploy(empty, at(0, O1)),
            Err(RevertReason::EmptyList)
        );

        let mut zero = config();
        zero.duration = 0;
        assert_eq!(
            Campaign::deploy(zero, at(0, O1)),
            Err(RevertReason::BadDuration)
        );

        let mut far = config();
        far.start_time = u64::MAX;
        assert_eq!(
            Campaign::deploy(far, at(0, O1)),
            Err(RevertReason::BadDuration)
        );

        let mut free = config();
        free.min_donation = Amount::ZERO;
        assert_eq!(
            Campaign::deploy(free, at(0, O1)),
            Err(RevertReason::BadMinDonation)
        );
    }

    #[test]
    fn organizers_activate_campaign() {
        let mut c = deployed();
        let first = c.organizer_donate(at(0, O1), Amount(100));
        assert_eq!(first.phase, Phase::Started);
        let again = c.organizer_donate(at(0, O1), Amount(100));
        assert_eq!(
            again.last_tx_result,
            TxResult::Reverted(RevertReason::AlreadyDonated)
        );
        let outsider = c.organizer_donate(at(0, B1), Amount(100));
        assert_eq!(
            outsider.last_tx_result,
            TxResult::Reverted(RevertReason::NotOrganizer)
        );
        let low = c.organizer_donate(at(0, O2), Amount(99));
        assert_eq!(
            low.last_tx_result,
            TxResult::Reverted(RevertReason::BelowMin)
        );
        let second = c.organizer_donate(at(0, O2), Amount(100));
        assert_eq!(second.phase, Phase::Donation);
        assert_eq!(second.total_raised, Amount(200));
        let late = c.organizer_donate(at(0, O2), Amount(100));
        assert_eq!(
            late.last_tx_result,
            TxResult::Reverted(RevertReason::WrongPhase)
        );
    }

    #[test]
    fn uniform_split_gives_remainder_to_first() {
        let mut c = active();
        let before = c.snapshot();
        let obs = c.donate_uniform(at(100, DONOR), Amount(100));
        assert!(obs.last_tx_result.is_accepted());
        let delta = |b: Address| obs.allocations[&b].0 - before.allocations[&b].0;
        assert_eq!((delta(B1), delta(B2), delta(B3)), (34, 33, 33));
        assert_eq!(obs.total_raised.0 - before.total_raised.0, 100);
    }

    #[test]
    fn minimum_donation_boundary() {
        let mut c = active();
        let low = c.donate_uniform(at(100, DONOR), Amount(99));
        assert_eq!(
            low.last_tx_result,
            TxResult::Reverted(RevertReason::BelowMin)
        );
        let ok = c.donate_uniform(at(100, DONOR), Amount(100));
        assert!(ok.last_tx_result.is_accepted());
    }

    #[test]
    fn donation_window_is_half_open() {
        let mut c = active();
        let early = c.donate_uniform(at(99, DONOR), Amount(100));
        assert_eq!(
            early.last_tx_result,
            TxResult::Reverted(RevertReason::OutOfWindow)
        );
        let last = c.donate_uniform(at(1099, DONOR), Amount(100));
        assert!(last.last_tx_result.is_accepted());
        let closed = c.donate_uniform(at(1100, DONOR), Amount(100));
        assert_eq!(
            closed.last_tx_result,
            TxResult::Reverted(RevertReason::OutOfWindow)
        );
    }

    #[test]
    fn split_donation_credits_exact_shares() {
        let mut c = active();
        let before = c.snapshot();
        let shares = BTreeMap::from([(B1, Amount(60)), (B2, Amount(40))]);
        let obs = c.donate_split(at(100, DONOR), &shares);
        assert!(obs.last_tx_result.is_accepted());
        assert_eq!(obs.allocations[&B1].0 - before.allocations[&B1].0, 60);
        assert_eq!(obs.allocations[&B2].0 - before.allocations[&B2].0, 40);
        assert_eq!(obs.allocations[&B3], before.allocations[&B3]);

        let short = c.donate_split(at(100, DONOR), &BTreeMap::from([(B1, Amount(50))]));
        assert_eq!(
            short.last_tx_result,
            TxResult::Reverted(RevertReason::BelowMin)
        );
        let stranger = c.donate_split(at(100, DONOR), &BTreeMap::from([(DONOR, Amount(500))]));
        assert_eq!(
            stranger.last_tx_result,
            TxResult::Reverted(RevertReason::UnknownBeneficiary)
        );
    }

    #[test]
    fn uniform_and_split_raise_the_same_total() {
        let mut uniform = active();
        uniform.donate_uniform(at(100, DONOR), Amount(90).max(Amount(100)));
        let mut split = active();
        split.donate_split(
            at(100, DONOR),
            &BTreeMap::from([(B1, Amount(34)), (B2, Amount(33)), (B3, Amount(33))]),
        );
        assert_eq!(
            uniform.snapshot().total_raised,
            split.snapshot().total_raised
        );
    }

    #[test]
    fn milestone_escrow_and_validation() {
        let mut c = deployed();
        let obs = c.add_milestone(at(0, O1), Amount(500), Amount(50));
        assert!(obs.last_tx_result.is_accepted());
        assert_eq!(obs.balance, Amount(50));
        assert_eq!(obs.milestone_statuses, vec![MilestoneStatus::Pending]);
        let zero = c.add_milestone(at(0, O1), Amount(500), Amount(0));
        assert_eq!(
            zero.last_tx_result,
            TxResult::Reverted(RevertReason::InvalidReward)
        );
        let huge = c.add_milestone(at(0, O1), Amount(500), Amount(1_000_001));
        assert_eq!(
            huge.last_tx_result,
            TxResult::Reverted(RevertReason::InvalidReward)
        );
        let no_target = c.add_milestone(at(0, O1), Amount(0), Amount(5));
        assert_eq!(
            no_target.last_tx_result,
            TxResult::Reverted(RevertReason::InvalidTarget)
        );
        let outsider = c.add_milestone(at(0, B1), Amount(500), Amount(5));
        assert_eq!(
            outsider.last_tx_result,
            TxResult::Reverted(RevertReason::NotOrganizer)
        );
    }

    #[test]
    fn milestones_kept_in_ascending_target_order() {
        let mut c = deployed();
        c.add_milestone(at(0, O1), Amount(900), Amount(3));
        c.add_milestone(at(0, O1), Amount(300), Amount(1));
        c.add_milestone(at(0, O2), Amount(600), Amount(2));
        let targets: Vec<u128> = c.storage().milestones.iter().map(|m| m.target.0).collect();
        assert_eq!(targets, vec![300, 600, 900]);
    }

    #[test]
    fn crossing_target_pays_reward_to_donor() {
        let mut c = deployed();
        c.add_milestone(at(0, O1), Amount(500), Amount(50));
        c.organizer_donate(at(0, O1), Amount(100));
        c.organizer_donate(at(0, O2), Amount(100));
        let under = c.donate_uniform(at(100, DONOR), Amount(299));
        assert_eq!(under.total_raised, Amount(499));
        assert_eq!(under.milestone_statuses, vec![MilestoneStatus::Pending]);
        let before = under.balance;
        let over = c.donate_uniform(at(101, DONOR), Amount(100));
        assert_eq!(over.milestone_statuses, vec![MilestoneStatus::Achieved]);
        assert_eq!(over.balance.0, before.0 + 100 - 50);
        assert_eq!(over.paid_to(DONOR), Amount(50));
        assert_eq!(c.storage().milestones[0].achiever, Some(DONOR));
    }

    #[test]
    fn end_campaign_rules() {
        let mut c = deployed();
        let early = c.end_campaign(at(5000, DONOR));
        assert_eq!(
            early.last_tx_result,
            TxResult::Reverted(RevertReason::WrongPhase)
        );
        let mut c = active();
        let too_early = c.end_campaign(at(1099, DONOR));
        assert_eq!(
            too_early.last_tx_result,
            TxResult::Reverted(RevertReason::TooEarly)
        );
        let done = c.end_campaign(at(1100, DONOR));
        assert_eq!(done.phase, Phase::Ended);
    }

    #[test]
    fn end_campaign_when_all_milestones_reached() {
        let mut c = deployed();
        c.add_milestone(at(0, O1), Amount(300), Amount(10));
        c.organizer_donate(at(0, O1), Amount(100));
        c.organizer_donate(at(0, O2), Amount(100));
        c.donate_uniform(at(100, DONOR), Amount(100));
        let obs = c.end_campaign(at(101, DONOR));
        assert_eq!(obs.phase, Phase::Ended);
    }

    #[test]
    fn withdraw_then_repeat_transfers_zero() {
        let mut c = ended();
        let alloc = c.snapshot().allocations[&B1];
        let first = c.withdraw(at(1200, B1));
        assert_eq!(first.withdrawn[&B1], alloc);
        assert_eq!(first.allocations[&B1], Amount::ZERO);
        let again = c.withdraw(at(1201, B1));
        assert!(again.last_tx_result.is_accepted());
        assert_eq!(again.withdrawn[&B1], alloc);
        assert_eq!(again.balance, first.balance);

        let mut d = active();
        let early = d.withdraw(at(200, B1));
        assert_eq!(
            early.last_tx_result,
            TxResult::Reverted(RevertReason::WrongPhase)
        );
        let outsider = c.withdraw(at(1202, DONOR));
        assert_eq!(
            outsider.last_tx_result,
            TxResult::Reverted(RevertReason::NotBeneficiary)
        );
    }

    #[test]
    fn refund_returns_escrow_of_pending_milestones() {
        let mut c = deployed();
        c.add_milestone(at(0, O2), Amount(10_000), Amount(50));
        c.organizer_donate(at(0, O1), Amount(100));
        c.organizer_donate(at(0, O2), Amount(100));
        let during = c.refund_unreached(at(100, O1));
        assert_eq!(
            during.last_tx_result,
            TxResult::Reverted(RevertReason::WrongPhase)
        );
        c.end_campaign(at(1100, DONOR));
        let obs = c.refund_unreached(at(1100, O1));
        assert_eq!(obs.milestone_statuses, vec![MilestoneStatus::Refunded]);
        assert_eq!(obs.paid_to(O2), Amount(50));
        let again = c.refund_unreached(at(1100, O1));
        assert!(again.last_tx_result.is_accepted());
        assert_eq!(again.outflow_total, obs.outflow_total);
    }

    #[test]
    fn refund_with_everything_achieved_moves_nothing() {
        let mut c = deployed();
        c.add_milestone(at(0, O1), Amount(300), Amount(10));
        c.organizer_donate(at(0, O1), Amount(100));
        c.organizer_donate(at(0, O2), Amount(100));
        c.donate_uniform(at(100, DONOR), Amount(100));
        c.end_campaign(at(101, DONOR));
        let before = c.snapshot();
        let obs = c.refund_unreached(at(101, O1));
        assert!(obs.last_tx_result.is_accepted());
        assert_eq!(obs.outflow_total, before.outflow_total);
    }

    #[test]
    fn close_requires_withdrawals_and_resolved_milestones() {
        let mut c = deployed();
        c.add_milestone(at(0, O1), Amount(10_000), Amount(50));
        c.organizer_donate(at(0, O1), Amount(100));
        c.organizer_donate(at(0, O2), Amount(100));
        c.end_campaign(at(1100, DONOR));
        for b in [B1, B2] {
            c.withdraw(at(1100, b));
        }
        let pending = c.close_contract(at(1100, O1));
        assert_eq!(
            pending.last_tx_result,
            TxResult::Reverted(RevertReason::BeneficiariesPending)
        );
        c.withdraw(at(1100, B3));
        let unresolved = c.close_contract(at(1100, O1));
        assert_eq!(
            unresolved.last_tx_result,
            TxResult::Reverted(RevertReason::MilestonesPending)
        );
        c.refund_unreached(at(1100, O1));
        let closed = c.close_contract(at(1100, O1));
        assert_eq!(closed.phase, Phase::Closed);
        assert_eq!(closed.balance, Amount::ZERO);
        assert!(c.audit().is_empty());
    }

    #[test]
    fn reverts_leave_storage_untouched() {
        let mut c = active();
        let before = c.storage().clone();
        c.donate_uniform(at(100, DONOR), Amount(u128::MAX));
        assert_eq!(c.last_tx(), TxResult::Reverted(RevertReason::Overflow));
        assert_eq!(c.storage(), &before);
    }

    #[test]
    fn overflow_near_width_limit_reverts() {
        let mut c = active();
        let ok = c.donate_uniform(at(100, DONOR), Amount(1u128 << 127));
        assert!(ok.last_tx_result.is_accepted());
        let before = c.storage().clone();
        let over = c.donate_uniform(at(100, DONOR), Amount(u128::MAX - 1));
        assert_eq!(
            over.last_tx_result,
            TxResult::Reverted(RevertReason::Overflow)
        );
        assert_eq!(c.storage(), &before);
        assert!(c.audit().is_empty());
    }

    #[test]
    fn audit_clean_through_lifecycle() {
        let mut c = ended();
        assert!(c.audit().is_empty());
        for b in [B1, B2, B3] {
            c.withdraw(at(1200, b));
            assert!(c.audit().is_empty());
        }
        c.close_contract(at(1200, O1));
        assert!(c.audit().is_empty());
    }

    #[test]
    fn removed_double_donation_guard_accepts_second_donation() {
        let m = mutant(
            "organizer_donate::not_already_donated",
            Operator::ModifierRemoval,
        );
        let second = with_active_mutant(Some(&m), || {
            let mut c = deployed();
            c.organizer_donate(at(0, O1), Amount(100));
            c.organizer_donate(at(0, O1), Amount(100))
        })
        .unwrap();
        assert!(second.last_tx_result.is_accepted());
    }

    #[test]
    fn inverted_balance_credit_underflows() {
        let m = mutant("donate::balance_credit", Operator::MathInversion);
        let obs = with_active_mutant(Some(&m), || {
            let mut c = active();
            // organizer donations leave balance at 200
            c.donate_uniform(at(100, DONOR), Amount(300))
        })
        .unwrap();
        assert_eq!(
            obs.last_tx_result,
            TxResult::Reverted(RevertReason::Underflow)
        );
    }

    /// Independent ledger oracle for milestone payouts: replays a donation
    /// sequence against plain integers.
    fn oracle_payouts(
        milestones: &[(u128, u128)],
        initial_raised: u128,
        donations: &[u128],
    ) -> Vec<Vec<usize>> {
        let mut raised = initial_raised;
        let mut paid = vec![false; milestones.len()];
        let mut order: Vec<usize> = (0..milestones.len()).collect();
        order.sort_by_key(|&i| milestones[i].0);
        donations
            .iter()
            .map(|d| {
                raised += d;
                let mut crossed = Vec::new();
                for &i in &order {
                    if !paid[i] && raised >= milestones[i].0 {
                        paid[i] = true;
                        crossed.push(i);
                    }
                }
                crossed
            })
            .collect()
    }

    #[test]
    fn one_donation_can_cross_two_milestones() {
        let specs = [(500u128, 50u128), (600, 60)];
        let donations = [250u128, 200];
        let expected = oracle_payouts(&specs, 200, &donations);
        assert_eq!(expected, vec![vec![], vec![0, 1]]);

        let mut c = deployed();
        for (t, r) in specs {
            c.add_milestone(at(0, O1), Amount(t), Amount(r));
        }
        c.organizer_donate(at(0, O1), Amount(100));
        c.organizer_donate(at(0, O2), Amount(100));
        let mut paid_before = Amount::ZERO;
        for (donation, crossed) in donations.iter().zip(&expected) {
            let obs = c.donate_uniform(at(100, DONOR), Amount(*donation));
            let reward: u128 = crossed.iter().map(|&i| specs[i].1).sum();
            assert_eq!(obs.paid_to(DONOR).0 - paid_before.0, reward);
            paid_before = obs.paid_to(DONOR);
        }
        assert_eq!(
            c.snapshot().milestone_statuses,
            vec![MilestoneStatus::Achieved, MilestoneStatus::Achieved]
        );
    }
}
