//! Metamorphic relations over the campaign model.

mod mrs;
pub(crate) mod session;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::TestEnv;
use crate::contract::Observation;
use crate::mutation::{contract_mutants, Mutant, Operator};
use session::Halt;

pub use mrs::{LIFECYCLE_DONATIONS, REPEAT_WITHDRAWALS, SPLIT_PARTS, SPLIT_SOURCE_DONATION};

pub const MR_COUNT: u8 = 17;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum MrResult {
    Pass,
    Violated,
    SetupError,
}

impl MrResult {
    pub fn name(self) -> &'static str {
        match self {
            MrResult::Pass => "PASS",
            MrResult::Violated => "VIOLATED",
            MrResult::SetupError => "SETUP_ERROR",
        }
    }
}

impl fmt::Display for MrResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MrVerdict {
    pub mr_id: u8,
    pub result: MrResult,
    pub detail: String,
    pub source_obs: Option<Observation>,
    pub followup_obs: Option<Observation>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Error)]
#[error("UNKNOWN_MR: no relation with id {0}")]
pub struct UnknownMr(pub u32);

/// Observations captured while a relation runs. The latest follow-up
/// observation wins.
#[derive(Default)]
pub(crate) struct Trial {
    source: Option<Observation>,
    followup: Option<Observation>,
}

impl Trial {
    pub(crate) fn source(&mut self, obs: Observation) -> Observation {
        self.source = Some(obs.clone());
        obs
    }

    pub(crate) fn followup(&mut self, obs: Observation) -> Observation {
        self.followup = Some(obs.clone());
        obs
    }
}

type Relation = fn(&TestEnv, &mut Trial) -> session::Step<String>;

struct Entry {
    name: &'static str,
    formula: &'static str,
    description: &'static str,
    run: Relation,
    target: (Operator, &'static str),
}

const RELATIONS: [Entry; MR_COUNT as usize] = [
    Entry {
        name: "State transitions",
        formula: "T(S) = STARTED; T(S') = DONATION; T(S'') = ENDED",
        description: "A fresh campaign is STARTED. Activating it and ending it after the deadline walks STARTED, DONATION, ENDED; ending before activation is refused.",
        run: mrs::state_transitions,
        target: (Operator::ModifierRemoval, "end_campaign::in_donation"),
    },
    Entry {
        name: "Donation splitting",
        formula: "A(D) = A(D')",
        description: "One donation D and a sequence of smaller donations summing to D raise the same total.",
        run: mrs::donation_splitting,
        target: (Operator::MathInversion, "donate::total_raised_credit"),
    },
    Entry {
        name: "Duplicate beneficiaries at deployment",
        formula: "S(C) != S(C')",
        description: "Deploying with a repeated beneficiary is rejected with DUPLICATE_PARTICIPANT while the unique list deploys.",
        run: mrs::duplicate_beneficiaries,
        target: (Operator::ModifierRemoval, "deploy::unique_participants"),
    },
    Entry {
        name: "Organizer activation gate",
        formula: "T(S') = DONATION only after every organizer donated",
        description: "The campaign stays STARTED after each proper prefix of organizer donations and enters DONATION after the last.",
        run: mrs::organizer_gate,
        target: (Operator::ConditionBoundary, "organizer_donate::all_organizers_donated"),
    },
    Entry {
        name: "Milestone reward payout",
        formula: "B(S') = B(S) - R",
        description: "A donation crossing a milestone target changes the balance by the donation minus exactly that milestone's reward.",
        run: mrs::milestone_reward_payout,
        target: (Operator::MathInversion, "milestones::reward_payout"),
    },
    Entry {
        name: "Donation window",
        formula: "D(S') != D(S)",
        description: "A donation inside the window is accepted; donations before the start and at the deadline revert OUT_OF_WINDOW.",
        run: mrs::donation_window,
        target: (Operator::ConditionNegation, "donate::before_deadline"),
    },
    Entry {
        name: "Refund of unreached milestones",
        formula: "R(S) = R(S')",
        description: "After the campaign ends, refunding turns exactly the pending milestones into REFUNDED and returns each escrow to its creator. Refunds while donations are open are refused.",
        run: mrs::refund_unreached,
        target: (Operator::ModifierRemoval, "refund::in_ended"),
    },
    Entry {
        name: "Participant limit",
        formula: "I(S) != I(S')",
        description: "Deployment at the participant limit succeeds; one organizer or beneficiary more reverts LIMIT_EXCEEDED.",
        run: mrs::participant_limit,
        target: (Operator::ModifierRemoval, "deploy::organizer_limit"),
    },
    Entry {
        name: "Minimum and zero donations",
        formula: "D(S) != D(S')",
        description: "A donation of exactly the minimum is accepted; one below it and zero revert BELOW_MIN.",
        run: mrs::minimum_donation,
        target: (Operator::ConditionNegation, "donate::amount_at_least_min"),
    },
    Entry {
        name: "Rapid state transitions",
        formula: "T(S) = T(S')",
        description: "The full lifecycle run with one-second gaps and run with every stretch at a single timestamp gives the same phase trace and final state, with no reverts.",
        run: mrs::rapid_transitions,
        target: (Operator::IncrementsMirror, "organizer_donate::donated_count"),
    },
    Entry {
        name: "Simultaneous withdrawals",
        formula: "W(S') = W(S)",
        description: "Sequential withdrawals and same-timestamp withdrawal bursts under every beneficiary ordering, submitted twice, pay out the same total.",
        run: mrs::simultaneous_withdrawals,
        target: (Operator::MathInversion, "withdraw::allocation_debit"),
    },
    Entry {
        name: "Last-minute donations",
        formula: "D(S) = D(S')",
        description: "A donation one second before the deadline is accepted; donations at and after the deadline revert OUT_OF_WINDOW.",
        run: mrs::last_minute_donation,
        target: (Operator::ConditionBoundary, "donate::before_deadline"),
    },
    Entry {
        name: "Overflow protection",
        formula: "A(S') = A(S)",
        description: "Moderate donations keep the ledgers consistent. Extreme probes either revert without touching storage or are accounted exactly; totals never wrap.",
        run: mrs::overflow_protection,
        target: (Operator::MathInversion, "split::share"),
    },
    Entry {
        name: "Invalid milestone rewards",
        formula: "M(S) != M(S')",
        description: "A milestone with a valid reward is registered; zero and above-cap rewards revert INVALID_REWARD.",
        run: mrs::invalid_milestone,
        target: (Operator::ConditionNegation, "add_milestone::reward_positive"),
    },
    Entry {
        name: "Rapid organizer donations",
        formula: "T(S') = T(S)",
        description: "Organizer donations spaced in time and at one timestamp, under every ordering, all lead to DONATION.",
        run: mrs::rapid_organizer_donations,
        target: (Operator::IncrementsInversion, "organizer_donate::donated_count"),
    },
    Entry {
        name: "Closure with pending milestones",
        formula: "C(S) != C(S')",
        description: "Closing succeeds once every milestone is resolved and reverts MILESTONES_PENDING while one is still pending.",
        run: mrs::closure_with_pending,
        target: (Operator::ModifierRemoval, "close::milestones_resolved"),
    },
    Entry {
        name: "Repeated withdrawals",
        formula: "W(S) = W(S')",
        description: "Extra withdrawals by a beneficiary who already withdrew are accepted and leave the withdrawn total unchanged.",
        run: mrs::repeated_withdrawals,
        target: (Operator::IncrementsMirror, "withdraw::withdrawn_credit"),
    },
];

fn entry(mr_id: u8) -> Result<&'static Entry, UnknownMr> {
    mr_id
        .checked_sub(1)
        .and_then(|i| RELATIONS.get(i as usize))
        .ok_or(UnknownMr(mr_id as u32))
}

pub fn all_mr_ids() -> Vec<u8> {
    (1..=MR_COUNT).collect()
}

/// Runs one relation on fresh campaigns under whatever mutant is active on
/// the calling thread.
pub fn run_mr(mr_id: u8, env: &TestEnv) -> Result<MrVerdict, UnknownMr> {
    let e = entry(mr_id)?;
    let mut trial = Trial::default();
    let (result, detail) = match (e.run)(env, &mut trial) {
        Ok(detail) => (MrResult::Pass, detail),
        Err(Halt::Violated(detail)) => (MrResult::Violated, detail),
        Err(Halt::Setup(detail)) => (MrResult::SetupError, detail),
    };
    Ok(MrVerdict {
        mr_id,
        result,
        detail,
        source_obs: trial.source,
        followup_obs: trial.followup,
    })
}

/// Catalog row for documentation tooling.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MrInfo {
    pub id: u8,
    pub name: String,
    /// The relation in symbols.
    #[serde(rename = "paper_quote")]
    pub formula: String,
    pub description: String,
}

pub fn catalog() -> Vec<MrInfo> {
    RELATIONS
        .iter()
        .zip(1..)
        .map(|(e, id)| MrInfo {
            id,
            name: e.name.into(),
            formula: e.formula.into(),
            description: e.description.into(),
        })
        .collect()
}

pub fn catalog_json() -> String {
    serde_json::to_string_pretty(&catalog()).expect("catalog serializes")
}

/// (operator, site label) of the mutant each relation is designed to kill.
pub fn target_of(mr_id: u8) -> Result<(Operator, &'static str), UnknownMr> {
    entry(mr_id).map(|e| e.target)
}

pub fn targeted_mutant(mr_id: u8) -> Result<Mutant, UnknownMr> {
    let (op, label) = target_of(mr_id)?;
    Ok(contract_mutants()
        .into_iter()
        .find(|m| m.operator == op && m.label == label)
        .unwrap_or_else(|| panic!("no {op} mutant at {label}")))
}
