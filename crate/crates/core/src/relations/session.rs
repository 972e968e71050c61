//! Scenario plumbing shared by the relations: a campaign paired with its
//! logical clock and phase trace, and step classification helpers.

use std::collections::BTreeMap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::config::{donor, organizer, TestEnv};
use crate::contract::{Campaign, CampaignConfig, Observation, Phase, RevertReason};
use crate::types::{Address, Amount, BlockContext, Clock};

/// Why a relation run stopped early.
#[derive(Debug)]
pub(crate) enum Halt {
    Setup(String),
    Violated(String),
}

pub(crate) type Step<T> = Result<T, Halt>;

/// A setup step: a revert means the baseline could not be established.
pub(crate) fn setup(obs: Observation, step: &str) -> Step<Observation> {
    match obs.last_tx_result.reason() {
        None => Ok(obs),
        Some(r) => Err(Halt::Setup(format!("{step} reverted {r}"))),
    }
}

/// An observed step the relation requires to be accepted.
pub(crate) fn accepted(obs: Observation, step: &str) -> Step<Observation> {
    match obs.last_tx_result.reason() {
        None => Ok(obs),
        Some(r) => Err(Halt::Violated(format!("{step} reverted {r}"))),
    }
}

/// An observed step the relation requires to revert with `reason`.
pub(crate) fn rejected(obs: Observation, reason: RevertReason, step: &str) -> Step<Observation> {
    match obs.last_tx_result.reason() {
        Some(r) if r == reason => Ok(obs),
        Some(r) => Err(Halt::Violated(format!(
            "{step} reverted {r}, expected {reason}"
        ))),
        None => Err(Halt::Violated(format!(
            "{step} accepted, expected {reason}"
        ))),
    }
}

pub(crate) fn ensure(ok: bool, detail: impl FnOnce() -> String) -> Step<()> {
    if ok {
        Ok(())
    } else {
        Err(Halt::Violated(detail()))
    }
}

pub(crate) fn deadline(env: &TestEnv) -> Step<u64> {
    env.params
        .deadline()
        .ok_or_else(|| Halt::Setup("deadline outside the clock range".into()))
}

pub(crate) struct Session {
    pub c: Campaign,
    pub clock: Clock,
    pub trace: Vec<Phase>,
}

impl Session {
    /// Deploys `config` one second before the window opens.
    pub fn deploy(config: CampaignConfig) -> Result<Session, RevertReason> {
        let clock = Clock::starting_at(config.start_time.saturating_sub(1));
        let deployer = config.organizers.first().copied().unwrap_or(organizer(0));
        let c = Campaign::deploy(config, clock.ctx(deployer))?;
        let trace = vec![c.phase()];
        Ok(Session { c, clock, trace })
    }

    /// Deploys the environment's campaign and registers its milestones.
    pub fn open(env: &TestEnv) -> Step<Session> {
        let mut s = Session::deploy(env.params.campaign_config())
            .map_err(|r| Halt::Setup(format!("deploy reverted {r}")))?;
        for m in &env.params.milestones {
            setup(
                s.add_milestone(organizer(0), Amount(m.target), Amount(m.reward)),
                "milestone registration",
            )?;
        }
        Ok(s)
    }

    /// Every organizer donates the minimum, in configuration order.
    pub fn activate(&mut self, env: &TestEnv) -> Step<()> {
        for o in env.params.organizer_addresses() {
            setup(
                self.organizer_donate(o, Amount(env.params.min_donation)),
                "organizer donation",
            )?;
        }
        Ok(())
    }

    pub fn at(&mut self, t: u64) -> &mut Self {
        self.clock.advance_to(t);
        self
    }

    fn ctx(&self, who: Address) -> BlockContext {
        self.clock.ctx(who)
    }

    fn note(&mut self, obs: Observation) -> Observation {
        if self.trace.last() != Some(&obs.phase) {
            self.trace.push(obs.phase);
        }
        obs
    }

    pub fn organizer_donate(&mut self, who: Address, amount: Amount) -> Observation {
        let obs = self.c.organizer_donate(self.ctx(who), amount);
        self.note(obs)
    }

    pub fn donate(&mut self, who: Address, amount: Amount) -> Observation {
        let obs = self.c.donate_uniform(self.ctx(who), amount);
        self.note(obs)
    }

    pub fn donate_split(
        &mut self,
        who: Address,
        shares: &BTreeMap<Address, Amount>,
    ) -> Observation {
        let obs = self.c.donate_split(self.ctx(who), shares);
        self.note(obs)
    }

    pub fn add_milestone(&mut self, who: Address, target: Amount, reward: Amount) -> Observation {
        let obs = self.c.add_milestone(self.ctx(who), target, reward);
        self.note(obs)
    }

    pub fn end(&mut self) -> Observation {
        let obs = self.c.end_campaign(self.ctx(donor(0)));
        self.note(obs)
    }

    pub fn withdraw(&mut self, who: Address) -> Observation {
        let obs = self.c.withdraw(self.ctx(who));
        self.note(obs)
    }

    pub fn refund(&mut self, who: Address) -> Observation {
        let obs = self.c.refund_unreached(self.ctx(who));
        self.note(obs)
    }

    pub fn close(&mut self, who: Address) -> Observation {
        let obs = self.c.close_contract(self.ctx(who));
        self.note(obs)
    }

    pub fn snapshot(&self) -> Observation {
        self.c.snapshot()
    }
}

/// `amount` spread over the beneficiaries, remainder to the first.
pub(crate) fn even_shares(beneficiaries: &[Address], amount: u128) -> BTreeMap<Address, Amount> {
    let n = beneficiaries.len().max(1) as u128;
    beneficiaries
        .iter()
        .enumerate()
        .map(|(i, b)| {
            let extra = if i == 0 { amount % n } else { 0 };
            (*b, Amount(amount / n + extra))
        })
        .collect()
}

/// Donations of ordinary size: the minimum plus up to four further units of
/// it.
pub(crate) fn moderate_amounts(rng: &mut ChaCha8Rng, min: u128, count: usize) -> Vec<u128> {
    let unit = min.min(1 << 32);
    (0..count)
        .map(|_| min.saturating_add(rng.gen_range(0..=4u128) * unit))
        .collect()
}
