//! The seventeen relations. Each builds fresh campaigns for its source and
//! follow-up executions.

use itertools::Itertools;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::session::{
    accepted, deadline, ensure, even_shares, moderate_amounts, rejected, setup, Halt, Session, Step,
};
use super::Trial;
use crate::config::{beneficiary, donor, organizer, TestEnv, ROLE_CAPACITY};
use crate::contract::{MilestoneStatus, Phase, RevertReason};
use crate::types::{Address, Amount};

/// Single donation of the donation-splitting relation.
pub const SPLIT_SOURCE_DONATION: u128 = 600;
/// Parts of the follow-up donation sequence.
pub const SPLIT_PARTS: u128 = 3;
/// Public donations in the lifecycle relations.
pub const LIFECYCLE_DONATIONS: usize = 3;
/// Extra withdrawals of the repeated-withdrawal relation.
pub const REPEAT_WITHDRAWALS: usize = 3;

const UNREACHABLE_TARGET: u128 = u128::MAX / 2;

fn rng(env: &TestEnv, mr: u8) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(env.seed ^ (mr as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15))
}

/// Every ordering of `items` when there are at most four, rotations otherwise.
fn orderings(items: &[Address]) -> Vec<Vec<Address>> {
    if items.len() <= 4 {
        items.iter().copied().permutations(items.len()).collect()
    } else {
        (0..items.len())
            .map(|k| {
                let mut v = items.to_vec();
                v.rotate_left(k);
                v
            })
            .collect()
    }
}

fn organizer_total(env: &TestEnv) -> Step<u128> {
    env.params
        .min_donation
        .checked_mul(env.params.organizers as u128)
        .ok_or_else(|| Halt::Setup("organizer donations overflow".into()))
}

fn milestone_reward(env: &TestEnv) -> Step<u128> {
    if env.params.max_reward == 0 {
        return Err(Halt::Setup("reward cap admits no milestone".into()));
    }
    Ok(env.params.max_reward.min(50))
}

/// Ended campaign after activation and a few seeded donations.
fn ended_campaign(env: &TestEnv, mr: u8) -> Step<Session> {
    let end = deadline(env)?;
    let mut s = Session::open(env)?;
    s.activate(env)?;
    s.at(env.params.start_time);
    for (i, amount) in moderate_amounts(
        &mut rng(env, mr),
        env.params.min_donation,
        LIFECYCLE_DONATIONS,
    )
    .into_iter()
    .enumerate()
    {
        setup(s.donate(donor(i), Amount(amount)), "donation")?;
    }
    s.at(end);
    setup(s.end(), "end_campaign")?;
    Ok(s)
}

fn total_withdrawn(s: &Session) -> Step<u128> {
    s.snapshot()
        .total_withdrawn()
        .map(|a| a.0)
        .ok_or_else(|| Halt::Violated("withdrawn total overflows".into()))
}

pub(super) fn state_transitions(env: &TestEnv, t: &mut Trial) -> Step<String> {
    let s = Session::open(env)?;
    let source = t.source(s.snapshot());
    if source.phase != Phase::Started {
        return Err(Halt::Setup(format!("fresh campaign in {}", source.phase)));
    }

    let end = deadline(env)?;
    let mut f = Session::open(env)?;
    f.at(end);
    let premature = f.end();
    ensure(!premature.last_tx_result.is_accepted(), || {
        "end_campaign accepted before activation".into()
    })?;
    for o in env.params.organizer_addresses() {
        accepted(
            f.organizer_donate(o, Amount(env.params.min_donation)),
            "organizer donation",
        )?;
    }
    accepted(f.end(), "end_campaign")?;
    t.followup(f.snapshot());
    let expected = [Phase::Started, Phase::Donation, Phase::Ended];
    ensure(f.trace == expected, || format!("phase trace {:?}", f.trace))?;
    Ok("STARTED -> DONATION -> ENDED".into())
}

pub(super) fn donation_splitting(env: &TestEnv, t: &mut Trial) -> Step<String> {
    let min = env.params.min_donation;
    let d = SPLIT_SOURCE_DONATION;
    if min == 0 || d < min {
        return Err(Halt::Setup(format!("donation {d} below minimum {min}")));
    }
    // smallest admissible donations first, the rest in the last part
    let k = SPLIT_PARTS.min(d / min);
    let mut parts = vec![min; k as usize];
    parts[k as usize - 1] = d - min * (k - 1);

    let mut s = Session::open(env)?;
    s.activate(env)?;
    s.at(env.params.start_time);
    let source = t.source(accepted(s.donate(donor(0), Amount(d)), "single donation")?);

    let mut f = Session::open(env)?;
    f.activate(env)?;
    f.at(env.params.start_time);
    let bens = env.params.beneficiary_addresses();
    for (i, part) in parts.iter().enumerate() {
        let obs = if i % 2 == 1 {
            f.donate_split(donor(0), &even_shares(&bens, *part))
        } else {
            f.donate(donor(0), Amount(*part))
        };
        accepted(obs, "partial donation")?;
    }
    let followup = t.followup(f.snapshot());
    ensure(source.total_raised == followup.total_raised, || {
        format!(
            "A(D) {} != A(D') {}",
            source.total_raised.0, followup.total_raised.0
        )
    })?;
    Ok(format!("A(D) = A(D') = {}", source.total_raised.0))
}

pub(super) fn duplicate_beneficiaries(env: &TestEnv, t: &mut Trial) -> Step<String> {
    let s = Session::open(env)?;
    t.source(s.snapshot());

    let mut config = env.params.campaign_config();
    match config.beneficiaries.len() {
        0 => return Err(Halt::Setup("no beneficiaries".into())),
        1 => config.beneficiaries.push(config.beneficiaries[0]),
        n => config.beneficiaries[n - 1] = config.beneficiaries[0],
    }
    match Session::deploy(config) {
        Ok(f) => {
            t.followup(f.snapshot());
            Err(Halt::Violated(
                "deploy with duplicated beneficiary accepted".into(),
            ))
        }
        Err(RevertReason::DuplicateParticipant) => Ok("duplicate deployment rejected".into()),
        Err(r) => Err(Halt::Violated(format!(
            "duplicate deployment reverted {r}, expected DUPLICATE_PARTICIPANT"
        ))),
    }
}

pub(super) fn organizer_gate(env: &TestEnv, t: &mut Trial) -> Step<String> {
    let s = Session::open(env)?;
    let source = t.source(s.snapshot());
    if source.phase != Phase::Started {
        return Err(Halt::Setup(format!("fresh campaign in {}", source.phase)));
    }

    let mut f = Session::open(env)?;
    let organizers = env.params.organizer_addresses();
    for (i, o) in organizers.iter().enumerate() {
        let obs = accepted(
            f.organizer_donate(*o, Amount(env.params.min_donation)),
            "organizer donation",
        )?;
        let expected = if i + 1 < organizers.len() {
            Phase::Started
        } else {
            Phase::Donation
        };
        ensure(obs.phase == expected, || {
            format!(
                "after {} of {} organizers phase {}",
                i + 1,
                organizers.len(),
                obs.phase
            )
        })?;
    }
    t.followup(f.snapshot());
    Ok(format!("DONATION after {} organizers", organizers.len()))
}

pub(super) fn milestone_reward_payout(env: &TestEnv, t: &mut Trial) -> Step<String> {
    let min = env.params.min_donation;
    let reward = milestone_reward(env)?;
    let activation = organizer_total(env)?;
    let overflow = || Halt::Setup("milestone targets overflow".into());
    let target = activation
        .checked_add(min.checked_mul(2).ok_or_else(overflow)?)
        .ok_or_else(overflow)?;
    let further = target
        .checked_add(min.checked_mul(10).ok_or_else(overflow)?)
        .ok_or_else(overflow)?;

    let build = || -> Step<Session> {
        let mut s = Session::deploy(env.params.campaign_config())
            .map_err(|r| Halt::Setup(format!("deploy reverted {r}")))?;
        for m in [further, target] {
            setup(
                s.add_milestone(organizer(0), Amount(m), Amount(reward)),
                "milestone registration",
            )?;
        }
        s.activate(env)?;
        Ok(s)
    };

    let s = build()?;
    let before = t.source(s.snapshot()).balance.0;

    let mut f = build()?;
    f.at(env.params.start_time);
    let d = target - activation;
    let obs = t.followup(accepted(
        f.donate(donor(0), Amount(d)),
        "crossing donation",
    )?);
    let expected = before
        .checked_add(d)
        .and_then(|x| x.checked_sub(reward))
        .ok_or_else(|| Halt::Violated("expected balance out of range".into()))?;
    ensure(obs.balance.0 == expected, || {
        format!(
            "B(S') {} != B(S) {} + {} - R {}",
            obs.balance.0, before, d, reward
        )
    })?;
    ensure(
        obs.milestone_statuses == [MilestoneStatus::Achieved, MilestoneStatus::Pending],
        || format!("milestone statuses {:?}", obs.milestone_statuses),
    )?;
    Ok(format!("B(S') = B(S) + {d} - {reward}"))
}

pub(super) fn donation_window(env: &TestEnv, t: &mut Trial) -> Step<String> {
    let end = deadline(env)?;
    let start = env.params.start_time;
    let min = Amount(env.params.min_donation);

    let mut s = Session::open(env)?;
    s.activate(env)?;
    s.at(start);
    t.source(accepted(
        s.donate(donor(0), min),
        "donation inside the window",
    )?);

    let mut f = Session::open(env)?;
    f.activate(env)?;
    if start > 0 {
        f.at(start - 1);
        rejected(
            f.donate(donor(0), min),
            RevertReason::OutOfWindow,
            "donation before start",
        )?;
    }
    f.at(end);
    let obs = rejected(
        f.donate(donor(0), min),
        RevertReason::OutOfWindow,
        "donation after end",
    )?;
    t.followup(obs);
    Ok("outside-window donations rejected".into())
}

pub(super) fn refund_unreached(env: &TestEnv, t: &mut Trial) -> Step<String> {
    let min = env.params.min_donation;
    let reward = milestone_reward(env)?;
    let activation = organizer_total(env)?;
    let reachable = activation
        .checked_add(min)
        .ok_or_else(|| Halt::Setup("milestone target overflows".into()))?;
    let organizers = env.params.organizer_addresses();
    let last = *organizers
        .last()
        .ok_or_else(|| Halt::Setup("no organizers".into()))?;
    let end = deadline(env)?;

    let prefix = || -> Step<Session> {
        let mut s = Session::deploy(env.params.campaign_config())
            .map_err(|r| Halt::Setup(format!("deploy reverted {r}")))?;
        setup(
            s.add_milestone(organizer(0), Amount(reachable), Amount(reward)),
            "milestone registration",
        )?;
        setup(
            s.add_milestone(last, Amount(UNREACHABLE_TARGET), Amount(reward)),
            "milestone registration",
        )?;
        s.activate(env)?;
        s.at(env.params.start_time);
        setup(s.donate(donor(0), Amount(min)), "donation")?;
        let early = s.refund(organizer(0));
        ensure(!early.last_tx_result.is_accepted(), || {
            "refund accepted while donations are open".into()
        })?;
        s.at(end);
        setup(s.end(), "end_campaign")?;
        Ok(s)
    };

    let s = prefix()?;
    t.source(s.snapshot());

    let mut f = prefix()?;
    let pending: Vec<(usize, Address, u128)> =
        f.c.storage()
            .milestones
            .iter()
            .enumerate()
            .filter(|(_, m)| m.status == MilestoneStatus::Pending)
            .map(|(i, m)| (i, m.creator, m.reward.0))
            .collect();
    let before = f.snapshot();
    let after = t.followup(accepted(f.refund(organizer(0)), "refund")?);
    for (i, status) in before.milestone_statuses.iter().enumerate() {
        let want = if *status == MilestoneStatus::Pending {
            MilestoneStatus::Refunded
        } else {
            *status
        };
        ensure(after.milestone_statuses.get(i) == Some(&want), || {
            format!(
                "milestone {i} is {:?} after refund",
                after.milestone_statuses.get(i)
            )
        })?;
    }
    for o in &organizers {
        let owed: u128 = pending.iter().filter(|p| p.1 == *o).map(|p| p.2).sum();
        let received = after.paid_to(*o).0.checked_sub(before.paid_to(*o).0);
        ensure(received == Some(owed), || {
            format!("organizer {o} refunded {received:?}, escrowed {owed}")
        })?;
    }
    Ok(format!("{} unreached milestone(s) refunded", pending.len()))
}

pub(super) fn participant_limit(env: &TestEnv, t: &mut Trial) -> Step<String> {
    let max = env.params.max_participants;
    if max >= ROLE_CAPACITY {
        return Err(Halt::Setup(format!(
            "limit {max} exceeds addressable participants"
        )));
    }
    let sized = |orgs: usize, bens: usize| {
        let mut config = env.params.campaign_config();
        config.organizers = (0..orgs).map(organizer).collect();
        config.beneficiaries = (0..bens).map(beneficiary).collect();
        config
    };
    let s = Session::deploy(sized(max, max))
        .map_err(|r| Halt::Setup(format!("deploy at the limit reverted {r}")))?;
    t.source(s.snapshot());

    for (what, config) in [
        ("organizers", sized(max + 1, max)),
        ("beneficiaries", sized(max, max + 1)),
    ] {
        match Session::deploy(config) {
            Ok(f) => {
                t.followup(f.snapshot());
                return Err(Halt::Violated(format!(
                    "deploy with {} {what} accepted",
                    max + 1
                )));
            }
            Err(RevertReason::LimitExceeded) => {}
            Err(r) => {
                return Err(Halt::Violated(format!(
                    "deploy with {} {what} reverted {r}, expected LIMIT_EXCEEDED",
                    max + 1
                )))
            }
        }
    }
    Ok(format!("limit {max} enforced"))
}

pub(super) fn minimum_donation(env: &TestEnv, t: &mut Trial) -> Step<String> {
    let min = env.params.min_donation;
    let mut s = Session::open(env)?;
    s.activate(env)?;
    s.at(env.params.start_time);
    t.source(accepted(
        s.donate(donor(0), Amount(min)),
        "minimum donation",
    )?);

    let mut f = Session::open(env)?;
    f.activate(env)?;
    f.at(env.params.start_time);
    for amount in [min.saturating_sub(1), 0] {
        let obs = rejected(
            f.donate(donor(0), Amount(amount)),
            RevertReason::BelowMin,
            "small donation",
        )?;
        t.followup(obs);
    }
    Ok("sub-minimum donations rejected".into())
}

/// Lifecycle up to closure. `paced` spaces steps one second apart, otherwise
/// each stretch runs at a single timestamp.
fn lifecycle(env: &TestEnv, paced: bool) -> Step<Session> {
    let start = env.params.start_time;
    let end = deadline(env)?;
    let mut s = Session::open(env)?;
    let amounts = moderate_amounts(
        &mut rng(env, 10),
        env.params.min_donation,
        LIFECYCLE_DONATIONS,
    );
    let bens = env.params.beneficiary_addresses();
    let tick = |s: &mut Session, base: u64, k: usize| {
        if paced {
            s.at(base.saturating_add(k as u64));
        } else {
            s.at(base);
        }
    };

    let organizers = env.params.organizer_addresses();
    for (k, o) in organizers.iter().enumerate() {
        tick(&mut s, start, k);
        accepted(
            s.organizer_donate(*o, Amount(env.params.min_donation)),
            "organizer donation",
        )?;
    }
    for (j, amount) in amounts.iter().enumerate() {
        tick(&mut s, start, organizers.len() + j);
        let obs = if j % 2 == 1 {
            s.donate_split(donor(j), &even_shares(&bens, *amount))
        } else {
            s.donate(donor(j), Amount(*amount))
        };
        accepted(obs, "donation")?;
    }
    tick(&mut s, end, 0);
    accepted(s.end(), "end_campaign")?;
    tick(&mut s, end, 1);
    accepted(s.refund(organizer(0)), "refund")?;
    for (k, b) in bens.iter().enumerate() {
        tick(&mut s, end, 2 + k);
        accepted(s.withdraw(*b), "withdraw")?;
    }
    tick(&mut s, end, 2 + bens.len());
    accepted(s.close(organizer(0)), "close")?;
    Ok(s)
}

pub(super) fn rapid_transitions(env: &TestEnv, t: &mut Trial) -> Step<String> {
    let steps = (env.params.organizers + LIFECYCLE_DONATIONS) as u64;
    if steps > env.params.duration {
        return Err(Halt::Setup(
            "paced schedule does not fit the donation window".into(),
        ));
    }
    let s = lifecycle(env, true)?;
    let source = t.source(s.snapshot());
    let f = lifecycle(env, false)?;
    let followup = t.followup(f.snapshot());
    ensure(s.trace == f.trace, || {
        format!("T(S) {:?} != T(S') {:?}", s.trace, f.trace)
    })?;
    ensure(source == followup, || "final observations differ".into())?;
    Ok(format!("T(S) = T(S') = {:?}", s.trace))
}

pub(super) fn simultaneous_withdrawals(env: &TestEnv, t: &mut Trial) -> Step<String> {
    let end = deadline(env)?;
    let bens = env.params.beneficiary_addresses();
    if bens.is_empty() {
        return Err(Halt::Setup("no beneficiaries".into()));
    }

    let mut s = ended_campaign(env, 11)?;
    for (k, b) in bens.iter().enumerate() {
        s.at(end.saturating_add(1 + k as u64));
        accepted(s.withdraw(*b), "sequential withdrawal")?;
    }
    t.source(s.snapshot());
    let w = total_withdrawn(&s)?;

    let orders = orderings(&bens);
    for order in &orders {
        let mut f = ended_campaign(env, 11)?;
        f.at(end.saturating_add(1));
        for _ in 0..2 {
            for b in order {
                accepted(f.withdraw(*b), "simultaneous withdrawal")?;
            }
        }
        t.followup(f.snapshot());
        let w2 = total_withdrawn(&f)?;
        ensure(w2 == w, || {
            format!("W(S') {w2} != W(S) {w} for order {order:?}")
        })?;
    }
    Ok(format!("W = {w} over {} orderings", orders.len()))
}

pub(super) fn last_minute_donation(env: &TestEnv, t: &mut Trial) -> Step<String> {
    let end = deadline(env)?;
    let min = Amount(env.params.min_donation);

    let mut s = Session::open(env)?;
    s.activate(env)?;
    s.at(end - 1);
    t.source(accepted(
        s.donate(donor(0), min),
        "donation one second before the deadline",
    )?);

    let mut f = Session::open(env)?;
    f.activate(env)?;
    for when in [end, end.saturating_add(1)] {
        f.at(when);
        let obs = rejected(
            f.donate(donor(0), min),
            RevertReason::OutOfWindow,
            "late donation",
        )?;
        t.followup(obs);
    }
    Ok("last second accepted, deadline rejected".into())
}

pub(super) fn overflow_protection(env: &TestEnv, t: &mut Trial) -> Step<String> {
    let min = env.params.min_donation;
    if min > 1u128 << 127 {
        return Err(Halt::Setup(
            "minimum donation leaves no room for moderate amounts".into(),
        ));
    }
    let moderate = moderate_amounts(&mut rng(env, 13), min, LIFECYCLE_DONATIONS);
    let run_moderate = |s: &mut Session| -> Step<()> {
        for (i, amount) in moderate.iter().enumerate() {
            accepted(s.donate(donor(i), Amount(*amount)), "moderate donation")?;
            let breaches = s.c.audit();
            ensure(breaches.is_empty(), || {
                format!("ledger audit failed: {breaches:?}")
            })?;
        }
        Ok(())
    };

    let mut s = Session::open(env)?;
    s.activate(env)?;
    s.at(env.params.start_time);
    run_moderate(&mut s)?;
    let source = t.source(s.snapshot());

    let mut f = Session::open(env)?;
    f.activate(env)?;
    f.at(env.params.start_time);
    run_moderate(&mut f)?;
    let mut accepted_extra = 0u128;
    for probe in [1u128 << 127, u128::MAX - 1, min] {
        let before_storage = f.c.storage().clone();
        let before = f.snapshot();
        let obs = f.donate(donor(9), Amount(probe));
        if obs.last_tx_result.is_accepted() {
            accepted_extra = accepted_extra
                .checked_add(probe)
                .ok_or_else(|| Halt::Violated("accepted probes exceed the amount width".into()))?;
            ensure(
                obs.total_raised.0.checked_sub(before.total_raised.0) == Some(probe),
                || {
                    format!(
                        "probe {probe} moved total_raised from {} to {}",
                        before.total_raised.0, obs.total_raised.0
                    )
                },
            )?;
        } else {
            ensure(f.c.storage() == &before_storage, || {
                format!("reverted probe {probe} changed storage")
            })?;
        }
        ensure(
            obs.total_raised >= before.total_raised && obs.inflow_total >= before.inflow_total,
            || format!("accumulators decreased on probe {probe}"),
        )?;
        let breaches = f.c.audit();
        ensure(breaches.is_empty(), || {
            format!("ledger audit failed after probe {probe}: {breaches:?}")
        })?;
    }
    let followup = t.followup(f.snapshot());
    let expected = source.total_raised.0.checked_add(accepted_extra);
    ensure(expected == Some(followup.total_raised.0), || {
        format!(
            "A(S') {} != A(S) {} + accepted probes {accepted_extra}",
            followup.total_raised.0, source.total_raised.0
        )
    })?;
    Ok(format!(
        "accounting exact, {accepted_extra} wei of probes accepted"
    ))
}

pub(super) fn invalid_milestone(env: &TestEnv, t: &mut Trial) -> Step<String> {
    let max = env.params.max_reward;
    let reward = milestone_reward(env)?;
    let target = Amount(UNREACHABLE_TARGET);

    let mut s = Session::open(env)?;
    t.source(accepted(
        s.add_milestone(organizer(0), target, Amount(reward)),
        "valid milestone",
    )?);

    let mut f = Session::open(env)?;
    let mut invalid = vec![0u128];
    if let Some(over) = max.checked_add(1) {
        invalid.push(over);
    }
    for r in invalid {
        let obs = rejected(
            f.add_milestone(organizer(0), target, Amount(r)),
            RevertReason::InvalidReward,
            "invalid milestone",
        )?;
        t.followup(obs);
    }
    Ok("invalid rewards rejected".into())
}

pub(super) fn rapid_organizer_donations(env: &TestEnv, t: &mut Trial) -> Step<String> {
    let min = Amount(env.params.min_donation);
    let organizers = env.params.organizer_addresses();

    let mut s = Session::open(env)?;
    for o in &organizers {
        s.clock.advance_by(10);
        accepted(s.organizer_donate(*o, min), "spaced organizer donation")?;
    }
    let source = t.source(s.snapshot());
    ensure(source.phase == Phase::Donation, || {
        format!("T(S) = {}", source.phase)
    })?;

    let orders = orderings(&organizers);
    for order in &orders {
        let mut f = Session::open(env)?;
        for o in order {
            accepted(f.organizer_donate(*o, min), "rapid organizer donation")?;
        }
        let obs = t.followup(f.snapshot());
        ensure(obs.phase == source.phase, || {
            format!("T(S') = {} for order {order:?}", obs.phase)
        })?;
    }
    Ok(format!("DONATION under {} orderings", orders.len()))
}

pub(super) fn closure_with_pending(env: &TestEnv, t: &mut Trial) -> Step<String> {
    let reward = milestone_reward(env)?;
    let end = deadline(env)?;
    let build = |refund: bool| -> Step<Session> {
        let mut s = Session::deploy(env.params.campaign_config())
            .map_err(|r| Halt::Setup(format!("deploy reverted {r}")))?;
        setup(
            s.add_milestone(organizer(0), Amount(UNREACHABLE_TARGET), Amount(reward)),
            "milestone registration",
        )?;
        s.activate(env)?;
        s.at(env.params.start_time);
        setup(
            s.donate(donor(0), Amount(env.params.min_donation)),
            "donation",
        )?;
        s.at(end);
        setup(s.end(), "end_campaign")?;
        for b in env.params.beneficiary_addresses() {
            setup(s.withdraw(b), "withdraw")?;
        }
        if refund {
            setup(s.refund(organizer(0)), "refund")?;
        }
        Ok(s)
    };

    let mut s = build(true)?;
    let obs = t.source(accepted(
        s.close(organizer(0)),
        "close with resolved milestones",
    )?);
    ensure(obs.phase == Phase::Closed, || {
        format!("C(S) left phase {}", obs.phase)
    })?;

    let mut f = build(false)?;
    t.followup(rejected(
        f.close(organizer(0)),
        RevertReason::MilestonesPending,
        "close with a pending milestone",
    )?);
    Ok("closure blocked by pending milestone".into())
}

pub(super) fn repeated_withdrawals(env: &TestEnv, t: &mut Trial) -> Step<String> {
    let bens = env.params.beneficiary_addresses();
    let first = *bens
        .first()
        .ok_or_else(|| Halt::Setup("no beneficiaries".into()))?;
    let withdraw_all = |s: &mut Session| -> Step<()> {
        for b in &bens {
            accepted(s.withdraw(*b), "withdrawal")?;
        }
        Ok(())
    };

    let mut s = ended_campaign(env, 17)?;
    withdraw_all(&mut s)?;
    t.source(s.snapshot());
    let w = total_withdrawn(&s)?;

    let mut f = ended_campaign(env, 17)?;
    withdraw_all(&mut f)?;
    for _ in 0..REPEAT_WITHDRAWALS {
        accepted(f.withdraw(first), "repeated withdrawal")?;
    }
    t.followup(f.snapshot());
    let w2 = total_withdrawn(&f)?;
    ensure(w2 == w, || format!("W(S') {w2} != W(S) {w}"))?;
    ensure(f.c.is_conserved(), || "inflow != balance + outflow".into())?;
    Ok(format!("W(S) = W(S') = {w}"))
}
