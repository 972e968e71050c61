//! Site census of the contract model. Site ids follow declaration order.

use crate::mutation::{
    CmpOp, CmpSite, GuardOp, GuardSite, MathOp, MathSite, Operator, SiteId, SiteSpec, StepOp,
    StepSite,
};

macro_rules! sites {
    ($( $name:ident = $handle:ident($op:expr), $label:literal $(, equivalent [$($eq:ident),*])? ; )*) => {
        #[allow(non_camel_case_types, clippy::upper_case_acronyms, dead_code)]
        #[repr(u16)]
        enum Index { $($name),* }

        $(
            pub const $name: $handle = $handle { id: SiteId(Index::$name as u16), original: $op };
        )*

        pub(crate) static TABLE: &[SiteSpec] = &[
            $( SiteSpec {
                label: $label,
                op: $name.site_op(),
                equivalent: &[$($(Operator::$eq),*)?],
            } ),*
        ];
    };
}

sites! {
    // deploy
    DEPLOY_ORGANIZERS_NON_EMPTY = CmpSite(CmpOp::Gt), "deploy::organizers_non_empty";
    DEPLOY_BENEFICIARIES_NON_EMPTY = CmpSite(CmpOp::Gt), "deploy::beneficiaries_non_empty";
    DEPLOY_ORGANIZER_LIMIT = GuardSite(GuardOp::Enforced), "deploy::organizer_limit";
    DEPLOY_ORGANIZERS_WITHIN_LIMIT = CmpSite(CmpOp::Le), "deploy::organizers_within_limit";
    DEPLOY_BENEFICIARY_LIMIT = GuardSite(GuardOp::Enforced), "deploy::beneficiary_limit";
    DEPLOY_BENEFICIARIES_WITHIN_LIMIT = CmpSite(CmpOp::Le), "deploy::beneficiaries_within_limit";
    DEPLOY_UNIQUE_PARTICIPANTS = GuardSite(GuardOp::Enforced), "deploy::unique_participants";
    DEPLOY_ADDRESS_EQ = CmpSite(CmpOp::Eq), "deploy::address_eq";
    DEPLOY_DURATION_POSITIVE = CmpSite(CmpOp::Gt), "deploy::duration_positive";
    DEPLOY_MIN_DONATION_POSITIVE = CmpSite(CmpOp::Gt), "deploy::min_donation_positive";
    DEPLOY_DEADLINE = MathSite(MathOp::Add), "deploy::deadline";
    DEPLOY_DEADLINE_IN_RANGE = CmpSite(CmpOp::Le), "deploy::deadline_in_range";

    // organizer_donate
    ORG_IN_STARTED = GuardSite(GuardOp::Enforced), "organizer_donate::in_started";
    ORG_ONLY_ORGANIZER = GuardSite(GuardOp::Enforced), "organizer_donate::only_organizer";
    ORG_NOT_ALREADY_DONATED = GuardSite(GuardOp::Enforced), "organizer_donate::not_already_donated";
    ORG_AMOUNT_AT_LEAST_MIN = CmpSite(CmpOp::Ge), "organizer_donate::amount_at_least_min";
    ORG_BALANCE_CREDIT = MathSite(MathOp::Add), "organizer_donate::balance_credit";
    ORG_TOTAL_RAISED_CREDIT = MathSite(MathOp::Add), "organizer_donate::total_raised_credit";
    // the not_already_donated modifier guarantees the entry is zero here
    ORG_RECORD_CONTRIBUTION = StepSite(StepOp::AddAssign), "organizer_donate::record_contribution",
        equivalent [IncrementsMirror];
    ORG_DONATED_COUNT = StepSite(StepOp::AddAssign), "organizer_donate::donated_count";
    ORG_ALL_DONATED = CmpSite(CmpOp::Ge), "organizer_donate::all_organizers_donated";

    // uniform split across beneficiaries
    SPLIT_SHARE = MathSite(MathOp::Div), "split::share";
    SPLIT_REMAINDER = MathSite(MathOp::Rem), "split::remainder";
    SPLIT_ALLOCATION_CREDIT = MathSite(MathOp::Add), "split::allocation_credit";
    SPLIT_REMAINDER_CREDIT = MathSite(MathOp::Add), "split::remainder_credit";

    // donate_uniform
    DONATE_IN_DONATION = GuardSite(GuardOp::Enforced), "donate::in_donation";
    DONATE_AFTER_START = CmpSite(CmpOp::Ge), "donate::after_start";
    DONATE_DEADLINE = MathSite(MathOp::Add), "donate::deadline";
    DONATE_BEFORE_DEADLINE = CmpSite(CmpOp::Lt), "donate::before_deadline";
    DONATE_AMOUNT_AT_LEAST_MIN = CmpSite(CmpOp::Ge), "donate::amount_at_least_min";
    DONATE_BALANCE_CREDIT = MathSite(MathOp::Add), "donate::balance_credit";
    DONATE_TOTAL_RAISED_CREDIT = MathSite(MathOp::Add), "donate::total_raised_credit";

    // donate_split
    SPLIT_DONATE_KNOWN_BENEFICIARIES = GuardSite(GuardOp::Enforced), "donate_split::known_beneficiaries";
    SPLIT_DONATE_IN_DONATION = GuardSite(GuardOp::Enforced), "donate_split::in_donation";
    SPLIT_DONATE_AFTER_START = CmpSite(CmpOp::Ge), "donate_split::after_start";
    SPLIT_DONATE_DEADLINE = MathSite(MathOp::Add), "donate_split::deadline";
    SPLIT_DONATE_BEFORE_DEADLINE = CmpSite(CmpOp::Lt), "donate_split::before_deadline";
    SPLIT_DONATE_SUM_SHARES = MathSite(MathOp::Add), "donate_split::sum_shares";
    SPLIT_DONATE_SUM_AT_LEAST_MIN = CmpSite(CmpOp::Ge), "donate_split::sum_at_least_min";
    SPLIT_DONATE_ALLOCATION_CREDIT = MathSite(MathOp::Add), "donate_split::allocation_credit";
    SPLIT_DONATE_BALANCE_CREDIT = MathSite(MathOp::Add), "donate_split::balance_credit";
    SPLIT_DONATE_TOTAL_RAISED_CREDIT = MathSite(MathOp::Add), "donate_split::total_raised_credit";

    // add_milestone
    MILESTONE_ONLY_ORGANIZER = GuardSite(GuardOp::Enforced), "add_milestone::only_organizer";
    MILESTONE_IN_STARTED = GuardSite(GuardOp::Enforced), "add_milestone::in_started";
    MILESTONE_REWARD_POSITIVE = CmpSite(CmpOp::Gt), "add_milestone::reward_positive";
    MILESTONE_REWARD_WITHIN_CAP = CmpSite(CmpOp::Le), "add_milestone::reward_within_cap";
    MILESTONE_TARGET_POSITIVE = CmpSite(CmpOp::Gt), "add_milestone::target_positive";
    MILESTONE_BALANCE_ESCROW = MathSite(MathOp::Add), "add_milestone::balance_escrow";
    MILESTONE_INSERT_POSITION = CmpSite(CmpOp::Gt), "add_milestone::insert_position";

    // evaluate_milestones
    EVAL_IS_PENDING = CmpSite(CmpOp::Eq), "milestones::is_pending";
    EVAL_TARGET_REACHED = CmpSite(CmpOp::Ge), "milestones::target_reached";
    EVAL_REWARD_PAYOUT = MathSite(MathOp::Sub), "milestones::reward_payout";
    EVAL_ACHIEVED_COUNT = StepSite(StepOp::AddAssign), "milestones::achieved_count";

    // end_campaign
    END_IN_DONATION = GuardSite(GuardOp::Enforced), "end_campaign::in_donation";
    END_DEADLINE = MathSite(MathOp::Add), "end_campaign::deadline";
    END_DEADLINE_PASSED = CmpSite(CmpOp::Ge), "end_campaign::deadline_passed";
    END_HAS_MILESTONES = CmpSite(CmpOp::Gt), "end_campaign::has_milestones";
    END_ALL_ACHIEVED = CmpSite(CmpOp::Ge), "end_campaign::all_milestones_achieved";

    // withdraw
    WITHDRAW_IN_ENDED = GuardSite(GuardOp::Enforced), "withdraw::in_ended";
    WITHDRAW_ONLY_BENEFICIARY = GuardSite(GuardOp::Enforced), "withdraw::only_beneficiary";
    WITHDRAW_ALLOCATION_DEBIT = MathSite(MathOp::Sub), "withdraw::allocation_debit";
    WITHDRAW_WITHDRAWN_CREDIT = StepSite(StepOp::AddAssign), "withdraw::withdrawn_credit";
    WITHDRAW_BALANCE_DEBIT = MathSite(MathOp::Sub), "withdraw::balance_debit";
    WITHDRAW_WITHDRAWN_COUNT = StepSite(StepOp::AddAssign), "withdraw::withdrawn_count";

    // refund_unreached
    REFUND_IN_ENDED = GuardSite(GuardOp::Enforced), "refund::in_ended";
    REFUND_ONLY_ORGANIZER = GuardSite(GuardOp::Enforced), "refund::only_organizer";
    REFUND_IS_PENDING = CmpSite(CmpOp::Eq), "refund::is_pending";
    REFUND_BALANCE_DEBIT = MathSite(MathOp::Sub), "refund::balance_debit";

    // close_contract
    CLOSE_IN_ENDED = GuardSite(GuardOp::Enforced), "close::in_ended";
    CLOSE_ONLY_ORGANIZER = GuardSite(GuardOp::Enforced), "close::only_organizer";
    CLOSE_ALL_WITHDREW = CmpSite(CmpOp::Ge), "close::all_beneficiaries_withdrew";
    CLOSE_MILESTONES_RESOLVED = GuardSite(GuardOp::Enforced), "close::milestones_resolved";
    CLOSE_RESIDUAL_SHARE = MathSite(MathOp::Div), "close::residual_share";
    CLOSE_RESIDUAL_REMAINDER = MathSite(MathOp::Rem), "close::residual_remainder";
    CLOSE_FIRST_SHARE = MathSite(MathOp::Add), "close::first_organizer_share";
    CLOSE_BALANCE_DEBIT = MathSite(MathOp::Sub), "close::balance_debit";
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    #[test]
    fn labels_are_unique() {
        let labels: BTreeSet<_> = TABLE.iter().map(|s| s.label).collect();
        assert_eq!(labels.len(), TABLE.len());
    }

    #[test]
    fn handles_match_table() {
        assert_eq!(
            TABLE[DEPLOY_ORGANIZERS_NON_EMPTY.id.0 as usize].label,
            "deploy::organizers_non_empty"
        );
        assert_eq!(
            TABLE[CLOSE_BALANCE_DEBIT.id.0 as usize].label,
            "close::balance_debit"
        );
        assert_eq!(CLOSE_BALANCE_DEBIT.id.0 as usize, TABLE.len() - 1);
    }

    #[test]
    fn census_has_at_least_a_hundred_mutants() {
        assert!(crate::mutation::contract_mutants().len() >= 100);
    }
}
