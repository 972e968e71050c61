//! C ABI over `mtlab`.
//!
//! Objects cross the boundary as opaque handles that the caller frees with
//! the matching `*_free` function. Every fallible call returns an
//! [`MtlabStatus`]; the text of the most recent failure on the calling
//! thread is available from [`mtlab_last_error_message`]. Amounts are
//! `uint64_t` at the boundary.

use std::cell::RefCell;
use std::collections::BTreeMap;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use mtlab::config::{beneficiary, donor, organizer, CampaignParams, TestEnv};
use mtlab::contract::{Campaign, RevertReason, TxResult};
use mtlab::harness::{run_matrix, HarnessError, KillMatrix};
use mtlab::mutation::{contract_mutants, with_active_mutant, Mutant, SiteRegistry};
use mtlab::relations::{all_mr_ids, run_mr, MrResult, MR_COUNT};
use mtlab::report::MatrixReport;
use mtlab::types::{Address, Amount, BlockContext};

/// Status code returned by every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MtlabStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    ConfigError = 3,
    UnknownMr = 4,
    UnknownMutant = 5,
    BaselineFailure = 6,
    Reverted = 7,
    Panic = 8,
}

/// Relation verdict, mirroring the three-valued result.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MtlabVerdict {
    Pass = 0,
    Violated = 1,
    SetupError = 2,
}

/// Test environment: campaign parameters plus seed.
pub struct MtlabEnv(TestEnv);

/// Kill matrix produced by [`mtlab_matrix_run`].
pub struct MtlabMatrix(KillMatrix);

/// A live campaign instance.
pub struct MtlabCampaign(Campaign);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl ToString) {
    let text = msg.to_string().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(text).ok());
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

fn guard(f: impl FnOnce() -> Result<(), (MtlabStatus, String)>) -> MtlabStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => MtlabStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            MtlabStatus::Panic
        }
    }
}

fn null() -> (MtlabStatus, String) {
    (MtlabStatus::NullPointer, "null pointer argument".into())
}

unsafe fn as_ref<'a, T>(p: *const T) -> Result<&'a T, (MtlabStatus, String)> {
    p.as_ref().ok_or_else(null)
}

unsafe fn as_mut<'a, T>(p: *mut T) -> Result<&'a mut T, (MtlabStatus, String)> {
    p.as_mut().ok_or_else(null)
}

unsafe fn out<T>(p: *mut T, value: T) -> Result<(), (MtlabStatus, String)> {
    if p.is_null() {
        return Err(null());
    }
    p.write(value);
    Ok(())
}

fn to_c_string(s: String) -> *mut c_char {
    CString::new(s.replace('\0', " ")).map_or(ptr::null_mut(), CString::into_raw)
}

fn mutant(id: i64) -> Result<Option<Mutant>, (MtlabStatus, String)> {
    if id < 0 {
        return Ok(None);
    }
    contract_mutants()
        .into_iter()
        .nth(id as usize)
        .map(Some)
        .ok_or_else(|| {
            (
                MtlabStatus::UnknownMutant,
                format!("no mutant with id {id}"),
            )
        })
}

fn mr_id(mr: u32) -> Result<u8, (MtlabStatus, String)> {
    u8::try_from(mr)
        .ok()
        .filter(|m| (1..=MR_COUNT).contains(m))
        .ok_or_else(|| {
            (
                MtlabStatus::UnknownMr,
                format!("UNKNOWN_MR: no relation with id {mr}"),
            )
        })
}

/// Message for the last failed call on this thread, or null. The pointer
/// stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn mtlab_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Frees a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn mtlab_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

#[no_mangle]
pub extern "C" fn mtlab_site_count() -> usize {
    SiteRegistry::contract().len()
}

#[no_mangle]
pub extern "C" fn mtlab_mutant_count() -> usize {
    contract_mutants().len()
}

#[no_mangle]
pub extern "C" fn mtlab_mr_count() -> u32 {
    MR_COUNT as u32
}

/// Environment with the default campaign parameters.
///
/// # Safety
/// `out_env` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mtlab_env_new(seed: u64, out_env: *mut *mut MtlabEnv) -> MtlabStatus {
    guard(|| {
        let env = TestEnv::new(CampaignParams::default(), seed);
        out(out_env, Box::into_raw(Box::new(MtlabEnv(env))))
    })
}

/// Environment from a JSON parameter object.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out_env` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mtlab_env_from_json(
    json: *const c_char,
    seed: u64,
    out_env: *mut *mut MtlabEnv,
) -> MtlabStatus {
    guard(|| {
        if json.is_null() {
            return Err(null());
        }
        let text = CStr::from_ptr(json)
            .to_str()
            .map_err(|e| (MtlabStatus::InvalidArgument, e.to_string()))?;
        let params = CampaignParams::from_json(text)
            .map_err(|e| (MtlabStatus::ConfigError, e.to_string()))?;
        out(
            out_env,
            Box::into_raw(Box::new(MtlabEnv(TestEnv::new(params, seed)))),
        )
    })
}

/// # Safety
/// `env` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn mtlab_env_free(env: *mut MtlabEnv) {
    if !env.is_null() {
        drop(Box::from_raw(env));
    }
}

/// Runs one relation, optionally under a mutant (`mutant_id < 0` runs the
/// unmutated contract).
///
/// # Safety
/// `env` must be a live handle and `out_verdict` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mtlab_run_mr(
    env: *const MtlabEnv,
    mr: u32,
    mutant_id: i64,
    out_verdict: *mut MtlabVerdict,
) -> MtlabStatus {
    guard(|| {
        let env = &as_ref(env)?.0;
        let mr = mr_id(mr)?;
        let m = mutant(mutant_id)?;
        let verdict = with_active_mutant(m.as_ref(), || run_mr(mr, env))
            .map_err(|e| (MtlabStatus::InvalidArgument, e.to_string()))?
            .map_err(|e| (MtlabStatus::UnknownMr, e.to_string()))?;
        let v = match verdict.result {
            MrResult::Pass => MtlabVerdict::Pass,
            MrResult::Violated => MtlabVerdict::Violated,
            MrResult::SetupError => MtlabVerdict::SetupError,
        };
        if v != MtlabVerdict::Pass {
            set_error(verdict.detail);
        }
        out(out_verdict, v)
    })
}

/// Full kill matrix over all relations and all mutants for `env`.
///
/// # Safety
/// `env` must be a live handle and `out_matrix` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mtlab_matrix_run(
    env: *const MtlabEnv,
    out_matrix: *mut *mut MtlabMatrix,
) -> MtlabStatus {
    guard(|| {
        let env = &as_ref(env)?.0;
        let matrix = run_matrix(&all_mr_ids(), &contract_mutants(), env).map_err(|e| match e {
            HarnessError::BaselineFailure { .. } => (MtlabStatus::BaselineFailure, e.to_string()),
            _ => (MtlabStatus::InvalidArgument, e.to_string()),
        })?;
        out(out_matrix, Box::into_raw(Box::new(MtlabMatrix(matrix))))
    })
}

/// Kill rate of one relation. Writes a negative value when the rate is
/// undefined (no killed or alive cells).
///
/// # Safety
/// `matrix` must be a live handle and `out_rate` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mtlab_matrix_kill_rate(
    matrix: *const MtlabMatrix,
    mr: u32,
    out_rate: *mut f64,
) -> MtlabStatus {
    guard(|| {
        let m = &as_ref(matrix)?.0;
        let mr = mr_id(mr)?;
        if !m.mrs.contains(&mr) {
            return Err((
                MtlabStatus::UnknownMr,
                format!("MR{mr} is not in this matrix"),
            ));
        }
        out(out_rate, m.kill_rate(mr).unwrap_or(-1.0))
    })
}

/// # Safety
/// `matrix` must be a live handle and `out_rate` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mtlab_matrix_overall(
    matrix: *const MtlabMatrix,
    out_rate: *mut f64,
) -> MtlabStatus {
    guard(|| out(out_rate, as_ref(matrix)?.0.overall_detection()))
}

/// Serialized matrix; free with [`mtlab_string_free`].
///
/// # Safety
/// `matrix` must be a live handle and `out_json` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mtlab_matrix_to_json(
    matrix: *const MtlabMatrix,
    out_json: *mut *mut c_char,
) -> MtlabStatus {
    guard(|| {
        let m = &as_ref(matrix)?.0;
        out(
            out_json,
            to_c_string(MatrixReport::from_matrix(m).to_json()),
        )
    })
}

/// # Safety
/// `matrix` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn mtlab_matrix_free(matrix: *mut MtlabMatrix) {
    if !matrix.is_null() {
        drop(Box::from_raw(matrix));
    }
}

#[no_mangle]
pub extern "C" fn mtlab_organizer_address(index: u32) -> u32 {
    organizer(index as usize).0
}

#[no_mangle]
pub extern "C" fn mtlab_beneficiary_address(index: u32) -> u32 {
    beneficiary(index as usize).0
}

#[no_mangle]
pub extern "C" fn mtlab_donor_address(index: u32) -> u32 {
    donor(index as usize).0
}

/// Name of a revert code written by the campaign calls ("ACCEPTED" for 0,
/// null for codes out of range). The string is static.
#[no_mangle]
pub extern "C" fn mtlab_revert_name(code: u32) -> *const c_char {
    const NAMES: [&CStr; 21] = [
        c"ACCEPTED",
        c"DUPLICATE_PARTICIPANT",
        c"LIMIT_EXCEEDED",
        c"EMPTY_LIST",
        c"BAD_DURATION",
        c"BAD_MIN_DONATION",
        c"WRONG_PHASE",
        c"NOT_ORGANIZER",
        c"ALREADY_DONATED",
        c"BELOW_MIN",
        c"OUT_OF_WINDOW",
        c"UNKNOWN_BENEFICIARY",
        c"INVALID_REWARD",
        c"INVALID_TARGET",
        c"TOO_EARLY",
        c"NOT_BENEFICIARY",
        c"BENEFICIARIES_PENDING",
        c"MILESTONES_PENDING",
        c"OVERFLOW",
        c"UNDERFLOW",
        c"DIV_ZERO",
    ];
    NAMES.get(code as usize).map_or(ptr::null(), |s| s.as_ptr())
}

fn revert_code(reason: RevertReason) -> u32 {
    RevertReason::ALL
        .iter()
        .position(|&r| r == reason)
        .map_or(u32::MAX, |i| i as u32 + 1)
}

fn tx_code(tx: TxResult) -> u32 {
    tx.reason().map_or(0, revert_code)
}

/// Deploys a campaign from the environment's parameters at time `now`. A
/// rejected deployment returns `Reverted` and writes the reason to
/// `out_revert`.
///
/// # Safety
/// `env` must be a live handle; the out pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn mtlab_campaign_deploy(
    env: *const MtlabEnv,
    now: u64,
    out_campaign: *mut *mut MtlabCampaign,
    out_revert: *mut u32,
) -> MtlabStatus {
    guard(|| {
        let env = &as_ref(env)?.0;
        if out_campaign.is_null() || out_revert.is_null() {
            return Err(null());
        }
        let ctx = BlockContext {
            now,
            sender: organizer(0),
        };
        match Campaign::deploy(env.params.campaign_config(), ctx) {
            Ok(c) => {
                out(out_revert, 0)?;
                out(out_campaign, Box::into_raw(Box::new(MtlabCampaign(c))))
            }
            Err(r) => {
                out(out_revert, revert_code(r))?;
                out(out_campaign, ptr::null_mut())?;
                Err((MtlabStatus::Reverted, r.code().to_string()))
            }
        }
    })
}

/// # Safety
/// `campaign` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn mtlab_campaign_free(campaign: *mut MtlabCampaign) {
    if !campaign.is_null() {
        drop(Box::from_raw(campaign));
    }
}

/// Transaction kind for [`mtlab_campaign_call`].
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MtlabCall {
    OrganizerDonate = 0,
    Donate = 1,
    EndCampaign = 2,
    Withdraw = 3,
    RefundUnreached = 4,
    CloseContract = 5,
}

/// Submits one transaction. `amount` is used by the donation calls and
/// ignored otherwise. Writes 0 to `out_revert` when the transaction is
/// accepted, otherwise a revert code (see [`mtlab_revert_name`]); a revert
/// is not a call failure.
///
/// # Safety
/// `campaign` must be a live handle and `out_revert` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mtlab_campaign_call(
    campaign: *mut MtlabCampaign,
    call: MtlabCall,
    sender: u32,
    now: u64,
    amount: u64,
    out_revert: *mut u32,
) -> MtlabStatus {
    guard(|| {
        let c = &mut as_mut(campaign)?.0;
        let ctx = BlockContext {
            now,
            sender: Address(sender),
        };
        let amount = Amount(amount as u128);
        let obs = match call {
            MtlabCall::OrganizerDonate => c.organizer_donate(ctx, amount),
            MtlabCall::Donate => c.donate_uniform(ctx, amount),
            MtlabCall::EndCampaign => c.end_campaign(ctx),
            MtlabCall::Withdraw => c.withdraw(ctx),
            MtlabCall::RefundUnreached => c.refund_unreached(ctx),
            MtlabCall::CloseContract => c.close_contract(ctx),
        };
        out(out_revert, tx_code(obs.last_tx_result))
    })
}

/// Donation with an explicit amount per beneficiary; `beneficiaries` and
/// `amounts` both hold `len` entries.
///
/// # Safety
/// `campaign` must be a live handle, the arrays must hold `len` elements
/// and `out_revert` must be valid.
#[no_mangle]
pub unsafe extern "C" fn mtlab_campaign_donate_split(
    campaign: *mut MtlabCampaign,
    sender: u32,
    now: u64,
    beneficiaries: *const u32,
    amounts: *const u64,
    len: usize,
    out_revert: *mut u32,
) -> MtlabStatus {
    guard(|| {
        let c = &mut as_mut(campaign)?.0;
        if len > 0 && (beneficiaries.is_null() || amounts.is_null()) {
            return Err(null());
        }
        let mut shares = BTreeMap::new();
        if len > 0 {
            let bens = std::slice::from_raw_parts(beneficiaries, len);
            let amts = std::slice::from_raw_parts(amounts, len);
            for (&b, &a) in bens.iter().zip(amts) {
                if shares.insert(Address(b), Amount(a as u128)).is_some() {
                    return Err((
                        MtlabStatus::InvalidArgument,
                        format!("duplicate beneficiary {b}"),
                    ));
                }
            }
        }
        let ctx = BlockContext {
            now,
            sender: Address(sender),
        };
        let obs = c.donate_split(ctx, &shares);
        out(out_revert, tx_code(obs.last_tx_result))
    })
}

/// # Safety
/// `campaign` must be a live handle and `out_revert` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mtlab_campaign_add_milestone(
    campaign: *mut MtlabCampaign,
    sender: u32,
    now: u64,
    target: u64,
    reward: u64,
    out_revert: *mut u32,
) -> MtlabStatus {
    guard(|| {
        let c = &mut as_mut(campaign)?.0;
        let ctx = BlockContext {
            now,
            sender: Address(sender),
        };
        let obs = c.add_milestone(ctx, Amount(target as u128), Amount(reward as u128));
        out(out_revert, tx_code(obs.last_tx_result))
    })
}

/// Phase index: 0 STARTED, 1 DONATION, 2 ENDED, 3 CLOSED.
///
/// # Safety
/// `campaign` must be a live handle and `out_phase` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mtlab_campaign_phase(
    campaign: *const MtlabCampaign,
    out_phase: *mut u32,
) -> MtlabStatus {
    guard(|| {
        let c = &as_ref(campaign)?.0;
        out(out_phase, c.phase() as u32)
    })
}

fn narrow(v: Amount, what: &str) -> Result<u64, (MtlabStatus, String)> {
    u64::try_from(v.0).map_err(|_| {
        (
            MtlabStatus::InvalidArgument,
            format!("{what} exceeds 64 bits"),
        )
    })
}

/// # Safety
/// `campaign` must be a live handle and the out pointers valid.
#[no_mangle]
pub unsafe extern "C" fn mtlab_campaign_totals(
    campaign: *const MtlabCampaign,
    out_total_raised: *mut u64,
    out_balance: *mut u64,
) -> MtlabStatus {
    guard(|| {
        let s = as_ref(campaign)?.0.storage();
        out(out_total_raised, narrow(s.total_raised, "total raised")?)?;
        out(out_balance, narrow(s.balance, "balance")?)
    })
}

/// Writes 1 when every ledger audit holds, 0 otherwise.
///
/// # Safety
/// `campaign` must be a live handle and `out_ok` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mtlab_campaign_is_conserved(
    campaign: *const MtlabCampaign,
    out_ok: *mut i32,
) -> MtlabStatus {
    guard(|| out(out_ok, as_ref(campaign)?.0.is_conserved() as i32))
}

/// Observation snapshot as JSON; free with [`mtlab_string_free`].
///
/// # Safety
/// `campaign` must be a live handle and `out_json` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mtlab_campaign_snapshot_json(
    campaign: *const MtlabCampaign,
    out_json: *mut *mut c_char,
) -> MtlabStatus {
    guard(|| {
        let obs = as_ref(campaign)?.0.snapshot();
        let text = serde_json::to_string(&obs).map_err(|e| (MtlabStatus::Panic, e.to_string()))?;
        out(out_json, to_c_string(text))
    })
}
