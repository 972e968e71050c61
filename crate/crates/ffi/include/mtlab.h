#ifndef MTLAB_H
#define MTLAB_H

#include <stdint.h>
#include <stddef.h>

/**
 * Transaction kind for [`mtlab_campaign_call`].
 */
typedef enum MtlabCall {
  MTLAB_CALL_ORGANIZER_DONATE = 0,
  MTLAB_CALL_DONATE = 1,
  MTLAB_CALL_END_CAMPAIGN = 2,
  MTLAB_CALL_WITHDRAW = 3,
  MTLAB_CALL_REFUND_UNREACHED = 4,
  MTLAB_CALL_CLOSE_CONTRACT = 5,
} MtlabCall;

/**
 * Status code returned by every fallible call.
 */
typedef enum MtlabStatus {
  MTLAB_STATUS_OK = 0,
  MTLAB_STATUS_NULL_POINTER = 1,
  MTLAB_STATUS_INVALID_ARGUMENT = 2,
  MTLAB_STATUS_CONFIG_ERROR = 3,
  MTLAB_STATUS_UNKNOWN_MR = 4,
  MTLAB_STATUS_UNKNOWN_MUTANT = 5,
  MTLAB_STATUS_BASELINE_FAILURE = 6,
  MTLAB_STATUS_REVERTED = 7,
  MTLAB_STATUS_PANIC = 8,
} MtlabStatus;

/**
 * Relation verdict, mirroring the three-valued result.
 */
typedef enum MtlabVerdict {
  MTLAB_VERDICT_PASS = 0,
  MTLAB_VERDICT_VIOLATED = 1,
  MTLAB_VERDICT_SETUP_ERROR = 2,
} MtlabVerdict;

/**
 * A live campaign instance.
 */
typedef struct MtlabCampaign MtlabCampaign;

/**
 * Test environment: campaign parameters plus seed.
 */
typedef struct MtlabEnv MtlabEnv;

/**
 * Kill matrix produced by [`mtlab_matrix_run`].
 */
typedef struct MtlabMatrix MtlabMatrix;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or null. The pointer
 * stays valid until the next call on the same thread.
 */
const char *mtlab_last_error_message(void);

/**
 * Frees a string returned by this library. Null is ignored.
 *
 * # Safety
 * `s` must come from this library and not have been freed.
 */
void mtlab_string_free(char *s);

size_t mtlab_site_count(void);

size_t mtlab_mutant_count(void);

uint32_t mtlab_mr_count(void);

/**
 * Environment with the default campaign parameters.
 *
 * # Safety
 * `out_env` must be a valid pointer.
 */
enum MtlabStatus mtlab_env_new(uint64_t seed, struct MtlabEnv **out_env);

/**
 * Environment from a JSON parameter object.
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out_env` a valid pointer.
 */
enum MtlabStatus mtlab_env_from_json(const char *json, uint64_t seed, struct MtlabEnv **out_env);

/**
 * # Safety
 * `env` must come from this library and not have been freed.
 */
void mtlab_env_free(struct MtlabEnv *env);

/**
 * Runs one relation, optionally under a mutant (`mutant_id < 0` runs the
 * unmutated contract).
 *
 * # Safety
 * `env` must be a live handle and `out_verdict` a valid pointer.
 */
enum MtlabStatus mtlab_run_mr(const struct MtlabEnv *env,
                              uint32_t mr,
                              int64_t mutant_id,
                              enum MtlabVerdict *out_verdict);

/**
 * Full kill matrix over all relations and all mutants for `env`.
 *
 * # Safety
 * `env` must be a live handle and `out_matrix` a valid pointer.
 */
enum MtlabStatus mtlab_matrix_run(const struct MtlabEnv *env, struct MtlabMatrix **out_matrix);

/**
 * Kill rate of one relation. Writes a negative value when the rate is
 * undefined (no killed or alive cells).
 *
 * # Safety
 * `matrix` must be a live handle and `out_rate` a valid pointer.
 */
enum MtlabStatus mtlab_matrix_kill_rate(const struct MtlabMatrix *matrix,
                                        uint32_t mr,
                                        double *out_rate);

/**
 * # Safety
 * `matrix` must be a live handle and `out_rate` a valid pointer.
 */
enum MtlabStatus mtlab_matrix_overall(const struct MtlabMatrix *matrix, double *out_rate);

/**
 * Serialized matrix; free with [`mtlab_string_free`].
 *
 * # Safety
 * `matrix` must be a live handle and `out_json` a valid pointer.
 */
enum MtlabStatus mtlab_matrix_to_json(const struct MtlabMatrix *matrix, char **out_json);

/**
 * # Safety
 * `matrix` must come from this library and not have been freed.
 */
void mtlab_matrix_free(struct MtlabMatrix *matrix);

uint32_t mtlab_organizer_address(uint32_t index);

uint32_t mtlab_beneficiary_address(uint32_t index);

uint32_t mtlab_donor_address(uint32_t index);

/**
 * Name of a revert code written by the campaign calls ("ACCEPTED" for 0,
 * null for codes out of range). The string is static.
 */
const char *mtlab_revert_name(uint32_t code);

/**
 * Deploys a campaign from the environment's parameters at time `now`. A
 * rejected deployment returns `Reverted` and writes the reason to
 * `out_revert`.
 *
 * # Safety
 * `env` must be a live handle; the out pointers must be valid.
 */
enum MtlabStatus mtlab_campaign_deploy(const struct MtlabEnv *env,
                                       uint64_t now,
                                       struct MtlabCampaign **out_campaign,
                                       uint32_t *out_revert);

/**
 * # Safety
 * `campaign` must come from this library and not have been freed.
 */
void mtlab_campaign_free(struct MtlabCampaign *campaign);

/**
 * Submits one transaction. `amount` is used by the donation calls and
 * ignored otherwise. Writes 0 to `out_revert` when the transaction is
 * accepted, otherwise a revert code (see [`mtlab_revert_name`]); a revert
 * is not a call failure.
 *
 * # Safety
 * `campaign` must be a live handle and `out_revert` a valid pointer.
 */
enum MtlabStatus mtlab_campaign_call(struct MtlabCampaign *campaign,
                                     enum MtlabCall call,
                                     uint32_t sender,
                                     uint64_t now,
                                     uint64_t amount,
                                     uint32_t *out_revert);

/**
 * Donation with an explicit amount per beneficiary; `beneficiaries` and
 * `amounts` both hold `len` entries.
 *
 * # Safety
 * `campaign` must be a live handle, the arrays must hold `len` elements
 * and `out_revert` must be valid.
 */
enum MtlabStatus mtlab_campaign_donate_split(struct MtlabCampaign *campaign,
                                             uint32_t sender,
                                             uint64_t now,
                                             const uint32_t *beneficiaries,
                                             const uint64_t *amounts,
                                             size_t len,
                                             uint32_t *out_revert);

/**
 * # Safety
 * `campaign` must be a live handle and `out_revert` a valid pointer.
 */
enum MtlabStatus mtlab_campaign_add_milestone(struct MtlabCampaign *campaign,
                                              uint32_t sender,
                                              uint64_t now,
                                              uint64_t target,
                                              uint64_t reward,
                                              uint32_t *out_revert);

/**
 * Phase index: 0 STARTED, 1 DONATION, 2 ENDED, 3 CLOSED.
 *
 * # Safety
 * `campaign` must be a live handle and `out_phase` a valid pointer.
 */
enum MtlabStatus mtlab_campaign_phase(const struct MtlabCampaign *campaign, uint32_t *out_phase);

/**
 * # Safety
 * `campaign` must be a live handle and the out pointers valid.
 */
enum MtlabStatus mtlab_campaign_totals(const struct MtlabCampaign *campaign,
                                       uint64_t *out_total_raised,
                                       uint64_t *out_balance);

/**
 * Writes 1 when every ledger audit holds, 0 otherwise.
 *
 * # Safety
 * `campaign` must be a live handle and `out_ok` a valid pointer.
 */
enum MtlabStatus mtlab_campaign_is_conserved(const struct MtlabCampaign *campaign, int32_t *out_ok);

/**
 * Observation snapshot as JSON; free with [`mtlab_string_free`].
 *
 * # Safety
 * `campaign` must be a live handle and `out_json` a valid pointer.
 */
enum MtlabStatus mtlab_campaign_snapshot_json(const struct MtlabCampaign *campaign,
                                              char **out_json);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MTLAB_H */
