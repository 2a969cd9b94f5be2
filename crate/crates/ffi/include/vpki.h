#ifndef VPKI_H
#define VPKI_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every fallible call. Values 1 to 21 mirror the library's
 * error codes.
 */
typedef enum VpkiStatus {
  VPKI_STATUS_OK = 0,
  VPKI_STATUS_INVALID_ARGUMENT = 1,
  VPKI_STATUS_DECODE = 2,
  VPKI_STATUS_CRYPTO = 3,
  VPKI_STATUS_CONFLICT = 4,
  VPKI_STATUS_AUTHENTICATION = 5,
  VPKI_STATUS_AUTHORIZATION = 6,
  VPKI_STATUS_SYBIL_REJECTION = 7,
  VPKI_STATUS_FRESHNESS = 8,
  VPKI_STATUS_NOT_FOUND = 9,
  VPKI_STATUS_WRONG_TARGET = 10,
  VPKI_STATUS_REPLAY = 11,
  VPKI_STATUS_POLICY = 12,
  VPKI_STATUS_POSSESSION = 13,
  VPKI_STATUS_ARITY = 14,
  VPKI_STATUS_TAMPER_EVIDENCE = 15,
  VPKI_STATUS_RESPONSE_INTEGRITY = 16,
  VPKI_STATUS_PUZZLE_REQUIRED = 17,
  VPKI_STATUS_BATCH_TOO_LARGE = 18,
  VPKI_STATUS_TRANSPORT = 19,
  VPKI_STATUS_IO = 20,
  VPKI_STATUS_FATAL = 21,
  VPKI_STATUS_NULL_POINTER = 100,
  VPKI_STATUS_PANIC = 101,
} VpkiStatus;

/**
 * Policy selector for [`vpki_plan_new`] and [`vpki_sandbox_new`].
 */
typedef enum VpkiPolicy {
  VPKI_POLICY_P1 = 1,
  VPKI_POLICY_P2 = 2,
  VPKI_POLICY_P3 = 3,
} VpkiPolicy;

/**
 * Opaque request plan.
 */
typedef struct VpkiPlan VpkiPlan;

/**
 * Opaque in-process single-domain deployment driven by a manual clock.
 */
typedef struct VpkiSandbox VpkiSandbox;

/**
 * One planned request: send at `request_time` for `[start, end)`.
 */
typedef struct VpkiPlanEntry {
  uint64_t request_time;
  uint64_t start;
  uint64_t end;
  size_t expected_slots;
} VpkiPlanEntry;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failure on this thread, or null. Valid until the next
 * failing call on the same thread; do not free.
 */
const char *vpki_last_error(void);

/**
 * Library version as a static string.
 */
const char *vpki_version(void);

/**
 * Frees a string returned by this library. Null is ignored.
 *
 * # Safety
 * `s` must come from this library and not have been freed.
 */
void vpki_string_free(char *s);

/**
 * Ticket identifiable key `H(LTC || t_s || t_e || Rnd)` into `out[32]`.
 * `rnd` is 16 bytes.
 *
 * # Safety
 * Pointers must be valid for the given lengths.
 */
enum VpkiStatus vpki_compute_ticket_ik(const uint8_t *ltc,
                                       size_t ltc_len,
                                       uint64_t t_s,
                                       uint64_t t_e,
                                       const uint8_t *rnd,
                                       uint8_t *out);

/**
 * Pseudonym identifiable key `H(IK_tkt || K || t_s || t_e || Rnd)` into
 * `out[32]`. `ik_tkt` is 32 bytes, `rnd` 16.
 *
 * # Safety
 * Pointers must be valid for the given lengths.
 */
enum VpkiStatus vpki_compute_pseudonym_ik(const uint8_t *ik_tkt,
                                          const uint8_t *pubkey,
                                          size_t pubkey_len,
                                          uint64_t t_s,
                                          uint64_t t_e,
                                          const uint8_t *rnd,
                                          uint8_t *out);

/**
 * Plans the requests of a trip `[departure, departure + duration)`.
 *
 * # Safety
 * `out` must be valid for writes.
 */
enum VpkiStatus vpki_plan_new(enum VpkiPolicy kind,
                              uint64_t gamma,
                              uint64_t tau,
                              uint64_t departure,
                              uint64_t duration,
                              struct VpkiPlan **out);

/**
 * Number of entries, 0 for null.
 *
 * # Safety
 * `plan` must be null or a live plan.
 */
size_t vpki_plan_len(const struct VpkiPlan *plan);

/**
 * Copies entry `index` into `out`.
 *
 * # Safety
 * `plan` must be a live plan, `out` valid for writes.
 */
enum VpkiStatus vpki_plan_entry(const struct VpkiPlan *plan,
                                size_t index,
                                struct VpkiPlanEntry *out);

/**
 * # Safety
 * `plan` must be null or a live plan, not used afterwards.
 */
void vpki_plan_free(struct VpkiPlan *plan);

/**
 * Creates a single-domain deployment whose clock starts at `t0`.
 *
 * # Safety
 * `out` must be valid for writes.
 */
enum VpkiStatus vpki_sandbox_new(enum VpkiPolicy kind,
                                 uint64_t gamma,
                                 uint64_t tau,
                                 uint64_t t0,
                                 struct VpkiSandbox **out);

/**
 * # Safety
 * `sb` must be a live sandbox.
 */
enum VpkiStatus vpki_sandbox_set_time(struct VpkiSandbox *sb, uint64_t t);

/**
 * Runs every request of a trip for `subject`, registering it on first use.
 * The sandbox clock follows each request time. Writes the number of
 * pseudonyms obtained.
 *
 * # Safety
 * `sb` must be a live sandbox, `subject` a NUL-terminated string and
 * `out_count` valid for writes.
 */
enum VpkiStatus vpki_sandbox_trip(struct VpkiSandbox *sb,
                                  const char *subject,
                                  uint64_t departure,
                                  uint64_t duration,
                                  size_t *out_count);

/**
 * Resolves the most recent pseudonym of `subject` through the resolution
 * authority and writes the recovered subject id (free with
 * [`vpki_string_free`]).
 *
 * # Safety
 * `sb` must be a live sandbox, `subject` a NUL-terminated string and `out`
 * valid for writes.
 */
enum VpkiStatus vpki_sandbox_resolve_last(struct VpkiSandbox *sb,
                                          const char *subject,
                                          bool revoke,
                                          char **out);

/**
 * # Safety
 * `sb` must be null or a live sandbox, not used afterwards.
 */
void vpki_sandbox_free(struct VpkiSandbox *sb);

/**
 * Timing-only linkage over a JSON transcript; writes the JSON report (free
 * with [`vpki_string_free`]).
 *
 * # Safety
 * `transcript_json` must be a NUL-terminated string, `out` valid for writes.
 */
enum VpkiStatus vpki_timing_link_json(const char *transcript_json, uint64_t tolerance, char **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* VPKI_H */
