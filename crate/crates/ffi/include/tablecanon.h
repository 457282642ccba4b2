/* SPDX-License-Identifier: Apache-2.0 */

#ifndef TABLECANON_H
#define TABLECANON_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every fallible call.
 */
typedef enum TcStatus {
  TC_STATUS_OK = 0,
  TC_STATUS_NULL_POINTER = 1,
  TC_STATUS_INVALID_UTF8 = 2,
  /**
   * Input text could not be parsed as a table, plan or JSON value.
   */
  TC_STATUS_PARSE = 3,
  /**
   * The plan has blocking findings.
   */
  TC_STATUS_VALIDATION = 4,
  /**
   * A step failed while executing.
   */
  TC_STATUS_EXECUTION = 5,
  /**
   * Execution succeeded but some raw value is not recoverable.
   */
  TC_STATUS_NOT_LOSSLESS = 6,
  TC_STATUS_PANIC = 99,
} TcStatus;

/**
 * A canonical table with its step traces and loss audit.
 */
typedef struct TcExecution TcExecution;

/**
 * A parsed transformation plan.
 */
typedef struct TcPlan TcPlan;

/**
 * A parsed table.
 */
typedef struct TcTable TcTable;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *tc_version(void);

/**
 * Message for the last failed call on this thread, or null. The pointer
 * stays valid until the next call into this library on the same thread.
 */
const char *tc_last_error(void);

/**
 * Frees a string returned by this library. Null is ignored.
 *
 * # Safety
 * `s` must be null or a string obtained from this library, freed once.
 */
void tc_string_free(char *s);

/**
 * Parses CSV bytes. Every cell is read as text.
 *
 * # Safety
 * `table_id` must be a valid C string, `data` must point to `len` readable
 * bytes (it may be null only when `len` is 0), and `out` must be writable.
 */
enum TcStatus tc_table_from_csv(const char *table_id,
                                const uint8_t *data,
                                size_t len,
                                struct TcTable **out);

/**
 * Parses a pipe-delimited markdown table.
 *
 * # Safety
 * Both strings must be valid C strings and `out` writable.
 */
enum TcStatus tc_table_from_markdown(const char *table_id,
                                     const char *markdown,
                                     struct TcTable **out);

/**
 * Number of data rows; 0 for a null handle.
 *
 * # Safety
 * `table` must be null or a live handle.
 */
size_t tc_table_num_rows(const struct TcTable *table);

/**
 * Number of columns; 0 for a null handle.
 *
 * # Safety
 * `table` must be null or a live handle.
 */
size_t tc_table_num_columns(const struct TcTable *table);

/**
 * Serializes the table as CSV.
 *
 * # Safety
 * `table` must be a live handle and `out` writable.
 */
enum TcStatus tc_table_to_csv(const struct TcTable *table, char **out);

/**
 * # Safety
 * `table` must be null or a handle from this library, freed once.
 */
void tc_table_free(struct TcTable *table);

/**
 * Parses a plan document.
 *
 * # Safety
 * `json` must be a valid C string and `out` writable.
 */
enum TcStatus tc_plan_parse(const char *json, struct TcPlan **out);

/**
 * # Safety
 * `plan` must be null or a handle from this library, freed once.
 */
void tc_plan_free(struct TcPlan *plan);

/**
 * Checks a plan against a raw table. The policy report (JSON) is written
 * to `report_json` in every case where it could be computed; the status
 * is `TC_STATUS_VALIDATION` when it holds blocking findings.
 *
 * # Safety
 * Handles must be live and `report_json` writable.
 */
enum TcStatus tc_plan_validate(const struct TcPlan *plan,
                               const struct TcTable *raw,
                               bool allow_row_change,
                               char **report_json);

/**
 * Executes `plan` over `raw`, adding raw snapshots where the audit finds
 * loss. The handle is produced even when the result is not lossless, in
 * which case the status is `TC_STATUS_NOT_LOSSLESS`.
 *
 * # Safety
 * Handles must be live and `out` writable.
 */
enum TcStatus tc_execute(const struct TcPlan *plan,
                         const struct TcTable *raw,
                         bool allow_row_change,
                         struct TcExecution **out);

/**
 * # Safety
 * `exec` must be null or a live handle.
 */
bool tc_execution_is_lossless(const struct TcExecution *exec);

/**
 * # Safety
 * `exec` must be a live handle and `out` writable.
 */
enum TcStatus tc_execution_canonical_csv(const struct TcExecution *exec, char **out);

/**
 * # Safety
 * `exec` must be a live handle and `out` writable.
 */
enum TcStatus tc_execution_trace_json(const struct TcExecution *exec, char **out);

/**
 * # Safety
 * `exec` must be a live handle and `out` writable.
 */
enum TcStatus tc_execution_audit_json(const struct TcExecution *exec, char **out);

/**
 * Rebuilds the raw table from the canonical one.
 *
 * # Safety
 * `exec` must be a live handle and `out` writable.
 */
enum TcStatus tc_execution_recover_raw(const struct TcExecution *exec, struct TcTable **out);

/**
 * # Safety
 * `exec` must be null or a handle from this library, freed once.
 */
void tc_execution_free(struct TcExecution *exec);

/**
 * Normalizes an answer string for scoring.
 *
 * # Safety
 * `answer` must be a valid C string and `out` writable.
 */
enum TcStatus tc_format_answer(const char *answer, char **out);

/**
 * Token F1 between two answers given as JSON values (a string, number or
 * list).
 *
 * # Safety
 * Both strings must be valid C strings and `f1` writable.
 */
enum TcStatus tc_answer_f1(const char *predicted_json, const char *gold_json, double *f1);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TABLECANON_H */
