#ifndef PREDSEARCH_H
#define PREDSEARCH_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every fallible call.
 */
typedef enum PredStatus {
  PRED_STATUS_OK = 0,
  PRED_STATUS_NULL_POINTER = 1,
  PRED_STATUS_PARAM = 2,
  PRED_STATUS_INGEST = 3,
  PRED_STATUS_BUDGET = 4,
  PRED_STATUS_BUILD = 5,
  PRED_STATUS_INVARIANT = 6,
  PRED_STATUS_INTEGRITY = 7,
  PRED_STATUS_IO = 8,
  PRED_STATUS_PANIC = 9,
} PredStatus;

/**
 * Opaque built structure.
 */
typedef struct PredHandle PredHandle;

/**
 * Build parameters. `branch` 0 picks the trade-off optimum.
 */
typedef struct PredConfig {
  uint32_t key_bits;
  uint32_t word_bits;
  uint64_t space;
  uint8_t branch;
  bool amplify;
  uint64_t seed;
} PredConfig;

/**
 * Answer to one query. `key` is meaningful only when `found`.
 */
typedef struct PredAnswer {
  bool found;
  uint64_t key;
  uint32_t probes;
  uint32_t depth;
} PredAnswer;

/**
 * Branch values of the trade-off formula, as doubles.
 */
typedef struct PredTradeoff {
  uint32_t a;
  double values[4];
  double min;
  uint8_t argmin;
} PredTradeoff;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Configuration with the trade-off optimum, amplification on, and seed 0.
 */
struct PredConfig pred_config_default(uint32_t key_bits, uint32_t word_bits, uint64_t space);

/**
 * Builds a structure over `n` strictly ascending keys.
 *
 * # Safety
 * `keys` must point to `n` readable `uint64_t` values (or be null when `n`
 * is 0), `cfg` to a valid `PredConfig`, and `out` to writable storage.
 */
enum PredStatus pred_build(const uint64_t *keys,
                           size_t n,
                           const struct PredConfig *cfg,
                           struct PredHandle **out);

/**
 * Predecessor of `x`.
 *
 * # Safety
 * `h` must come from `pred_build` or `pred_load` and not be freed; `out`
 * must be writable.
 */
enum PredStatus pred_query(const struct PredHandle *h, uint64_t x, struct PredAnswer *out);

/**
 * Writes the structure to `path`.
 *
 * # Safety
 * `h` must be a live handle and `path` a NUL-terminated string.
 */
enum PredStatus pred_save(const struct PredHandle *h, const char *path);

/**
 * Loads a structure written by `pred_save` or the command-line tool.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` writable.
 */
enum PredStatus pred_load(const char *path, struct PredHandle **out);

/**
 * Bits occupied by the structure, or 0 for a null handle.
 *
 * # Safety
 * `h` must be null or a live handle.
 */
uint64_t pred_bits_used(const struct PredHandle *h);

/**
 * Branch the structure was built with (1..=4), or 0 for a null handle.
 *
 * # Safety
 * `h` must be null or a live handle.
 */
uint8_t pred_branch(const struct PredHandle *h);

/**
 * Releases a handle. Null is ignored.
 *
 * # Safety
 * `h` must be null or a handle not yet freed.
 */
void pred_free(struct PredHandle *h);

/**
 * Evaluates the four trade-off branches.
 *
 * # Safety
 * `out` must be writable.
 */
enum PredStatus pred_tradeoff(uint64_t n,
                              uint64_t key_bits,
                              uint64_t word_bits,
                              uint64_t space,
                              struct PredTradeoff *out);

/**
 * Message of the last failure on this thread, or null. The pointer stays
 * valid until the next failing call on the same thread.
 */
const char *pred_last_error(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PREDSEARCH_H */
