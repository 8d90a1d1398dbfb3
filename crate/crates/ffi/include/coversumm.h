#ifndef COVERSUMM_H
#define COVERSUMM_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum CsStatus {
  CS_STATUS_OK = 0,
  CS_STATUS_NULL_POINTER = 1,
  CS_STATUS_INVALID_ARGUMENT = 2,
  CS_STATUS_DIMENSION_MISMATCH = 3,
  CS_STATUS_DUPLICATE_ID = 4,
  CS_STATUS_NOT_FOUND = 5,
  CS_STATUS_BUFFER_TOO_SMALL = 6,
  CS_STATUS_INTERNAL = 7,
  CS_STATUS_PANIC = 8,
} CsStatus;

typedef enum CsVariant {
  CS_VARIANT_RESERVOIR = 0,
  CS_VARIANT_KNN_PLUS_RANGE = 1,
  CS_VARIANT_LAZY_RESERVOIR = 2,
} CsVariant;

/**
 * Opaque engine handle.
 */
typedef struct CsEngine CsEngine;

/**
 * Engine parameters. Start from [`cs_config_default`] and adjust.
 */
typedef struct CsConfig {
  size_t k;
  double alpha;
  size_t c_max;
  double gamma;
  enum CsVariant variant;
} CsConfig;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message describing the most recent failure on this thread, or NULL. The
 * pointer stays valid until the next call into this library on the thread.
 */
const char *cs_last_error(void);

struct CsConfig cs_config_default(void);

/**
 * Creates an engine for `dim`-dimensional points. `config` may be NULL for
 * defaults. On success `*out` receives the handle.
 *
 * # Safety
 * `config` must be NULL or point to a valid `CsConfig`; `out` must be a
 * valid pointer to writable storage.
 */
enum CsStatus cs_engine_new(size_t dim, const struct CsConfig *config, struct CsEngine **out);

/**
 * Releases an engine. NULL is ignored.
 *
 * # Safety
 * `engine` must be NULL or a handle from `cs_engine_new` not yet freed.
 */
void cs_engine_free(struct CsEngine *engine);

/**
 * Feeds one point. Ids must be strictly increasing. `did_search` may be NULL;
 * otherwise it receives whether the step queried the index.
 *
 * # Safety
 * `engine` must be a live handle; `vec` must point to `len` doubles.
 */
enum CsStatus cs_engine_step(struct CsEngine *engine,
                             uint64_t id,
                             const double *vec,
                             size_t len,
                             bool *did_search);

/**
 * Deletes `n` points by id as one batch.
 *
 * # Safety
 * `engine` must be a live handle; `ids` must point to `n` ids.
 */
enum CsStatus cs_engine_delete(struct CsEngine *engine, const uint64_t *ids, size_t n);

/**
 * Copies the current summary, nearest first. `*written` always receives the
 * summary length; if `capacity` is smaller nothing is copied and
 * `BUFFER_TOO_SMALL` is returned. `distances` may be NULL.
 *
 * # Safety
 * `engine` must be a live handle; `ids` (and `distances` when non-NULL) must
 * have room for `capacity` elements; `written` must be writable.
 */
enum CsStatus cs_engine_summary(const struct CsEngine *engine,
                                uint64_t *ids,
                                double *distances,
                                size_t capacity,
                                size_t *written);

/**
 * Number of index queries issued so far, or 0 for NULL.
 *
 * # Safety
 * `engine` must be NULL or a live handle.
 */
uint64_t cs_engine_reservoir_searches(const struct CsEngine *engine);

/**
 * Number of live points, or 0 for NULL.
 *
 * # Safety
 * `engine` must be NULL or a live handle.
 */
size_t cs_engine_len(const struct CsEngine *engine);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* COVERSUMM_H */
