#ifndef CPMAP_H
#define CPMAP_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum CpmapField {
  /**
   * Keep the field recorded in the input.
   */
  CPMAP_FIELD_DEFAULT = 0,
  CPMAP_FIELD_REAL = 1,
  CPMAP_FIELD_COMPLEX = 2,
} CpmapField;

typedef enum CpmapForm {
  CPMAP_FORM_MATRICIZATION = 0,
  CPMAP_FORM_CHOI = 1,
} CpmapForm;

typedef enum CpmapStatus {
  CPMAP_STATUS_OK = 0,
  CPMAP_STATUS_NULL_POINTER = 1,
  CPMAP_STATUS_INVALID_UTF8 = 2,
  CPMAP_STATUS_PARSE = 3,
  CPMAP_STATUS_NOT_STAR_LINEAR = 4,
  CPMAP_STATUS_FAILURE = 5,
  CPMAP_STATUS_PANIC = 6,
} CpmapStatus;

/**
 * Opaque map handle.
 */
typedef struct CpmapMap CpmapMap;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread; empty after a success.
 * The pointer stays valid until the next call on the same thread.
 */
const char *cpmap_last_error(void);

/**
 * Releases a string returned by this library. Null is ignored.
 *
 * # Safety
 * `s` must come from this library and not be freed twice.
 */
void cpmap_string_free(char *s);

/**
 * Parses a map file (JSON with `n`, `q` and one of `matricization`/`choi`).
 *
 * # Safety
 * `text` must be a NUL-terminated string and `out` a valid pointer.
 */
enum CpmapStatus cpmap_map_from_json(const char *text,
                                     enum CpmapField field,
                                     struct CpmapMap **out);

/**
 * Builds a named example map; `params` is `name=value,...` or null.
 *
 * # Safety
 * `name` must be NUL-terminated, `params` NUL-terminated or null, `out` valid.
 */
enum CpmapStatus cpmap_map_from_zoo(const char *name,
                                    const char *params,
                                    enum CpmapField field,
                                    uint64_t seed,
                                    struct CpmapMap **out);

/**
 * Releases a map handle. Null is ignored.
 *
 * # Safety
 * `map` must come from this library and not be freed twice.
 */
void cpmap_map_free(struct CpmapMap *map);

/**
 * # Safety
 * `map` must be a live handle; `n` and `q` valid pointers.
 */
enum CpmapStatus cpmap_map_dims(const struct CpmapMap *map, size_t *n, size_t *q);

/**
 * # Safety
 * `map` must be a live handle and `out` a valid pointer.
 */
enum CpmapStatus cpmap_map_is_star_linear(const struct CpmapMap *map, double tol, bool *out);

/**
 * Complete positivity from the Choi spectrum; `min_eigenvalue` may be null.
 *
 * # Safety
 * `map` must be a live handle and `out` a valid pointer.
 */
enum CpmapStatus cpmap_map_is_completely_positive(const struct CpmapMap *map,
                                                  double tol,
                                                  bool *out,
                                                  double *min_eigenvalue);

/**
 * Full analysis report as JSON. A map that is not star-linear returns
 * `NotStarLinear` and still writes the partial report.
 *
 * # Safety
 * `map` must be a live handle and `out` a valid pointer.
 */
enum CpmapStatus cpmap_map_analyze_json(const struct CpmapMap *map,
                                        double tol,
                                        uint64_t seed,
                                        size_t budget,
                                        char **out);

/**
 * The map file for `map` in the requested form.
 *
 * # Safety
 * `map` must be a live handle and `out` a valid pointer.
 */
enum CpmapStatus cpmap_map_to_json(const struct CpmapMap *map, enum CpmapForm form, char **out);

/**
 * Range membership of `y` (comma-separated, entries `re` or `re:im`) for
 * the map's Hill coefficient matrix, as JSON.
 *
 * # Safety
 * `map` must be a live handle, `y` NUL-terminated and `out` valid.
 */
enum CpmapStatus cpmap_map_range_json(const struct CpmapMap *map,
                                      const char *y,
                                      double tol,
                                      uint64_t seed,
                                      char **out);

/**
 * The 2x2 block pattern census as JSON.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum CpmapStatus cpmap_census_json(char **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CPMAP_H */
