#ifndef RIDEPOOL_H
#define RIDEPOOL_H

#include <stddef.h>
#include <stdint.h>

/*
 Status code returned by every fallible call.
 */
typedef enum RpStatus {
  RP_STATUS_OK = 0,
  RP_STATUS_NULL_ARGUMENT = 1,
  RP_STATUS_INVALID_UTF8 = 2,
  RP_STATUS_IO = 3,
  RP_STATUS_PARSE = 4,
  RP_STATUS_CONFIG = 5,
  RP_STATUS_INVALID_MAP = 6,
  RP_STATUS_UNKNOWN_ZONE = 7,
  RP_STATUS_OUT_OF_RANGE = 8,
  RP_STATUS_CONTRACT = 9,
  RP_STATUS_INVARIANT = 10,
  RP_STATUS_UNKNOWN_METRIC = 11,
  RP_STATUS_PANIC = 12,
} RpStatus;

typedef struct RpConfig RpConfig;

typedef struct RpMap RpMap;

typedef struct RpRun RpRun;

typedef struct RpTrips RpTrips;

typedef struct RpValues RpValues;

/*
 Message of the last failed call on this thread, or null after a success.
 The pointer stays valid until the next `rp_*` call on the same thread.
 */
const char *rp_last_error(void);

/*
 Library version as a static NUL-terminated string.
 */
const char *rp_version(void);

/*
 Default configuration.

 # Safety
 `out` must be a valid pointer to write a handle into.
 */
enum RpStatus rp_config_new(struct RpConfig **out);

/*
 Configuration read from a `key = value` file.

 # Safety
 `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum RpStatus rp_config_load(const char *path, struct RpConfig **out);

/*
 Sets one key, using the same names and value syntax as config files.

 # Safety
 `cfg` must be a live handle; `key` and `value` NUL-terminated strings.
 */
enum RpStatus rp_config_set(struct RpConfig *cfg, const char *key, const char *value);

/*
 # Safety
 `cfg` must be null or a handle not freed before.
 */
void rp_config_free(struct RpConfig *cfg);

/*
 Map from a zone-and-adjacency file as written by `ridepool generate`.

 # Safety
 `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum RpStatus rp_map_load(const char *path, struct RpMap **out);

/*
 Number of zones, or 0 for a null handle.

 # Safety
 `map` must be null or a live handle.
 */
uintptr_t rp_map_zone_count(const struct RpMap *map);

/*
 # Safety
 `map` must be null or a handle not freed before.
 */
void rp_map_free(struct RpMap *map);

/*
 Trips from a CSV file, filtered to the configured window and to zones of
 `map`. `column_map` may be null for the default column names.

 # Safety
 Handles must be live, strings NUL-terminated (or null where allowed) and
 `out` a valid pointer.
 */
enum RpStatus rp_trips_load(const char *path,
                            const struct RpMap *map,
                            const struct RpConfig *cfg,
                            const char *column_map,
                            struct RpTrips **out);

/*
 Number of trips, or 0 for a null handle.

 # Safety
 `trips` must be null or a live handle.
 */
uintptr_t rp_trips_count(const struct RpTrips *trips);

/*
 # Safety
 `trips` must be null or a handle not freed before.
 */
void rp_trips_free(struct RpTrips *trips);

/*
 Draws one day of a built-in synthetic scenario (`hotspots`,
 `common-direction` or `downtown`), shaped by the cycle length and
 patience of `cfg`.

 # Safety
 `name` must be NUL-terminated, `cfg` live and both out pointers valid.
 */
enum RpStatus rp_preset_generate(const char *name,
                                 uint64_t seed,
                                 const struct RpConfig *cfg,
                                 struct RpMap **out_map,
                                 struct RpTrips **out_trips);

/*
 Value table from a file written by `ridepool learn` or [`rp_values_save`].

 # Safety
 `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum RpStatus rp_values_load(const char *path, struct RpValues **out);

/*
 Learns a value table from `n_days` trip sets, one per historical day.

 # Safety
 `days` must point to `n_days` live trip handles; `map`, `cfg` must be live
 and `out` valid.
 */
enum RpStatus rp_values_learn(const struct RpMap *map,
                              const struct RpConfig *cfg,
                              const struct RpTrips *const *days,
                              uintptr_t n_days,
                              struct RpValues **out);

/*
 # Safety
 `values` must be live and `path` NUL-terminated.
 */
enum RpStatus rp_values_save(const struct RpValues *values, const char *path);

/*
 # Safety
 `values` must be null or a handle not freed before.
 */
void rp_values_free(struct RpValues *values);

/*
 Runs one simulation. `values` may be null for the SMW pipelines. The trip
 handle is left untouched and can be reused.

 # Safety
 Handles must be live (or null where allowed) and `out` valid.
 */
enum RpStatus rp_run(const struct RpConfig *cfg,
                     const struct RpMap *map,
                     const struct RpTrips *trips,
                     const struct RpValues *values,
                     struct RpRun **out);

/*
 Reads a summary metric by the name used in `metrics.csv`, e.g.
 `serving_rate` or `poolability_2`.

 # Safety
 `run` must be live, `name` NUL-terminated and `out` valid.
 */
enum RpStatus rp_run_metric(const struct RpRun *run, const char *name, double *out);

/*
 Number of events logged by the run, or 0 for a null handle.

 # Safety
 `run` must be null or a live handle.
 */
uintptr_t rp_run_event_count(const struct RpRun *run);

/*
 Writes `metrics.csv`, `events.log` and `effective_config.txt` into `dir`.

 # Safety
 `run` must be live and `dir` NUL-terminated.
 */
enum RpStatus rp_run_write(const struct RpRun *run, const char *dir);

/*
 # Safety
 `run` must be null or a handle not freed before.
 */
void rp_run_free(struct RpRun *run);

/*
 Rider fare after a pooling discount for `extra_minutes` of detour.
 */
double rp_fare(double base, double extra_minutes, double lambda);

/*
 Supply-demand ratio of a zone with `requests` waiting and `vacant` taxis.
 */
double rp_sd_ratio(uintptr_t requests, double vacant);

#endif  /* RIDEPOOL_H */
