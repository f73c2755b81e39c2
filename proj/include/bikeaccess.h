#ifndef BIKEACCESS_H
#define BIKEACCESS_H

/* C interface to the bike-to-subway accessibility engine.
 *
 * Handles are opaque. Every fallible call returns a ba_status; on failure the
 * message for the calling thread is available from ba_last_error(). Strings
 * returned through char** out-parameters are heap allocated and must be
 * released with ba_string_free(). */

#include <stddef.h>
#include <stdint.h>

#if defined(BA_BUILDING_LIBRARY)
#define BA_API __attribute__((visibility("default")))
#else
#define BA_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum ba_status {
  BA_OK = 0,
  BA_ERR_INVALID_ARGUMENT = 1,
  BA_ERR_IO = 2,
  BA_ERR_PARSE = 3,
  BA_ERR_INTEGRITY = 4,
  BA_ERR_DOMAIN = 5,
  BA_ERR_SNAP = 6,
  BA_ERR_UNREACHABLE = 7,
  BA_ERR_MODEL = 8,
  BA_ERR_NOT_FOUND = 9,
  BA_ERR_CAPACITY = 10,
  BA_ERR_INTERNAL = 99
} ba_status;

typedef struct ba_engine ba_engine;
typedef struct ba_service ba_service;

/* Input files. NULL or "" marks an optional file as absent. */
typedef struct ba_input_paths {
  const char* network;
  const char* stations;
  const char* demand;
  const char* entrances;
  const char* schedules;
  const char* zones;
  const char* pois;
} ba_input_paths;

typedef struct ba_access_params {
  double window_start_min;
  double window_end_min;
  double reliability_buffer_min;
  double edf_numerator;
  double secondary_weight;
  double entrance_radius_m;
} ba_access_params;

/* Bit i of walkable_mask enables road class i in the order motorway, trunk,
 * primary, secondary, tertiary, unclassified, residential, living_street. */
typedef struct ba_placement_params {
  double min_spacing_m;
  uint32_t walkable_mask;
  int require_both; /* 0: low income OR minority majority; 1: AND */
} ba_placement_params;

typedef struct ba_train_config {
  int epochs;
  double learning_rate;
  uint64_t seed;
  int hidden;
  int neighbors;
} ba_train_config;

BA_API const char* ba_status_name(ba_status status);
BA_API const char* ba_last_error(void);
BA_API void ba_string_free(char* s);

BA_API void ba_access_params_default(ba_access_params* out);
BA_API void ba_placement_params_default(ba_placement_params* out);
BA_API void ba_train_config_default(ba_train_config* out);

/* Fills paths with the conventional file names inside dir. The strings stay
 * valid until the next call on the same thread. */
BA_API ba_status ba_input_paths_in_directory(const char* dir, ba_input_paths* out);

/* Validates the inputs and writes a normalized snapshot to out_dir.
 * report_json (optional) receives counts and warnings. */
BA_API ba_status ba_ingest(const ba_input_paths* paths, const char* out_dir, char** report_json);

/* Writes a synthetic city ("grid" or "linear") to out_dir. */
BA_API ba_status ba_synthesize(const char* kind, uint64_t seed, const char* out_dir);

/* Trains the demand model and saves it to model_out. loss_csv (optional)
 * receives epoch,loss rows. embeddings may be NULL. */
BA_API ba_status ba_train(const ba_input_paths* paths, const char* embeddings, const ba_train_config* config,
                          const char* model_out, char** loss_csv);

/* embeddings, model, access and placement may be NULL. */
BA_API ba_status ba_engine_open(const ba_input_paths* paths, const char* embeddings, const char* model,
                                const ba_access_params* access, const ba_placement_params* placement,
                                ba_engine** out);
BA_API void ba_engine_close(ba_engine* engine);

/* Newline-separated warnings collected since the last call. */
BA_API ba_status ba_engine_take_warnings(ba_engine* engine, char** out);

/* month is "YYYY-MM". */
BA_API ba_status ba_engine_ptal_csv(ba_engine* engine, const char* month, char** out);
BA_API ba_status ba_engine_predict_csv(ba_engine* engine, const char* month, char** out);
BA_API ba_status ba_engine_wptal_csv(ba_engine* engine, const char* month, char** out);
/* additions_csv: optional recommendations.csv whose rows join the equity set. */
BA_API ba_status ba_engine_equity_json(ba_engine* engine, const char* month, const char* additions_csv, char** out);
BA_API ba_status ba_engine_recommend(ba_engine* engine, const char* month, int n, int as_json, char** out);
BA_API ba_status ba_engine_curve_json(ba_engine* engine, const char* month, const int* increments, size_t count,
                                      char** out);

/* The service shares the engine; closing the engine first is allowed. */
BA_API ba_status ba_service_create(ba_engine* engine, const char* default_month, size_t capacity, ba_service** out);
BA_API void ba_service_destroy(ba_service* service);

/* Routes one HTTP request. query excludes the '?'. content_type points to a
 * static string. A non-BA_OK return means the request could not be routed at
 * all; API errors are reported through http_status and the JSON body. */
BA_API ba_status ba_service_handle(ba_service* service, const char* method, const char* path, const char* query,
                                   const char* body, size_t body_len, int* http_status, const char** content_type,
                                   char** response);

#ifdef __cplusplus
}
#endif

#endif /* BIKEACCESS_H */
