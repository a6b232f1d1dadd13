/* authorgan.h: C interface to the authorgan runtime.
 *
 * Every call returns an ag_status. On failure the message is available from
 * ag_last_error() on the same thread until the next failing call. Strings
 * returned through char** outputs are owned by the caller and released with
 * ag_free(); the document getters return static storage.
 */
#ifndef AUTHORGAN_H
#define AUTHORGAN_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#  if defined(AUTHORGAN_BUILDING)
#    define AG_API __declspec(dllexport)
#  else
#    define AG_API __declspec(dllimport)
#  endif
#else
#  define AG_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum ag_status {
  AG_OK = 0,
  AG_ERR_ARGUMENT = 1,   /* null handle, bad option value */
  AG_ERR_VALIDATION = 2, /* spec has error diagnostics */
  AG_ERR_SHAPE = 3,
  AG_ERR_PARAM = 4,
  AG_ERR_REGISTRY = 5,
  AG_ERR_FORMAT = 6,
  AG_ERR_IO = 7,
  AG_ERR_NUMERIC = 8,
  AG_ERR_CANCELLED = 9,
  AG_ERR_CONTRACT = 10,
  AG_ERR_INTERNAL = 99
} ag_status;

AG_API const char* ag_version(void);
AG_API const char* ag_status_name(ag_status status);
AG_API const char* ag_last_error(void);
AG_API void ag_free(char* s);

/* Static JSON documents. */
AG_API const char* ag_palette_json(void);
AG_API const char* ag_presets_json(void);
AG_API const char* ag_schema_json(void);

/* ---- specs ---- */

typedef struct ag_spec ag_spec;

/* Parses and validates. A spec with error diagnostics still yields a handle
 * (status AG_OK) so the diagnostics can be read; only a null argument or
 * allocation failure leaves *out unset. Relative data paths resolve against
 * base_dir (may be NULL for the working directory). */
AG_API ag_status ag_spec_parse(const char* text, size_t len, const char* base_dir,
                               ag_spec** out);
/* As ag_spec_parse, reading the file; base_dir is the file's directory. An
 * unreadable file is AG_ERR_IO. */
AG_API ag_status ag_spec_load_file(const char* path, ag_spec** out);
AG_API void ag_spec_destroy(ag_spec* spec);

AG_API size_t ag_spec_error_count(const ag_spec* spec);
AG_API size_t ag_spec_warning_count(const ag_spec* spec);
/* [{severity, path, message, line?, column?}] */
AG_API ag_status ag_spec_diagnostics_json(const ag_spec* spec, char** out);
/* Canonical spec JSON; AG_ERR_VALIDATION when the text did not parse. */
AG_API ag_status ag_spec_to_json(const ag_spec* spec, char** out);

/* ---- training ---- */

typedef struct ag_step {
  int64_t step;  /* 1-based across the run */
  int64_t epoch; /* 1-based */
  double gen_loss;
  double disc_loss;
} ag_step;

/* Return nonzero to cancel; ag_train then fails with AG_ERR_CANCELLED. */
typedef int (*ag_step_callback)(void* user, const ag_step* step);

typedef struct ag_train_options {
  int64_t epochs;        /* 0 keeps the spec value */
  int has_seed;          /* nonzero: seed replaces the spec value */
  uint64_t seed;
  const char* data_path; /* NULL keeps the spec value */
  const char* out_dir;   /* NULL writes nothing */
  size_t samples;        /* sample grid size when out_dir is set; 0 for none */
  int64_t max_steps;     /* 0 for no limit */
  int include_timing;    /* wall-clock block in report.json */
  ag_step_callback on_step;
  void* user;
} ag_train_options;

/* Defaults: everything from the spec, 16 samples, timing included. */
AG_API void ag_train_options_init(ag_train_options* options);

typedef struct ag_report ag_report;

/* Fails with AG_ERR_VALIDATION (message = first diagnostic) when the spec has
 * errors or does not resolve against the data. */
AG_API ag_status ag_train(const ag_spec* spec, const ag_train_options* options,
                          ag_report** out);
AG_API void ag_report_destroy(ag_report* report);
AG_API size_t ag_report_step_count(const ag_report* report);
AG_API ag_status ag_report_step(const ag_report* report, size_t index, ag_step* out);
AG_API double ag_report_average_epoch_seconds(const ag_report* report);
AG_API ag_status ag_report_json(const ag_report* report, int include_timing, char** out);

/* ---- benchmark matrix ---- */

typedef struct ag_matrix_options {
  const char* data_path; /* required */
  const char* generators;     /* comma separated; NULL for the full list */
  const char* discriminators; /* comma separated; NULL for the full list */
  int64_t epochs;        /* default 1 */
  int64_t batch_size;    /* default 64 */
  uint64_t seed;
  int64_t latent_dim;    /* default 100 */
  int64_t limit;         /* use the first N images; 0 for all */
  int64_t max_steps;     /* 0 for no limit */
  /* Called after each row with the row as JSON. */
  void (*on_row)(void* user, const char* row_json);
  void* user;
} ag_matrix_options;

AG_API void ag_matrix_options_init(ag_matrix_options* options);

typedef struct ag_matrix ag_matrix;

AG_API ag_status ag_matrix_run(const ag_matrix_options* options, ag_matrix** out);
AG_API void ag_matrix_destroy(ag_matrix* matrix);
AG_API size_t ag_matrix_row_count(const ag_matrix* matrix);
AG_API ag_status ag_matrix_csv(const ag_matrix* matrix, char** out);
AG_API ag_status ag_matrix_json(const ag_matrix* matrix, char** out);

/* ---- HTTP service ---- */

typedef struct ag_server_config {
  const char* host;     /* NULL: 127.0.0.1 */
  int port;             /* -1: AUTHORGAN_PORT or 8080; 0: any free port */
  size_t max_jobs;      /* 0: AUTHORGAN_MAX_JOBS or 1 */
  const char* data_dir; /* NULL: AUTHORGAN_DATA_DIR or "." */
  size_t body_limit;    /* 0: 1 MiB */
} ag_server_config;

AG_API void ag_server_config_init(ag_server_config* config);

typedef struct ag_server ag_server;

AG_API ag_status ag_server_create(const ag_server_config* config, ag_server** out);
/* Binds and serves on a background thread; *port receives the bound port. */
AG_API ag_status ag_server_start(ag_server* server, int* port);
/* Binds and serves on the calling thread until ag_server_stop. */
AG_API ag_status ag_server_listen(ag_server* server);
AG_API ag_status ag_server_stop(ag_server* server);
AG_API void ag_server_destroy(ag_server* server);

#ifdef __cplusplus
}
#endif

#endif /* AUTHORGAN_H */
