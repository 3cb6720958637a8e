/* C interface to the FireGuard fabric simulator. */
#ifndef FIREGUARD_FIREGUARD_H
#define FIREGUARD_FIREGUARD_H

#include <stddef.h>
#include <stdint.h>

#if defined(FG_BUILDING_LIBRARY)
#define FG_API __attribute__((visibility("default")))
#else
#define FG_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef struct fg_trace fg_trace;
typedef struct fg_config fg_config;
typedef struct fg_metrics fg_metrics;

typedef enum fg_status {
  FG_OK = 0,
  FG_ERR_PARSE = 1,
  FG_ERR_ORDER = 2,
  FG_ERR_CONFIG = 3,
  FG_ERR_INJECT = 4,
  FG_ERR_FAULT = 5,
  FG_ERR_IO = 6,
  FG_ERR_ARG = 7
} fg_status;

/* Message for the last failing call on this thread; never NULL. */
FG_API const char* fg_last_error(void);
FG_API const char* fg_status_name(fg_status status);
/* Frees any string returned through a char** out-parameter. */
FG_API void fg_string_free(char* s);

/* Traces */
FG_API fg_status fg_trace_parse(const char* text, size_t len, fg_trace** out);
FG_API fg_status fg_trace_load(const char* path, fg_trace** out);
FG_API fg_status fg_trace_generate(const char* profile, uint64_t seed, size_t length,
                                   fg_trace** out);
/* Newline-separated list of generator profiles. */
FG_API fg_status fg_profile_names(char** out);
/* `attacks` holds one "<seq> <MODE> <payload>" per line. Returns the new
 * trace and the ground-truth file text. */
FG_API fg_status fg_trace_inject(const fg_trace* trace, const char* attacks, fg_trace** out,
                                 char** truth);
/* Picks `count` attack sites of `mode` and writes them in the format above. */
FG_API fg_status fg_trace_plan_attacks(const fg_trace* trace, const char* mode, size_t count,
                                       uint64_t seed, uint64_t flood, char** attacks);
FG_API fg_status fg_trace_serialize(const fg_trace* trace, char** out);
FG_API fg_status fg_trace_save(const fg_trace* trace, const char* path);
FG_API size_t fg_trace_size(const fg_trace* trace);
FG_API void fg_trace_free(fg_trace* trace);

/* Run configurations (JSON). Relative paths resolve against base_dir. */
FG_API fg_status fg_config_parse(const char* json, const char* base_dir, fg_config** out);
FG_API fg_status fg_config_load(const char* path, fg_config** out);
FG_API fg_status fg_config_override(fg_config* config, const char* key, const char* value);
FG_API fg_status fg_config_clone(const fg_config* config, fg_config** out);
FG_API fg_status fg_config_set_label(fg_config* config, const char* label);
/* Loads or generates the trace the config names. */
FG_API fg_status fg_config_trace(const fg_config* config, fg_trace** out);
/* Ground-truth file named by the config, or NULL. */
FG_API const char* fg_config_truth_path(const fg_config* config);
FG_API void fg_config_free(fg_config* config);

/* Simulation. `truth` (nullable) is ground-truth file text used for latency. */
FG_API fg_status fg_run(const fg_trace* trace, const fg_config* config, const char* truth,
                        fg_metrics** out);
FG_API fg_status fg_metrics_json(const fg_metrics* m, char** out);
FG_API fg_status fg_metrics_csv_header(char** out);
FG_API fg_status fg_metrics_csv_row(const fg_metrics* m, char** out);
FG_API fg_status fg_metrics_verdict_log(const fg_metrics* m, char** out);
FG_API double fg_metrics_slowdown(const fg_metrics* m);
FG_API size_t fg_metrics_verdicts(const fg_metrics* m);
FG_API size_t fg_metrics_misses(const fg_metrics* m);
FG_API void fg_metrics_free(fg_metrics* m);

/* Plot-ready tables over `n` metrics JSON documents. */
FG_API fg_status fg_report(const char* const* documents, size_t n, char** out);

#ifdef __cplusplus
}
#endif

#endif
