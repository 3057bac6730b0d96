#ifndef IBEX_IBEX_H
#define IBEX_IBEX_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define IBEX_API __declspec(dllexport)
#else
#define IBEX_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum ibex_status {
  IBEX_OK = 0,
  IBEX_ERR_INVALID_ARG = 1,
  IBEX_ERR_CONFIG = 2,
  IBEX_ERR_TRACE = 3,
  IBEX_ERR_CAPACITY = 4,
  IBEX_ERR_IO = 5,
  IBEX_ERR_ADDRESS = 6,
  IBEX_ERR_INTERNAL = 7
} ibex_status;

typedef struct ibex_sim ibex_sim;

typedef struct ibex_pagefault_result {
  uint64_t accesses;
  uint64_t cold_faults;
  uint64_t capacity_faults;
  uint64_t resident_bytes_peak;
} ibex_pagefault_result;

IBEX_API const char* ibex_version(void);
/* Message for the most recent failure on this thread; "" if none. */
IBEX_API const char* ibex_last_error(void);
/* Releases strings returned through char** out-parameters. */
IBEX_API void ibex_string_free(char* s);

/* Sizes such as 4096, 64K, 512MB, 2GiB. */
IBEX_API ibex_status ibex_parse_size(const char* text, uint64_t* out);

/* config_path may be NULL (all defaults). overrides are "key=value" strings
 * applied after the file. */
IBEX_API ibex_status ibex_sim_create(const char* config_path, const char* const* overrides, size_t n_overrides,
                                     ibex_sim** out);
IBEX_API void ibex_sim_destroy(ibex_sim* sim);

/* Loads the trace named by the `trace` key (a file or "synthetic"). */
IBEX_API ibex_status ibex_sim_load_trace(ibex_sim* sim);
/* Replays the trace; loads it first if needed. */
IBEX_API ibex_status ibex_sim_run(ibex_sim* sim);

/* One request on an idle device. payload64 may be NULL for writes that keep
 * the stored content; out64 and latency_ps may be NULL. */
IBEX_API ibex_status ibex_sim_access(ibex_sim* sim, int is_write, uint64_t ospa, const uint8_t* payload64,
                                     uint8_t* out64, uint64_t* latency_ps);

/* Accesses of one traffic category ("metadata_read", ...), or "total". */
IBEX_API ibex_status ibex_sim_traffic(const ibex_sim* sim, const char* category, uint64_t* out);

IBEX_API ibex_status ibex_sim_report_json(const ibex_sim* sim, char** out);
IBEX_API ibex_status ibex_sim_write_outputs(const ibex_sim* sim, const char* dir);
IBEX_API ibex_status ibex_sim_dump_meta(const ibex_sim* sim, char** out);

IBEX_API ibex_status ibex_sweep(const char* config_path, const char* const* overrides, size_t n_overrides,
                                const char* axis, const char* const* values, size_t n_values, const char* out_dir,
                                char** out_json);
IBEX_API ibex_status ibex_ablate(const char* config_path, const char* const* overrides, size_t n_overrides,
                                 const char* out_dir, char** out_json);

/* Writes the configured trace (synthetic or converted) to path; binary != 0
 * selects the binary format. */
IBEX_API ibex_status ibex_gen_trace(const char* config_path, const char* const* overrides, size_t n_overrides,
                                    const char* path, int binary);

/* mode: 0 uncompressed, 1 ibex. */
IBEX_API ibex_status ibex_pagefault(const char* trace_path, uint64_t capacity_bytes, int mode,
                                    ibex_pagefault_result* out);

#ifdef __cplusplus
}
#endif

#endif
