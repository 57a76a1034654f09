#ifndef SDU_SDU_H
#define SDU_SDU_H

#include <stddef.h>
#include <stdint.h>

#if defined(SDU_BUILDING_LIBRARY)
#define SDU_API __attribute__((visibility("default")))
#else
#define SDU_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

/* Status codes double as process exit codes for the CLI. */
enum sdu_status {
    SDU_OK = 0,
    SDU_E_ARGUMENT = 1,     /* null handle or malformed call */
    SDU_E_SCENARIO = 2,     /* scenario, market or usage error */
    SDU_E_NUMERICAL = 3,    /* numerical abort */
    SDU_FAIL = 4,           /* at least one check failed */
    SDU_INCONCLUSIVE = 5,   /* no failure, at least one inconclusive */
    SDU_E_INTERNAL = 6
};

typedef struct sdu_scenario sdu_scenario;

SDU_API const char* sdu_version(void);

/* Message of the last non-OK status on the calling thread. */
SDU_API const char* sdu_last_error(void);
SDU_API void sdu_string_free(char* s);

/* 0 selects the hardware concurrency. */
SDU_API void sdu_set_workers(unsigned n);

SDU_API int sdu_scenario_parse(const char* json, sdu_scenario** out);
SDU_API int sdu_scenario_load(const char* path, sdu_scenario** out);
SDU_API void sdu_scenario_free(sdu_scenario* s);
SDU_API int sdu_scenario_set_seed(sdu_scenario* s, uint64_t seed);
SDU_API int sdu_scenario_set_paths(sdu_scenario* s, uint64_t n_paths);
SDU_API int sdu_scenario_to_json(const sdu_scenario* s, char** out);

/* Each command returns its JSON document in *out (free with sdu_string_free)
   and writes its files into out_dir when out_dir is non-NULL. */
SDU_API int sdu_simulate(const sdu_scenario* s, const char* out_dir, char** out);
/* checks: comma list or NULL for the family defaults; strategy: NULL for auto. */
SDU_API int sdu_check(const sdu_scenario* s, const char* checks, const char* strategy, const char* out_dir,
                      char** out);
/* utility: "exp", "power" or "log"; gammas: one value, or one per state for "exp". */
SDU_API int sdu_oracle(const char* market_json, const char* utility, const double* gammas, size_t n_gammas,
                       const char* out_dir, char** out);
/* strategy: "auto" (NULL) or "zero". */
SDU_API int sdu_convergence(const sdu_scenario* s, const double* ladder, size_t n, const char* strategy,
                            const char* out_dir, char** out);

#ifdef __cplusplus
}
#endif

#endif
