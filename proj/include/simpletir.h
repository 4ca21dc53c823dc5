/* C interface to the simpletir shared library.
 *
 * All functions return a status code:
 *   0  ok
 *   1  usage error (bad arguments)
 *   2  configuration error
 *   3  runtime error
 * On nonzero status, simpletir_last_error() describes the failure.
 * Strings returned through char** outputs are heap-allocated and must be
 * released with simpletir_string_free().
 */
#ifndef SIMPLETIR_H
#define SIMPLETIR_H

#ifdef __cplusplus
extern "C" {
#endif

#define SIMPLETIR_OK 0
#define SIMPLETIR_ERR_USAGE 1
#define SIMPLETIR_ERR_CONFIG 2
#define SIMPLETIR_ERR_RUNTIME 3

typedef struct simpletir_config simpletir_config;

/* Thread-local message for the most recent failing call. Never NULL. */
const char* simpletir_last_error(void);

void simpletir_string_free(char* s);

/* ---- configuration ---- */

int simpletir_config_default(simpletir_config** out);
int simpletir_config_load(const char* path, simpletir_config** out);
/* key is the dotted "section.key" name from the config grammar. */
int simpletir_config_set(simpletir_config* config, const char* key, const char* value);
int simpletir_config_dump(const simpletir_config* config, char** text_out);
void simpletir_config_free(simpletir_config* config);

/* ---- training and evaluation ---- */

/* Called once per completed step; return 0 to stop the run early. */
typedef int (*simpletir_progress_fn)(int step, double mean_reward, double grad_norm_preclip,
                                     void* user);

/* Runs the full training loop; metrics, checkpoints, and logs go to the
 * configured output directory. steps_done_out may be NULL. */
int simpletir_train(const simpletir_config* config, simpletir_progress_fn progress, void* user,
                    int* steps_done_out);

/* Evaluates a checkpoint (average@N solve rate per difficulty) on the
 * config's task set. report is a JSON object. */
int simpletir_eval(const simpletir_config* config, const char* checkpoint_path,
                   char** report_json_out);

/* Corpus statistics over a trajectory JSONL file; report is a JSON object. */
int simpletir_analyze(const char* trajectories_jsonl_path, char** report_json_out);

/* ---- sandbox ---- */

/* Executes mini-language code; feedback_out receives the formatted feedback
 * line, final_answer_out (optional, may be NULL) receives the submitted
 * answer rendered as text, or NULL if none was submitted. Execution errors
 * are reported inside the feedback text with status 0. */
int simpletir_exec_code(const char* code, long long step_limit, char** feedback_out,
                        char** final_answer_out);

/* ---- diagnostics ---- */

/* Samples a fresh batch under the config at the given seed and checks the
 * analytic per-position gradient norms against the closed-form prediction
 * and finite differences. report is a JSON object; a mismatch returns
 * SIMPLETIR_ERR_RUNTIME. */
int simpletir_verify_prop1(const simpletir_config* config, unsigned long long seed,
                           char** report_json_out);

#ifdef __cplusplus
}
#endif

#endif /* SIMPLETIR_H */
