/* C interface to the motion-group forecasting core.
 *
 * All functions are driven by JSON configuration strings and file-path
 * artifacts; heavy state stays inside the library. Every call returns a
 * status code; on failure the context stores a human-readable message.
 */
#ifndef MOGAF_H
#define MOGAF_H

#ifdef __cplusplus
extern "C" {
#endif

/* Status codes double as process exit codes in the bundled CLI. */
#define MOGAF_OK 0
#define MOGAF_ERR_CONFIG 2
#define MOGAF_ERR_NUMERIC 3
#define MOGAF_ERR_IO 4

/* Opaque context owning the last-error message. Not thread-safe; use one
 * context per thread. */
typedef struct mogaf_ctx mogaf_ctx;

mogaf_ctx* mogaf_ctx_new(void);
void mogaf_ctx_free(mogaf_ctx* ctx);

/* Message of the most recent failure on this context; empty string when the
 * last call succeeded. Owned by the context. */
const char* mogaf_last_error(const mogaf_ctx* ctx);

const char* mogaf_version(void);

/* Runs one stage. stage is one of: generate, group, refine, train, forecast,
 * eval, pipeline, export. config_json is a JSON object with the stage's
 * settings (see the README for the schema); artifacts are written to the
 * configured output directory. When out_summary_json is non-NULL it receives
 * a heap-allocated JSON summary the caller releases with mogaf_free_string.
 */
int mogaf_run_stage(mogaf_ctx* ctx, const char* stage, const char* config_json,
                    char** out_summary_json);

/* Convenience wrappers over mogaf_run_stage. */
int mogaf_generate(mogaf_ctx* ctx, const char* config_json, char** out_summary_json);
int mogaf_group(mogaf_ctx* ctx, const char* config_json, char** out_summary_json);
int mogaf_refine(mogaf_ctx* ctx, const char* config_json, char** out_summary_json);
int mogaf_train(mogaf_ctx* ctx, const char* config_json, char** out_summary_json);
int mogaf_forecast(mogaf_ctx* ctx, const char* config_json, char** out_summary_json);
int mogaf_eval(mogaf_ctx* ctx, const char* config_json, char** out_summary_json);
int mogaf_pipeline(mogaf_ctx* ctx, const char* config_json, char** out_summary_json);
int mogaf_export(mogaf_ctx* ctx, const char* config_json, char** out_summary_json);

void mogaf_free_string(char* s);

#ifdef __cplusplus
}
#endif

#endif /* MOGAF_H */
