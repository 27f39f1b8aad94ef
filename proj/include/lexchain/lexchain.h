/* lexchain - multi-defendant legal judgment prediction with chained
 * seq2seq reasoning. Public C API.
 *
 * The library is consumed through opaque handles and status codes; all
 * heavy lifting (corpus generation, training, evaluation, prediction,
 * ablation, reporting) happens behind this boundary. Strings returned by
 * the library remain owned by it and are valid until the next call on the
 * same thread.
 */
#ifndef LEXCHAIN_H
#define LEXCHAIN_H

#include <stddef.h>

#if defined(_WIN32) && defined(LEXCHAIN_SHARED)
#  ifdef LEXCHAIN_BUILD
#    define LEX_API __declspec(dllexport)
#  else
#    define LEX_API __declspec(dllimport)
#  endif
#elif defined(__GNUC__)
#  define LEX_API __attribute__((visibility("default")))
#else
#  define LEX_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

/* Status codes double as process exit codes in the CLI. */
typedef enum lex_status {
    LEX_OK = 0,
    LEX_ERR_USAGE = 1,   /* malformed invocation (CLI only) */
    LEX_ERR_CONFIG = 2,  /* bad or inconsistent configuration */
    LEX_ERR_DATA = 3,    /* corpus/schema/label violations */
    LEX_ERR_NUMERIC = 4, /* non-finite loss or activations, divergence */
    LEX_ERR_IO = 5,      /* filesystem failures, refusing to overwrite */
    LEX_ERR_INTERNAL = 6
} lex_status;

LEX_API const char *lex_version(void);
LEX_API const char *lex_status_name(lex_status status);

/* Message describing the most recent failure on this thread; empty string
 * if the last call succeeded. */
LEX_API const char *lex_last_error(void);

/* A run configuration: flat key=value settings covering the model,
 * training, generation, prompts and ablation mode. Unknown keys are
 * rejected. See docs/run-config keys in the README. */
typedef struct lex_config lex_config;

LEX_API lex_status lex_config_create(lex_config **out);
LEX_API lex_status lex_config_open(const char *path, lex_config **out);
LEX_API lex_status lex_config_set(lex_config *cfg, const char *key,
                                  const char *value);
/* Returns NULL for unknown keys. */
LEX_API const char *lex_config_get(const lex_config *cfg, const char *key);
LEX_API void lex_config_free(lex_config *cfg);

/* Every operation below writes a run_manifest.json into out_dir before
 * doing any work, and refuses a non-empty out_dir unless force != 0. */

/* Generate the synthetic corpus: train/val/test JSONL splits, label vocab
 * files and the rule-table sidecar. */
LEX_API lex_status lex_gen_data(const lex_config *cfg, const char *out_dir,
                                int force);

/* Train on data_dir (as produced by lex_gen_data); writes token vocab,
 * best checkpoint, label vocabs and a step log into out_dir. */
LEX_API lex_status lex_train(const lex_config *cfg, const char *data_dir,
                             const char *out_dir, int force);

/* Evaluate a trained model (model_dir from lex_train) on data_path, which
 * is either a corpus JSONL file or a directory containing test.jsonl.
 * gold_intermediates != 0 feeds gold relationship/circumstance sequences
 * to the second-level chains instead of predicted ones. */
LEX_API lex_status lex_eval(const lex_config *cfg, const char *model_dir,
                            const char *data_path, int gold_intermediates,
                            const char *out_dir, int force);

/* Run the reasoning chains over a case file and dump per-defendant chain
 * texts, confidences and selected judgments as JSONL. */
LEX_API lex_status lex_predict(const lex_config *cfg, const char *model_dir,
                               const char *case_file, const char *out_dir,
                               int force);

/* Train and evaluate the full model plus the five chain ablations with
 * shared data and seeds; writes a variant-by-task metric table. */
LEX_API lex_status lex_ablate(const lex_config *cfg, const char *data_dir,
                              const char *out_dir, int force);

/* Collect metric reports from finished run directories into one
 * comparison table. */
LEX_API lex_status lex_report(const char *const *run_dirs, size_t n_dirs,
                              const char *out_dir, int force);

#ifdef __cplusplus
}
#endif

#endif /* LEXCHAIN_H */
