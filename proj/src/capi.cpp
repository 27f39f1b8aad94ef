#include "lexchain/lexchain.h"

#include <string>

#include "errors.hpp"
#include "runcfg.hpp"
#include "runner.hpp"
#include "version.hpp"

// Opaque handle behind the C boundary.
struct lex_config {
    lexchain::RunConfig cfg;
};

namespace {

thread_local std::string g_last_error;

lex_status status_of(const lexchain::Error &e) {
    switch (e.kind()) {
    case lexchain::ErrorKind::config: return LEX_ERR_CONFIG;
    case lexchain::ErrorKind::data: return LEX_ERR_DATA;
    case lexchain::ErrorKind::numeric: return LEX_ERR_NUMERIC;
    case lexchain::ErrorKind::io: return LEX_ERR_IO;
    }
    return LEX_ERR_INTERNAL;
}

template <typename Fn>
lex_status guarded(Fn &&fn) {
    try {
        fn();
        g_last_error.clear();
        return LEX_OK;
    } catch (const lexchain::Error &e) {
        g_last_error = e.what();
        return status_of(e);
    } catch (const std::exception &e) {
        g_last_error = e.what();
        return LEX_ERR_INTERNAL;
    } catch (...) {
        g_last_error = "unknown error";
        return LEX_ERR_INTERNAL;
    }
}

lex_status require(const void *ptr, const char *what) {
    if (ptr) return LEX_OK;
    g_last_error = std::string("null ") + what;
    return LEX_ERR_CONFIG;
}

} // namespace

extern "C" {

const char *lex_version(void) { return lexchain::kVersion; }

const char *lex_status_name(lex_status status) {
    switch (status) {
    case LEX_OK: return "ok";
    case LEX_ERR_USAGE: return "usage";
    case LEX_ERR_CONFIG: return "config";
    case LEX_ERR_DATA: return "data";
    case LEX_ERR_NUMERIC: return "numeric";
    case LEX_ERR_IO: return "io";
    case LEX_ERR_INTERNAL: return "internal";
    }
    return "unknown";
}

const char *lex_last_error(void) { return g_last_error.c_str(); }

lex_status lex_config_create(lex_config **out) {
    if (lex_status s = require(out, "output pointer"); s != LEX_OK) return s;
    return guarded([&] { *out = new lex_config(); });
}

lex_status lex_config_open(const char *path, lex_config **out) {
    if (lex_status s = require(out, "output pointer"); s != LEX_OK) return s;
    if (lex_status s = require(path, "path"); s != LEX_OK) return s;
    return guarded([&] {
        auto cfg = lexchain::RunConfig::from_file(path);
        *out = new lex_config{std::move(cfg)};
    });
}

lex_status lex_config_set(lex_config *cfg, const char *key, const char *value) {
    if (lex_status s = require(cfg, "config"); s != LEX_OK) return s;
    if (lex_status s = require(key, "key"); s != LEX_OK) return s;
    if (lex_status s = require(value, "value"); s != LEX_OK) return s;
    return guarded([&] { cfg->cfg.set(key, value); });
}

const char *lex_config_get(const lex_config *cfg, const char *key) {
    if (!cfg || !key || !cfg->cfg.has(key)) return nullptr;
    thread_local std::string value;
    value = cfg->cfg.get(key);
    return value.c_str();
}

void lex_config_free(lex_config *cfg) { delete cfg; }

lex_status lex_gen_data(const lex_config *cfg, const char *out_dir, int force) {
    if (lex_status s = require(cfg, "config"); s != LEX_OK) return s;
    if (lex_status s = require(out_dir, "out_dir"); s != LEX_OK) return s;
    return guarded([&] { lexchain::op_gen_data(cfg->cfg, out_dir, force != 0); });
}

lex_status lex_train(const lex_config *cfg, const char *data_dir, const char *out_dir,
                     int force) {
    if (lex_status s = require(cfg, "config"); s != LEX_OK) return s;
    if (lex_status s = require(data_dir, "data_dir"); s != LEX_OK) return s;
    if (lex_status s = require(out_dir, "out_dir"); s != LEX_OK) return s;
    return guarded([&] { lexchain::op_train(cfg->cfg, data_dir, out_dir, force != 0); });
}

lex_status lex_eval(const lex_config *cfg, const char *model_dir, const char *data_path,
                    int gold_intermediates, const char *out_dir, int force) {
    if (lex_status s = require(model_dir, "model_dir"); s != LEX_OK) return s;
    if (lex_status s = require(data_path, "data_path"); s != LEX_OK) return s;
    if (lex_status s = require(out_dir, "out_dir"); s != LEX_OK) return s;
    return guarded([&] {
        lexchain::RunConfig fallback;
        lexchain::op_eval(cfg ? cfg->cfg : fallback, model_dir, data_path,
                          gold_intermediates != 0, out_dir, force != 0);
    });
}

lex_status lex_predict(const lex_config *cfg, const char *model_dir,
                       const char *case_file, const char *out_dir, int force) {
    if (lex_status s = require(model_dir, "model_dir"); s != LEX_OK) return s;
    if (lex_status s = require(case_file, "case_file"); s != LEX_OK) return s;
    if (lex_status s = require(out_dir, "out_dir"); s != LEX_OK) return s;
    return guarded([&] {
        lexchain::RunConfig fallback;
        lexchain::op_predict(cfg ? cfg->cfg : fallback, model_dir, case_file, out_dir,
                             force != 0);
    });
}

lex_status lex_ablate(const lex_config *cfg, const char *data_dir, const char *out_dir,
                      int force) {
    if (lex_status s = require(cfg, "config"); s != LEX_OK) return s;
    if (lex_status s = require(data_dir, "data_dir"); s != LEX_OK) return s;
    if (lex_status s = require(out_dir, "out_dir"); s != LEX_OK) return s;
    return guarded([&] { lexchain::op_ablate(cfg->cfg, data_dir, out_dir, force != 0); });
}

lex_status lex_report(const char *const *run_dirs, size_t n_dirs, const char *out_dir,
                      int force) {
    if (lex_status s = require(run_dirs, "run_dirs"); s != LEX_OK) return s;
    if (lex_status s = require(out_dir, "out_dir"); s != LEX_OK) return s;
    return guarded([&] {
        std::vector<std::string> dirs;
        dirs.reserve(n_dirs);
        for (size_t i = 0; i < n_dirs; ++i) {
            if (!run_dirs[i]) throw lexchain::ConfigError("null run dir");
            dirs.emplace_back(run_dirs[i]);
        }
        lexchain::op_report(dirs, out_dir, force != 0);
    });
}

} // extern "C"
