#pragma once

// Finite-difference gradient oracle shared by the unit and acceptance
// suites. Independent of the backward pass: it only re-runs the forward
// loss with perturbed parameters.

#include <cmath>
#include <string>
#include <vector>

#include "fid.hpp"
#include "tape.hpp"
#include "threads.hpp"

namespace lexchain::testing {

inline double forward_mean_nll(const Model &model,
                               const std::vector<SeqExample> &batch) {
    double sum = 0.0;
    long tokens = 0;
    for (const auto &ex : batch) {
        Tape tape(model.params);
        Tape::CrossEntropy ce = example_forward(tape, model, ex);
        sum += ce.sum_nll;
        tokens += ce.tokens;
    }
    return sum / static_cast<double>(tokens);
}

struct GradCheckResult {
    double max_rel_err = 0.0; // |a-f| / max(|a|,|f|) over pairs above the floor
    double max_excess = 0.0;  // |a-f| / (atol + rtol*max(|a|,|f|)); <= 1 passes
    std::string worst_path;
    size_t scalars_checked = 0;
    size_t failures = 0;
};

// Central differences with step eps against the analytic gradient of the
// batch-mean NLL. Pass criterion per scalar: |a - f| <= atol + rtol *
// max(|a|, |f|). The absolute floor absorbs the O(eps^2) truncation of the
// difference quotient itself on near-zero gradients; it sits orders of
// magnitude below the error any dropped backward term would produce.
inline GradCheckResult finite_difference_check(const Model &model,
                                               const std::vector<SeqExample> &batch,
                                               double eps, double rtol, double atol,
                                               int n_threads) {
    GradAccum analytic(model.params);
    (void)loss_and_grads(model, batch, analytic, n_threads);

    const int n_params = model.params.count();
    std::vector<GradCheckResult> partial(static_cast<size_t>(n_threads) <
                                                 static_cast<size_t>(n_params)
                                             ? static_cast<size_t>(n_threads)
                                             : static_cast<size_t>(n_params));
    parallel_slices(static_cast<size_t>(n_params), n_threads,
                    [&](int slice, size_t begin, size_t end) {
                        Model local = model; // private copy to perturb
                        GradCheckResult &r = partial[static_cast<size_t>(slice)];
                        for (size_t p = begin; p < end; ++p) {
                            Mat &value = local.params.value(static_cast<int>(p));
                            const Mat &g = analytic.g[p];
                            for (size_t i = 0; i < value.a.size(); ++i) {
                                double saved = value.a[i];
                                value.a[i] = saved + eps;
                                double up = forward_mean_nll(local, batch);
                                value.a[i] = saved - eps;
                                double down = forward_mean_nll(local, batch);
                                value.a[i] = saved;
                                double numeric = (up - down) / (2.0 * eps);
                                double a = g.a[i];
                                double diff = std::fabs(a - numeric);
                                double denom = std::max(std::fabs(a), std::fabs(numeric));
                                double excess = diff / (atol + rtol * denom);
                                ++r.scalars_checked;
                                if (excess > 1.0) ++r.failures;
                                if (denom > 1e-6)
                                    r.max_rel_err = std::max(r.max_rel_err, diff / denom);
                                if (excess > r.max_excess) {
                                    r.max_excess = excess;
                                    r.worst_path =
                                        model.params.path(static_cast<int>(p));
                                }
                            }
                        }
                    });
    GradCheckResult out;
    for (const auto &r : partial) {
        out.scalars_checked += r.scalars_checked;
        out.failures += r.failures;
        out.max_rel_err = std::max(out.max_rel_err, r.max_rel_err);
        if (r.max_excess > out.max_excess) {
            out.max_excess = r.max_excess;
            out.worst_path = r.worst_path;
        }
    }
    return out;
}

} // namespace lexchain::testing
