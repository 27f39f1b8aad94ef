#include "tape.hpp"

#include <cmath>
#include <memory>

#include "errors.hpp"
#include "netmath.hpp"

namespace lexchain {

Mat &Tape::pgrad(int param_id) {
    auto it = param_grads_.find(param_id);
    if (it == param_grads_.end()) {
        const Mat &v = params_.value(param_id);
        it = param_grads_.emplace(param_id, Mat(v.rows, v.cols)).first;
    }
    return it->second;
}

Tape::NodeId Tape::embed(int emb_param, const std::vector<int> &ids) {
    const Mat &E = params_.value(emb_param);
    Mat out(static_cast<int>(ids.size()), E.cols);
    for (size_t t = 0; t < ids.size(); ++t) {
        const double *src = E.row(ids[t]);
        double *dst = out.row(static_cast<int>(t));
        for (int j = 0; j < E.cols; ++j) dst[j] = src[j];
    }
    NodeId n = push(std::move(out));
    backward_steps_.push_back([this, n, emb_param, ids] {
        Mat &ge = pgrad(emb_param);
        const Mat &g = nodes_[static_cast<size_t>(n)].grad;
        for (size_t t = 0; t < ids.size(); ++t) {
            double *dst = ge.row(ids[t]);
            const double *src = g.row(static_cast<int>(t));
            for (int j = 0; j < g.cols; ++j) dst[j] += src[j];
        }
    });
    return n;
}

Tape::NodeId Tape::add_positions(NodeId x, int pos_param) {
    const Mat &P = params_.value(pos_param);
    const Mat &xv = val(x);
    if (xv.rows > P.rows)
        throw ConfigError("sequence length " + std::to_string(xv.rows) +
                          " exceeds positional table " + std::to_string(P.rows));
    Mat out = xv;
    for (int t = 0; t < out.rows; ++t) {
        const double *p = P.row(t);
        double *dst = out.row(t);
        for (int j = 0; j < out.cols; ++j) dst[j] += p[j];
    }
    NodeId n = push(std::move(out));
    backward_steps_.push_back([this, n, x, pos_param] {
        const Mat &g = nodes_[static_cast<size_t>(n)].grad;
        Mat &gx = nodes_[static_cast<size_t>(x)].grad;
        Mat &gp = pgrad(pos_param);
        for (int t = 0; t < g.rows; ++t) {
            const double *src = g.row(t);
            double *dx = gx.row(t);
            double *dp = gp.row(t);
            for (int j = 0; j < g.cols; ++j) {
                dx[j] += src[j];
                dp[j] += src[j];
            }
        }
    });
    return n;
}

Tape::NodeId Tape::linear(NodeId x, int w_param) {
    const Mat &W = params_.value(w_param);
    Mat out;
    matmul(val(x), W, out);
    NodeId n = push(std::move(out));
    backward_steps_.push_back([this, n, x, w_param] {
        const Mat &g = nodes_[static_cast<size_t>(n)].grad;
        const Mat &W = params_.value(w_param);
        matmul_nt_add(g, W, nodes_[static_cast<size_t>(x)].grad);
        matmul_tn_add(nodes_[static_cast<size_t>(x)].val, g, pgrad(w_param));
    });
    return n;
}

Tape::NodeId Tape::add_bias(NodeId x, int b_param) {
    const Mat &b = params_.value(b_param);
    Mat out = val(x);
    for (int t = 0; t < out.rows; ++t) {
        double *dst = out.row(t);
        const double *src = b.row(0);
        for (int j = 0; j < out.cols; ++j) dst[j] += src[j];
    }
    NodeId n = push(std::move(out));
    backward_steps_.push_back([this, n, x, b_param] {
        const Mat &g = nodes_[static_cast<size_t>(n)].grad;
        Mat &gx = nodes_[static_cast<size_t>(x)].grad;
        Mat &gb = pgrad(b_param);
        for (int t = 0; t < g.rows; ++t) {
            const double *src = g.row(t);
            double *dx = gx.row(t);
            for (int j = 0; j < g.cols; ++j) {
                dx[j] += src[j];
                gb.a[static_cast<size_t>(j)] += src[j];
            }
        }
    });
    return n;
}

Tape::NodeId Tape::add(NodeId a, NodeId b) {
    const Mat &av = val(a);
    const Mat &bv = val(b);
    assert(av.same_shape(bv));
    Mat out = av;
    for (size_t i = 0; i < out.a.size(); ++i) out.a[i] += bv.a[i];
    NodeId n = push(std::move(out));
    backward_steps_.push_back([this, n, a, b] {
        const Mat &g = nodes_[static_cast<size_t>(n)].grad;
        Mat &ga = nodes_[static_cast<size_t>(a)].grad;
        Mat &gb = nodes_[static_cast<size_t>(b)].grad;
        for (size_t i = 0; i < g.a.size(); ++i) {
            ga.a[i] += g.a[i];
            gb.a[i] += g.a[i];
        }
    });
    return n;
}

Tape::NodeId Tape::layer_norm(NodeId x, int gain_param, int bias_param) {
    const Mat &xv = val(x);
    const Mat &gain = params_.value(gain_param);
    const Mat &bias = params_.value(bias_param);
    Mat out(xv.rows, xv.cols);
    Mat xhat(xv.rows, xv.cols);
    std::vector<double> inv_std(static_cast<size_t>(xv.rows));
    const int d = xv.cols;
    for (int t = 0; t < xv.rows; ++t) {
        const double *row = xv.row(t);
        double mean = 0.0;
        for (int j = 0; j < d; ++j) mean += row[j];
        mean /= d;
        double var = 0.0;
        for (int j = 0; j < d; ++j) {
            double c = row[j] - mean;
            var += c * c;
        }
        var /= d;
        double is = 1.0 / std::sqrt(var + kLayerNormEps);
        inv_std[static_cast<size_t>(t)] = is;
        double *xh = xhat.row(t);
        double *o = out.row(t);
        for (int j = 0; j < d; ++j) {
            xh[j] = (row[j] - mean) * is;
            o[j] = xh[j] * gain.a[static_cast<size_t>(j)] + bias.a[static_cast<size_t>(j)];
        }
    }
    NodeId n = push(std::move(out));
    // xhat and inv_std are moved into the closure for the backward pass.
    backward_steps_.push_back(
        [this, n, x, gain_param, bias_param, xhat = std::move(xhat),
         inv_std = std::move(inv_std)] {
            const Mat &g = nodes_[static_cast<size_t>(n)].grad;
            Mat &gx = nodes_[static_cast<size_t>(x)].grad;
            Mat &ggain = pgrad(gain_param);
            Mat &gbias = pgrad(bias_param);
            const Mat &gain = params_.value(gain_param);
            const int d = g.cols;
            for (int t = 0; t < g.rows; ++t) {
                const double *grow = g.row(t);
                const double *xh = xhat.row(t);
                double mean_dxhat = 0.0, mean_dxhat_xhat = 0.0;
                for (int j = 0; j < d; ++j) {
                    double dxh = grow[j] * gain.a[static_cast<size_t>(j)];
                    mean_dxhat += dxh;
                    mean_dxhat_xhat += dxh * xh[j];
                    ggain.a[static_cast<size_t>(j)] += grow[j] * xh[j];
                    gbias.a[static_cast<size_t>(j)] += grow[j];
                }
                mean_dxhat /= d;
                mean_dxhat_xhat /= d;
                double is = inv_std[static_cast<size_t>(t)];
                double *dx = gx.row(t);
                for (int j = 0; j < d; ++j) {
                    double dxh = grow[j] * gain.a[static_cast<size_t>(j)];
                    dx[j] += is * (dxh - mean_dxhat - xh[j] * mean_dxhat_xhat);
                }
            }
        });
    return n;
}

Tape::NodeId Tape::gelu(NodeId x) {
    // tanh approximation; smooth everywhere, which keeps finite-difference
    // checks meaningful.
    const Mat &xv = val(x);
    Mat out(xv.rows, xv.cols);
    for (size_t i = 0; i < xv.a.size(); ++i) out.a[i] = gelu_scalar(xv.a[i]);
    NodeId n = push(std::move(out));
    backward_steps_.push_back([this, n, x] {
        constexpr double c = 0.7978845608028654;
        constexpr double a = 0.044715;
        const Mat &g = nodes_[static_cast<size_t>(n)].grad;
        const Mat &xv = nodes_[static_cast<size_t>(x)].val;
        Mat &gx = nodes_[static_cast<size_t>(x)].grad;
        for (size_t i = 0; i < g.a.size(); ++i) {
            double v = xv.a[i];
            double u = c * (v + a * v * v * v);
            double th = std::tanh(u);
            double du = c * (1.0 + 3.0 * a * v * v);
            double deriv = 0.5 * (1.0 + th) + 0.5 * v * (1.0 - th * th) * du;
            gx.a[i] += g.a[i] * deriv;
        }
    });
    return n;
}

Tape::NodeId Tape::concat_rows(const std::vector<NodeId> &parts) {
    int rows = 0;
    int cols = val(parts.at(0)).cols;
    for (NodeId p : parts) rows += val(p).rows;
    Mat out(rows, cols);
    int at = 0;
    for (NodeId p : parts) {
        const Mat &pv = val(p);
        for (int t = 0; t < pv.rows; ++t) {
            const double *src = pv.row(t);
            double *dst = out.row(at + t);
            for (int j = 0; j < cols; ++j) dst[j] = src[j];
        }
        at += pv.rows;
    }
    NodeId n = push(std::move(out));
    backward_steps_.push_back([this, n, parts] {
        const Mat &g = nodes_[static_cast<size_t>(n)].grad;
        int at = 0;
        for (NodeId p : parts) {
            Mat &gp = nodes_[static_cast<size_t>(p)].grad;
            for (int t = 0; t < gp.rows; ++t) {
                const double *src = g.row(at + t);
                double *dst = gp.row(t);
                for (int j = 0; j < g.cols; ++j) dst[j] += src[j];
            }
            at += gp.rows;
        }
    });
    return n;
}

Tape::NodeId Tape::attention(NodeId q, NodeId k, NodeId v, int n_heads,
                             const std::vector<uint8_t> &mask) {
    const Mat &qv = val(q);
    const Mat &kv = val(k);
    const Mat &vv = val(v);
    const int tq = qv.rows, tk = kv.rows, d = qv.cols;
    assert(kv.cols == d && vv.cols == d && vv.rows == tk);
    assert(static_cast<int>(mask.size()) == tq * tk);
    assert(d % n_heads == 0);
    const int dh = d / n_heads;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

    Mat out(tq, d);
    // One softmax matrix per head, saved for the backward pass.
    auto probs = std::make_shared<std::vector<Mat>>();
    probs->reserve(static_cast<size_t>(n_heads));
    for (int h = 0; h < n_heads; ++h) {
        const int off = h * dh;
        Mat P(tq, tk);
        for (int i = 0; i < tq; ++i) {
            const double *qrow = qv.row(i) + off;
            const uint8_t *mrow = mask.data() + static_cast<size_t>(i) * tk;
            double *prow = P.row(i);
            double maxv = -1e300;
            bool any = false;
            for (int j = 0; j < tk; ++j) {
                if (!mrow[j]) continue;
                const double *krow = kv.row(j) + off;
                double s = 0.0;
                for (int t = 0; t < dh; ++t) s += qrow[t] * krow[t];
                s *= scale;
                prow[j] = s;
                if (!any || s > maxv) maxv = s;
                any = true;
            }
            if (!any) continue; // fully masked query: zero row
            double denom = 0.0;
            for (int j = 0; j < tk; ++j) {
                if (!mrow[j]) {
                    prow[j] = 0.0;
                    continue;
                }
                prow[j] = std::exp(prow[j] - maxv);
                denom += prow[j];
            }
            double inv = 1.0 / denom;
            double *orow = out.row(i) + off;
            for (int j = 0; j < tk; ++j) {
                prow[j] *= inv;
                if (prow[j] != 0.0) {
                    const double *vrow = vv.row(j) + off;
                    for (int t = 0; t < dh; ++t) orow[t] += prow[j] * vrow[t];
                }
            }
        }
        probs->push_back(std::move(P));
    }
    NodeId n = push(std::move(out));
    backward_steps_.push_back([this, n, q, k, v, n_heads, dh, scale, probs] {
        const Mat &g = nodes_[static_cast<size_t>(n)].grad;
        const Mat &qv = nodes_[static_cast<size_t>(q)].val;
        const Mat &kv = nodes_[static_cast<size_t>(k)].val;
        const Mat &vv = nodes_[static_cast<size_t>(v)].val;
        Mat &gq = nodes_[static_cast<size_t>(q)].grad;
        Mat &gk = nodes_[static_cast<size_t>(k)].grad;
        Mat &gv = nodes_[static_cast<size_t>(v)].grad;
        const int tq = qv.rows, tk = kv.rows;
        for (int h = 0; h < n_heads; ++h) {
            const int off = h * dh;
            const Mat &P = (*probs)[static_cast<size_t>(h)];
            for (int i = 0; i < tq; ++i) {
                const double *grow = g.row(i) + off;
                const double *prow = P.row(i);
                // dP[j] = g . V_j ; dS = P * (dP - sum_j P[j] dP[j])
                double dot_acc = 0.0;
                std::vector<double> dp(static_cast<size_t>(tk), 0.0);
                for (int j = 0; j < tk; ++j) {
                    if (prow[j] == 0.0) continue;
                    const double *vrow = vv.row(j) + off;
                    double acc = 0.0;
                    for (int t = 0; t < dh; ++t) acc += grow[t] * vrow[t];
                    dp[static_cast<size_t>(j)] = acc;
                    dot_acc += prow[j] * acc;
                    // dV_j += P[i,j] * g_i
                    double *gvrow = gv.row(j) + off;
                    for (int t = 0; t < dh; ++t) gvrow[t] += prow[j] * grow[t];
                }
                const double *qrow = qv.row(i) + off;
                double *gqrow = gq.row(i) + off;
                for (int j = 0; j < tk; ++j) {
                    if (prow[j] == 0.0) continue;
                    double ds = prow[j] * (dp[static_cast<size_t>(j)] - dot_acc) * scale;
                    const double *krow = kv.row(j) + off;
                    double *gkrow = gk.row(j) + off;
                    for (int t = 0; t < dh; ++t) {
                        gqrow[t] += ds * krow[t];
                        gkrow[t] += ds * qrow[t];
                    }
                }
            }
        }
    });
    return n;
}

Tape::NodeId Tape::tied_logits(NodeId x, int emb_param) {
    const Mat &E = params_.value(emb_param);
    Mat out;
    matmul_nt(val(x), E, out);
    NodeId n = push(std::move(out));
    backward_steps_.push_back([this, n, x, emb_param] {
        const Mat &g = nodes_[static_cast<size_t>(n)].grad;
        const Mat &E = params_.value(emb_param);
        matmul_add(g, E, nodes_[static_cast<size_t>(x)].grad);
        matmul_tn_add(g, nodes_[static_cast<size_t>(x)].val, pgrad(emb_param));
    });
    return n;
}

Tape::CrossEntropy Tape::cross_entropy_sum(NodeId logits, const std::vector<int> &targets) {
    const Mat &lv = val(logits);
    assert(static_cast<int>(targets.size()) == lv.rows);
    Mat P(lv.rows, lv.cols);
    CrossEntropy ce;
    ce.logits = logits;
    ce.index = ce_probs_.size();
    for (int t = 0; t < lv.rows; ++t) {
        const double *row = lv.row(t);
        double *prow = P.row(t);
        double maxv = row[0];
        for (int j = 1; j < lv.cols; ++j) maxv = std::max(maxv, row[j]);
        double denom = 0.0;
        for (int j = 0; j < lv.cols; ++j) {
            prow[j] = std::exp(row[j] - maxv);
            denom += prow[j];
        }
        double inv = 1.0 / denom;
        for (int j = 0; j < lv.cols; ++j) prow[j] *= inv;
        int target = targets[static_cast<size_t>(t)];
        if (target >= 0) {
            double logp = row[target] - maxv - std::log(denom);
            ce.sum_nll -= logp;
            ++ce.tokens;
        }
    }
    ce_probs_.push_back(std::move(P));
    ce_targets_.push_back(targets);
    return ce;
}

void Tape::backward(const CrossEntropy &ce, double scale) {
    const Mat &P = ce_probs_[ce.index];
    const std::vector<int> &targets = ce_targets_[ce.index];
    Mat &gl = grad(ce.logits);
    for (int t = 0; t < P.rows; ++t) {
        int target = targets[static_cast<size_t>(t)];
        if (target < 0) continue;
        const double *prow = P.row(t);
        double *grow = gl.row(t);
        for (int j = 0; j < P.cols; ++j) grow[j] += scale * prow[j];
        grow[target] -= scale;
    }
    for (auto it = backward_steps_.rbegin(); it != backward_steps_.rend(); ++it) (*it)();
}

void Tape::flush_param_grads(GradAccum &out, double scale) const {
    for (const auto &[pid, grad] : param_grads_) {
        auto &dst = out.g[static_cast<size_t>(pid)].a;
        for (size_t i = 0; i < dst.size(); ++i) dst[i] += scale * grad.a[i];
    }
}

} // namespace lexchain
