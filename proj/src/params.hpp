#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "tensor.hpp"

namespace lexchain {

// Every model weight lives here, addressable by a stable path string such
// as "enc.0.attn.wq". Gradient checks and checkpoints key off these paths.
class ParamStore {
public:
    struct Entry {
        std::string path;
        Mat value;
    };

    int add(const std::string &path, int rows, int cols);
    int find(const std::string &path) const; // -1 when absent
    int find_or_throw(const std::string &path) const;

    int count() const { return static_cast<int>(entries_.size()); }
    size_t scalar_count() const;

    Mat &value(int id) { return entries_[static_cast<size_t>(id)].value; }
    const Mat &value(int id) const { return entries_[static_cast<size_t>(id)].value; }
    const std::string &path(int id) const { return entries_[static_cast<size_t>(id)].path; }

    const std::vector<Entry> &entries() const { return entries_; }
    std::vector<Entry> &entries() { return entries_; }

private:
    std::vector<Entry> entries_;
    std::unordered_map<std::string, int> index_;
};

// Gradient (or optimizer moment) storage aligned with a ParamStore.
struct GradAccum {
    std::vector<Mat> g;

    explicit GradAccum(const ParamStore &store) {
        g.reserve(store.entries().size());
        for (const auto &e : store.entries()) g.emplace_back(e.value.rows, e.value.cols);
    }

    void set_zero() {
        for (auto &m : g) m.set_zero();
    }

    // this += other * scale
    void add_scaled(const GradAccum &other, double scale) {
        for (size_t i = 0; i < g.size(); ++i) {
            const auto &src = other.g[i].a;
            auto &dst = g[i].a;
            for (size_t j = 0; j < dst.size(); ++j) dst[j] += scale * src[j];
        }
    }
};

} // namespace lexchain
