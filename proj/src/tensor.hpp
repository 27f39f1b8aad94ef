#pragma once

#include <cassert>
#include <cstddef>
#include <vector>

namespace lexchain {

// Dense row-major matrix of doubles. Training math runs in 64-bit so the
// finite-difference tolerances in the test suite are meaningful;
// checkpoints round to float32 on disk.
struct Mat {
    int rows = 0;
    int cols = 0;
    std::vector<double> a;

    Mat() = default;
    Mat(int r, int c) : rows(r), cols(c), a(static_cast<size_t>(r) * c, 0.0) {}

    static Mat zeros(int r, int c) { return Mat(r, c); }

    double *row(int i) { return a.data() + static_cast<size_t>(i) * cols; }
    const double *row(int i) const { return a.data() + static_cast<size_t>(i) * cols; }
    double &at(int r, int c) { return a[static_cast<size_t>(r) * cols + c]; }
    double at(int r, int c) const { return a[static_cast<size_t>(r) * cols + c]; }

    size_t count() const { return a.size(); }
    void set_zero() { std::fill(a.begin(), a.end(), 0.0); }
    bool same_shape(const Mat &o) const { return rows == o.rows && cols == o.cols; }
};

// C = A * B
void matmul(const Mat &A, const Mat &B, Mat &C);
// C += A * B
void matmul_add(const Mat &A, const Mat &B, Mat &C);
// C = A * B^T
void matmul_nt(const Mat &A, const Mat &B, Mat &C);
// C += A * B^T
void matmul_nt_add(const Mat &A, const Mat &B, Mat &C);
// C += A^T * B
void matmul_tn_add(const Mat &A, const Mat &B, Mat &C);

bool all_finite(const Mat &m);

} // namespace lexchain
