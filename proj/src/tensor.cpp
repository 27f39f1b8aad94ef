#include "tensor.hpp"

#include <cmath>

namespace lexchain {

// ikj loops keep the inner stride unit-length on both B and C, which is
// enough for the compiler to vectorize with FMA.

void matmul(const Mat &A, const Mat &B, Mat &C) {
    assert(A.cols == B.rows);
    C = Mat(A.rows, B.cols);
    matmul_add(A, B, C);
}

void matmul_add(const Mat &A, const Mat &B, Mat &C) {
    assert(A.cols == B.rows && C.rows == A.rows && C.cols == B.cols);
    const int n = B.cols;
    for (int i = 0; i < A.rows; ++i) {
        const double *arow = A.row(i);
        double *crow = C.row(i);
        for (int k = 0; k < A.cols; ++k) {
            const double aik = arow[k];
            if (aik == 0.0) continue;
            const double *brow = B.row(k);
            for (int j = 0; j < n; ++j) crow[j] += aik * brow[j];
        }
    }
}

void matmul_nt(const Mat &A, const Mat &B, Mat &C) {
    assert(A.cols == B.cols);
    C = Mat(A.rows, B.rows);
    matmul_nt_add(A, B, C);
}

void matmul_nt_add(const Mat &A, const Mat &B, Mat &C) {
    assert(A.cols == B.cols && C.rows == A.rows && C.cols == B.rows);
    const int k = A.cols;
    for (int i = 0; i < A.rows; ++i) {
        const double *arow = A.row(i);
        double *crow = C.row(i);
        for (int j = 0; j < B.rows; ++j) {
            const double *brow = B.row(j);
            double acc = 0.0;
            for (int t = 0; t < k; ++t) acc += arow[t] * brow[t];
            crow[j] += acc;
        }
    }
}

void matmul_tn_add(const Mat &A, const Mat &B, Mat &C) {
    assert(A.rows == B.rows && C.rows == A.cols && C.cols == B.cols);
    const int n = B.cols;
    for (int i = 0; i < A.rows; ++i) {
        const double *arow = A.row(i);
        const double *brow = B.row(i);
        for (int k = 0; k < A.cols; ++k) {
            const double aik = arow[k];
            if (aik == 0.0) continue;
            double *crow = C.row(k);
            for (int j = 0; j < n; ++j) crow[j] += aik * brow[j];
        }
    }
}

bool all_finite(const Mat &m) {
    for (double v : m.a)
        if (!std::isfinite(v)) return false;
    return true;
}

} // namespace lexchain
