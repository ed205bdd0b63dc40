#pragma once

#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "kt/errors.hpp"

namespace kt {

// Dense double-precision array. Rank is 1 or 2 in practice; a rank-1 tensor
// behaves as a single row.
struct Tensor {
    std::vector<int> shape;
    std::vector<double> data;

    Tensor() = default;
    Tensor(std::vector<int> s, std::vector<double> d) : shape(std::move(s)), data(std::move(d)) {}

    static Tensor zeros(std::vector<int> s) {
        int64_t n = 1;
        for (int d : s) n *= d;
        return Tensor(std::move(s), std::vector<double>(static_cast<size_t>(n), 0.0));
    }

    static Tensor zeros(int r, int c) { return zeros(std::vector<int>{r, c}); }

    static Tensor scalar(double v) { return Tensor({1, 1}, {v}); }

    static Tensor row(std::vector<double> v) {
        int n = static_cast<int>(v.size());
        return Tensor({1, n}, std::move(v));
    }

    static Tensor column(std::vector<double> v) {
        int n = static_cast<int>(v.size());
        return Tensor({n, 1}, std::move(v));
    }

    int64_t size() const { return static_cast<int64_t>(data.size()); }

    int rows() const { return shape.size() == 2 ? shape[0] : 1; }
    int cols() const { return shape.empty() ? 0 : shape.back(); }

    double& at(int r, int c) { return data[static_cast<size_t>(r) * cols() + c]; }
    double at(int r, int c) const { return data[static_cast<size_t>(r) * cols() + c]; }

    bool same_shape(const Tensor& o) const { return rows() == o.rows() && cols() == o.cols(); }

    bool is_scalar() const { return size() == 1; }

    std::string shape_str() const {
        std::ostringstream os;
        os << "[";
        for (size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
        os << "]";
        return os.str();
    }
};

inline void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (!a.same_shape(b))
        throw ShapeError(std::string(op) + ": shape mismatch " + a.shape_str() + " vs " + b.shape_str());
}

// Accumulating matrix kernels; C is never cleared here.
// C[i,j] += sum_k A[i,k] * B[k,j]
inline void mm_nn_acc(const double* a, const double* b, double* c, int n, int k, int m) {
    for (int i = 0; i < n; ++i) {
        const double* arow = a + static_cast<size_t>(i) * k;
        double* crow = c + static_cast<size_t>(i) * m;
        for (int p = 0; p < k; ++p) {
            const double av = arow[p];
            if (av == 0.0) continue;
            const double* brow = b + static_cast<size_t>(p) * m;
            for (int j = 0; j < m; ++j) crow[j] += av * brow[j];
        }
    }
}

// C[i,j] += sum_k A[i,k] * B[j,k]
inline void mm_nt_acc(const double* a, const double* b, double* c, int n, int k, int m) {
    for (int i = 0; i < n; ++i) {
        const double* arow = a + static_cast<size_t>(i) * k;
        double* crow = c + static_cast<size_t>(i) * m;
        for (int j = 0; j < m; ++j) {
            const double* brow = b + static_cast<size_t>(j) * k;
            double acc = 0.0;
            for (int p = 0; p < k; ++p) acc += arow[p] * brow[p];
            crow[j] += acc;
        }
    }
}

// C[i,j] += sum_k A[k,i] * B[k,j]
inline void mm_tn_acc(const double* a, const double* b, double* c, int n, int k, int m) {
    for (int p = 0; p < k; ++p) {
        const double* arow = a + static_cast<size_t>(p) * n;
        const double* brow = b + static_cast<size_t>(p) * m;
        for (int i = 0; i < n; ++i) {
            const double av = arow[i];
            if (av == 0.0) continue;
            double* crow = c + static_cast<size_t>(i) * m;
            for (int j = 0; j < m; ++j) crow[j] += av * brow[j];
        }
    }
}

}  // namespace kt
