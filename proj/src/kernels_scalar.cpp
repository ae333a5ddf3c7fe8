#include "opencap/kernels.hpp"

#include <cmath>

namespace opencap::kern {

namespace {

double dot_scalar(const double* x, const double* y, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += x[i] * y[i];
    return acc;
}

void axpy_scalar(double a, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

void matvec_scalar(const double* w, const double* x, double* y, std::size_t rows, std::size_t cols) {
    for (std::size_t r = 0; r < rows; ++r) y[r] = dot_scalar(w + r * cols, x, cols);
}

void matvec_t_scalar(const double* w, const double* d, double* out, std::size_t rows, std::size_t cols) {
    for (std::size_t c = 0; c < cols; ++c) out[c] = 0.0;
    for (std::size_t r = 0; r < rows; ++r) axpy_scalar(d[r], w + r * cols, out, cols);
}

void outer_acc_scalar(const double* d, const double* x, double* g, std::size_t rows, std::size_t cols) {
    for (std::size_t r = 0; r < rows; ++r) axpy_scalar(d[r], x, g + r * cols, cols);
}

void adam_update_scalar(double* p, const double* g, double* m, double* v, std::size_t n,
                        double lr, double b1, double b2, double eps, double b1p, double b2p) {
    const double mc = 1.0 / (1.0 - b1p);
    const double vc = 1.0 / (1.0 - b2p);
    for (std::size_t i = 0; i < n; ++i) {
        m[i] = b1 * m[i] + (1.0 - b1) * g[i];
        v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
        p[i] -= lr * (m[i] * mc) / (std::sqrt(v[i] * vc) + eps);
    }
}

} // namespace

const Ops& scalar_ops() {
    static const Ops table{dot_scalar,      axpy_scalar,      matvec_scalar,
                           matvec_t_scalar, outer_acc_scalar, adam_update_scalar};
    return table;
}

} // namespace opencap::kern
