#pragma once

#include <cstddef>
#include <string>

namespace opencap::kern {

// Dense double-precision kernels used by the training inner loops. A scalar
// reference lane always exists; an AVX2 lane is compiled on x86-64 and picked
// at runtime when the CPU supports it. The lanes are equivalence-tested
// against each other; reductions may differ by rounding only.
struct Ops {
    // sum_i x[i]*y[i]
    double (*dot)(const double* x, const double* y, std::size_t n);
    // y[i] += a*x[i]
    void (*axpy)(double a, const double* x, double* y, std::size_t n);
    // y = W x, W row-major rows x cols
    void (*matvec)(const double* w, const double* x, double* y, std::size_t rows, std::size_t cols);
    // out = W^T d (accumulates the column combination), W row-major rows x cols
    void (*matvec_t)(const double* w, const double* d, double* out, std::size_t rows, std::size_t cols);
    // G += d x^T, G row-major rows x cols
    void (*outer_acc)(const double* d, const double* x, double* g, std::size_t rows, std::size_t cols);
    // Adam with bias correction; b1p/b2p are beta1^t/beta2^t for the current step
    void (*adam_update)(double* p, const double* g, double* m, double* v, std::size_t n,
                        double lr, double b1, double b2, double eps, double b1p, double b2p);
};

enum class Lane { scalar, avx2 };

const Ops& scalar_ops();

// Active lane: best supported lane, overridable via OPENCAP_KERNEL=scalar|avx2|auto
// (env read once) or force_lane(). Falls back to scalar when AVX2 is absent.
const Ops& ops();
Lane active_lane();
std::string lane_name(Lane lane);
bool avx2_available();
// returns false if the requested lane is unavailable (lane left unchanged)
bool force_lane(Lane lane);

} // namespace opencap::kern
