#include "tttnn/kernels.hpp"

#include <cstring>

namespace tttnn::kernels {

namespace {

// Work below this many multiply-adds is not worth a parallel region.
constexpr std::size_t kParallelGrain = 1 << 15;

inline void nn_row(const double* a, const double* b, double* c,
                   std::size_t i, std::size_t k, std::size_t n) {
    double* ci = c + i * n;
    std::memset(ci, 0, n * sizeof(double));
    const double* ai = a + i * k;
    for (std::size_t l = 0; l < k; ++l) {
        double ail = ai[l];
        const double* bl = b + l * n;
        for (std::size_t j = 0; j < n; ++j) {
            ci[j] += ail * bl[j];
        }
    }
}

inline void nt_row(const double* a, const double* b, double* c,
                   std::size_t i, std::size_t k, std::size_t n) {
    const double* ai = a + i * k;
    double* ci = c + i * n;
    for (std::size_t j = 0; j < n; ++j) {
        const double* bj = b + j * k;
        double acc = 0.0;
        for (std::size_t l = 0; l < k; ++l) {
            acc += ai[l] * bj[l];
        }
        ci[j] = acc;
    }
}

inline void tn_row(const double* a, const double* b, double* c,
                   std::size_t i, std::size_t k, std::size_t n, std::size_t m) {
    double* ci = c + i * n;
    std::memset(ci, 0, n * sizeof(double));
    for (std::size_t l = 0; l < k; ++l) {
        double ali = a[l * m + i];
        const double* bl = b + l * n;
        for (std::size_t j = 0; j < n; ++j) {
            ci[j] += ali * bl[j];
        }
    }
}

}  // namespace

void matmul_nn_serial(const double* a, const double* b, double* c,
                      std::size_t m, std::size_t k, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        nn_row(a, b, c, i, k, n);
    }
}

void matmul_nn(const double* a, const double* b, double* c,
               std::size_t m, std::size_t k, std::size_t n) {
    if (m * k * n < kParallelGrain) {
        matmul_nn_serial(a, b, c, m, k, n);
        return;
    }
#pragma omp parallel for schedule(static)
    for (std::size_t i = 0; i < m; ++i) {
        nn_row(a, b, c, i, k, n);
    }
}

void matmul_nt_serial(const double* a, const double* b, double* c,
                      std::size_t m, std::size_t k, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        nt_row(a, b, c, i, k, n);
    }
}

void matmul_nt(const double* a, const double* b, double* c,
               std::size_t m, std::size_t k, std::size_t n) {
    if (m * k * n < kParallelGrain) {
        matmul_nt_serial(a, b, c, m, k, n);
        return;
    }
#pragma omp parallel for schedule(static)
    for (std::size_t i = 0; i < m; ++i) {
        nt_row(a, b, c, i, k, n);
    }
}

void matmul_tn_serial(const double* a, const double* b, double* c,
                      std::size_t m, std::size_t k, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        tn_row(a, b, c, i, k, n, m);
    }
}

void matmul_tn(const double* a, const double* b, double* c,
               std::size_t m, std::size_t k, std::size_t n) {
    if (m * k * n < kParallelGrain) {
        matmul_tn_serial(a, b, c, m, k, n);
        return;
    }
#pragma omp parallel for schedule(static)
    for (std::size_t i = 0; i < m; ++i) {
        tn_row(a, b, c, i, k, n, m);
    }
}

void l2sq_many_serial(const double* base, std::size_t count, std::size_t dim,
                      const double* q, double* out) {
    for (std::size_t i = 0; i < count; ++i) {
        const double* row = base + i * dim;
        double acc = 0.0;
        for (std::size_t d = 0; d < dim; ++d) {
            double diff = row[d] - q[d];
            acc += diff * diff;
        }
        out[i] = acc;
    }
}

void l2sq_many(const double* base, std::size_t count, std::size_t dim,
               const double* q, double* out) {
    if (count * dim < kParallelGrain) {
        l2sq_many_serial(base, count, dim, q, out);
        return;
    }
#pragma omp parallel for schedule(static)
    for (std::size_t i = 0; i < count; ++i) {
        const double* row = base + i * dim;
        double acc = 0.0;
        for (std::size_t d = 0; d < dim; ++d) {
            double diff = row[d] - q[d];
            acc += diff * diff;
        }
        out[i] = acc;
    }
}

}  // namespace tttnn::kernels
