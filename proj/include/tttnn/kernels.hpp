#pragma once

#include <cstddef>

namespace tttnn::kernels {

// Dense row-major matrix kernels. Every kernel has a serial reference
// implementation and an OpenMP variant that partitions independent output
// rows across threads. Per output element the accumulation order is fixed,
// so serial and parallel results are bit-identical for identical inputs;
// the test suite and bench_kernels both rely on that.

// C[m x n] = A[m x k] * B[k x n]
void matmul_nn_serial(const double* a, const double* b, double* c,
                      std::size_t m, std::size_t k, std::size_t n);
void matmul_nn(const double* a, const double* b, double* c,
               std::size_t m, std::size_t k, std::size_t n);

// C[m x n] = A[m x k] * B[n x k]^T
void matmul_nt_serial(const double* a, const double* b, double* c,
                      std::size_t m, std::size_t k, std::size_t n);
void matmul_nt(const double* a, const double* b, double* c,
               std::size_t m, std::size_t k, std::size_t n);

// C[m x n] = A[k x m]^T * B[k x n]
void matmul_tn_serial(const double* a, const double* b, double* c,
                      std::size_t m, std::size_t k, std::size_t n);
void matmul_tn(const double* a, const double* b, double* c,
               std::size_t m, std::size_t k, std::size_t n);

// out[i] = squared L2 distance between base row i and q, 64-bit accumulation.
void l2sq_many_serial(const double* base, std::size_t count, std::size_t dim,
                      const double* q, double* out);
void l2sq_many(const double* base, std::size_t count, std::size_t dim,
               const double* q, double* out);

}  // namespace tttnn::kernels
