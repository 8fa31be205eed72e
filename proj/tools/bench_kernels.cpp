#include <chrono>
#include <cstddef>
#include <cstdio>
#include <cstring>
#include <functional>
#include <string>
#include <vector>

#include "tttnn/kernels.hpp"
#include "tttnn/rng.hpp"

namespace {

using Clock = std::chrono::steady_clock;

double time_best_of(int reps, const std::function<void()>& fn) {
    double best = 1e300;
    for (int i = 0; i < reps; ++i) {
        const auto t0 = Clock::now();
        fn();
        const auto t1 = Clock::now();
        best = std::min(best, std::chrono::duration<double>(t1 - t0).count());
    }
    return best;
}

std::vector<double> random_vec(std::size_t n, tttnn::Rng& rng) {
    std::vector<double> v(n);
    for (double& x : v) x = rng.next_normal();
    return v;
}

bool bit_equal(const std::vector<double>& a, const std::vector<double>& b) {
    return a.size() == b.size() &&
           std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

struct Case {
    std::string name;
    double serial_s;
    double parallel_s;
    bool identical;
};

}  // namespace

int main() {
    tttnn::Rng rng(1234);
    std::vector<Case> cases;
    const int reps = 5;

    {
        const std::size_t m = 384, k = 384, n = 384;
        const auto a = random_vec(m * k, rng);
        const auto b = random_vec(k * n, rng);
        std::vector<double> cs(m * n), cp(m * n);
        const double ts = time_best_of(reps, [&] {
            tttnn::kernels::matmul_nn_serial(a.data(), b.data(), cs.data(), m, k, n);
        });
        const double tp = time_best_of(reps, [&] {
            tttnn::kernels::matmul_nn(a.data(), b.data(), cp.data(), m, k, n);
        });
        cases.push_back({"matmul_nn 384^3", ts, tp, bit_equal(cs, cp)});
    }
    {
        const std::size_t m = 384, k = 384, n = 384;
        const auto a = random_vec(m * k, rng);
        const auto b = random_vec(n * k, rng);
        std::vector<double> cs(m * n), cp(m * n);
        const double ts = time_best_of(reps, [&] {
            tttnn::kernels::matmul_nt_serial(a.data(), b.data(), cs.data(), m, k, n);
        });
        const double tp = time_best_of(reps, [&] {
            tttnn::kernels::matmul_nt(a.data(), b.data(), cp.data(), m, k, n);
        });
        cases.push_back({"matmul_nt 384^3", ts, tp, bit_equal(cs, cp)});
    }
    {
        const std::size_t m = 384, k = 384, n = 384;
        const auto a = random_vec(k * m, rng);
        const auto b = random_vec(k * n, rng);
        std::vector<double> cs(m * n), cp(m * n);
        const double ts = time_best_of(reps, [&] {
            tttnn::kernels::matmul_tn_serial(a.data(), b.data(), cs.data(), m, k, n);
        });
        const double tp = time_best_of(reps, [&] {
            tttnn::kernels::matmul_tn(a.data(), b.data(), cp.data(), m, k, n);
        });
        cases.push_back({"matmul_tn 384^3", ts, tp, bit_equal(cs, cp)});
    }
    {
        const std::size_t count = 20000, dim = 256;
        const auto base = random_vec(count * dim, rng);
        const auto q = random_vec(dim, rng);
        std::vector<double> os(count), op(count);
        const double ts = time_best_of(reps, [&] {
            tttnn::kernels::l2sq_many_serial(base.data(), count, dim, q.data(),
                                             os.data());
        });
        const double tp = time_best_of(reps, [&] {
            tttnn::kernels::l2sq_many(base.data(), count, dim, q.data(), op.data());
        });
        cases.push_back({"l2sq_many 20000x256", ts, tp, bit_equal(os, op)});
    }

    std::printf("%-22s %12s %12s %9s  %s\n", "kernel", "serial (s)",
                "openmp (s)", "speedup", "bitwise");
    bool all_identical = true;
    for (const Case& c : cases) {
        std::printf("%-22s %12.6f %12.6f %8.2fx  %s\n", c.name.c_str(),
                    c.serial_s, c.parallel_s, c.serial_s / c.parallel_s,
                    c.identical ? "identical" : "DIFFERS");
        all_identical = all_identical && c.identical;
    }
    if (!all_identical) {
        std::fprintf(stderr, "parallel kernels diverged from serial reference\n");
        return 1;
    }
    return 0;
}
