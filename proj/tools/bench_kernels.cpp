// Times the serial reference kernels against the OpenMP variants on
// transformer-sized workloads and prints the speedups. The two backends are
// bit-identical; this target only cares about wall clock.

#include <chrono>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "core/kernels.hpp"
#include "core/rng.hpp"
#include "core/tensor.hpp"

using namespace omnivl;
using Clock = std::chrono::steady_clock;

namespace {

double time_ms(const std::function<void()>& fn, int iters) {
    fn();  // warmup
    const auto t0 = Clock::now();
    for (int i = 0; i < iters; ++i) fn();
    const auto t1 = Clock::now();
    return std::chrono::duration<double, std::milli>(t1 - t0).count() / iters;
}

struct Case {
    std::string name;
    std::function<void()> serial;
    std::function<void()> parallel;
    int iters;
};

}  // namespace

int main() {
    Rng rng(7);
    auto fill = [&rng](Tensor& t) {
        for (double& v : t.data) v = rng.gaussian();
    };

    const i64 m = 512, k = 256, n = 512;
    Tensor a({m, k}), b({k, n}), c({m, n});
    fill(a);
    fill(b);

    const i64 g = 64, l = 64, dh = 64;
    Tensor qa({g, l, dh}), kb({g, l, dh}), sc({g, l, l});
    fill(qa);
    fill(kb);

    const i64 rows = 8192, cols = 256;
    Tensor x({rows, cols}), y({rows, cols}), mean({rows}), rstd({rows});
    Tensor gamma({cols}), beta({cols});
    fill(x);
    for (double& v : gamma.data) v = 1.0;

    std::vector<Case> cases = {
        {"matmul 512x256x512",
         [&] { kernels::ref::mm_nn(a.ptr(), b.ptr(), c.ptr(), 1, m, k, n, false); },
         [&] { kernels::omp::mm_nn(a.ptr(), b.ptr(), c.ptr(), 1, m, k, n, false); }, 10},
        {"attention scores 64x64x64",
         [&] { kernels::ref::mm_nt(qa.ptr(), kb.ptr(), sc.ptr(), g, l, dh, l, false); },
         [&] { kernels::omp::mm_nt(qa.ptr(), kb.ptr(), sc.ptr(), g, l, dh, l, false); }, 10},
        {"softmax 4096x64",
         [&] { kernels::ref::softmax_rows(sc.ptr(), sc.ptr(), g * l, l); },
         [&] { kernels::omp::softmax_rows(sc.ptr(), sc.ptr(), g * l, l); }, 20},
        {"layernorm 8192x256",
         [&] {
             kernels::ref::layernorm_fwd(x.ptr(), gamma.ptr(), beta.ptr(), y.ptr(), mean.ptr(),
                                         rstd.ptr(), rows, cols, 1e-6);
         },
         [&] {
             kernels::omp::layernorm_fwd(x.ptr(), gamma.ptr(), beta.ptr(), y.ptr(), mean.ptr(),
                                         rstd.ptr(), rows, cols, 1e-6);
         },
         20},
        {"gelu 2M",
         [&] { kernels::ref::gelu_fwd(x.ptr(), y.ptr(), x.numel()); },
         [&] { kernels::omp::gelu_fwd(x.ptr(), y.ptr(), x.numel()); }, 20},
    };

    std::printf("%-28s %12s %12s %9s\n", "kernel", "serial (ms)", "openmp (ms)", "speedup");
    for (const auto& cs : cases) {
        const double ts = time_ms(cs.serial, cs.iters);
        const double tp = time_ms(cs.parallel, cs.iters);
        std::printf("%-28s %12.3f %12.3f %8.2fx\n", cs.name.c_str(), ts, tp, ts / tp);
    }
    return 0;
}
