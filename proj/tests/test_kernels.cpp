#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "core/kernels.hpp"
#include "test_support.hpp"

using namespace omnivl;
using testsup::bitwise_equal;
using testsup::random_tensor;

namespace k = kernels;

TEST_CASE("serial and parallel kernels are bit-identical") {
    Rng rng(11);
    const i64 g = 6, m = 33, kk = 21, n = 29;
    Tensor a = random_tensor({g, m, kk}, rng);
    Tensor b = random_tensor({g, kk, n}, rng);
    Tensor bt = random_tensor({g, n, kk}, rng);
    Tensor at = random_tensor({g, kk, m}, rng);

    Tensor c1({g, m, n}), c2({g, m, n});
    k::ref::mm_nn(a.ptr(), b.ptr(), c1.ptr(), g, m, kk, n, false);
    k::omp::mm_nn(a.ptr(), b.ptr(), c2.ptr(), g, m, kk, n, false);
    CHECK(bitwise_equal(c1, c2));

    k::ref::mm_nt(a.ptr(), bt.ptr(), c1.ptr(), g, m, kk, n, true);
    k::omp::mm_nt(a.ptr(), bt.ptr(), c2.ptr(), g, m, kk, n, true);
    CHECK(bitwise_equal(c1, c2));

    k::ref::mm_tn(at.ptr(), b.ptr(), c1.ptr(), g, m, kk, n, false);
    k::omp::mm_tn(at.ptr(), b.ptr(), c2.ptr(), g, m, kk, n, false);
    CHECK(bitwise_equal(c1, c2));

    const i64 r = 57, c = 31;
    Tensor x = random_tensor({r, c}, rng);
    Tensor y1({r, c}), y2({r, c});
    k::ref::softmax_rows(x.ptr(), y1.ptr(), r, c);
    k::omp::softmax_rows(x.ptr(), y2.ptr(), r, c);
    CHECK(bitwise_equal(y1, y2));

    Tensor gamma = random_tensor({c}, rng), beta = random_tensor({c}, rng);
    Tensor mean1({r}), rstd1({r}), mean2({r}), rstd2({r});
    k::ref::layernorm_fwd(x.ptr(), gamma.ptr(), beta.ptr(), y1.ptr(), mean1.ptr(), rstd1.ptr(), r,
                          c, 1e-6);
    k::omp::layernorm_fwd(x.ptr(), gamma.ptr(), beta.ptr(), y2.ptr(), mean2.ptr(), rstd2.ptr(), r,
                          c, 1e-6);
    CHECK(bitwise_equal(y1, y2));
    CHECK(bitwise_equal(rstd1, rstd2));

    k::ref::gelu_fwd(x.ptr(), y1.ptr(), x.numel());
    k::omp::gelu_fwd(x.ptr(), y2.ptr(), x.numel());
    CHECK(bitwise_equal(y1, y2));

    // backend dispatch produces the same numbers either way
    k::set_backend(k::Backend::serial);
    Tensor s1({g, m, n});
    k::mm_nn(a.ptr(), b.ptr(), s1.ptr(), g, m, kk, n, false);
    k::set_backend(k::Backend::parallel);
    Tensor s2({g, m, n});
    k::mm_nn(a.ptr(), b.ptr(), s2.ptr(), g, m, kk, n, false);
    CHECK(bitwise_equal(s1, s2));
}

TEST_CASE("matmul against hand-computed values") {
    // [1 2; 3 4] x [5 6; 7 8] = [19 22; 43 50]
    Tensor a({2, 2}, {1, 2, 3, 4});
    Tensor b({2, 2}, {5, 6, 7, 8});
    Tensor c({2, 2});
    k::mm_nn(a.ptr(), b.ptr(), c.ptr(), 1, 2, 2, 2, false);
    CHECK(c.data[0] == doctest::Approx(19));
    CHECK(c.data[1] == doctest::Approx(22));
    CHECK(c.data[2] == doctest::Approx(43));
    CHECK(c.data[3] == doctest::Approx(50));
}

TEST_CASE("softmax rows sum to one and handle large values") {
    Tensor x({2, 3}, {1000.0, 1000.0, 1000.0, -1e30, 0.0, 0.0});
    Tensor y({2, 3});
    k::softmax_rows(x.ptr(), y.ptr(), 2, 3);
    CHECK(y.data[0] == doctest::Approx(1.0 / 3));
    CHECK(y.data[3] == 0.0);  // exactly: exp(-1e30 - 0) underflows
    CHECK(y.data[4] == doctest::Approx(0.5));
}

TEST_CASE("adamw matches a scalar reference implementation") {
    double p = 1.0, g = 0.3, m = 0.0, v = 0.0;
    k::adamw(&p, &g, &m, &v, 1, 1, 0.1, 0.9, 0.999, 1e-8, 0.05);
    // by hand: m=0.03, v=9e-5*... bias-corrected mh=0.3, vh=0.09
    const double mh = 0.03 / (1 - 0.9);
    const double vh = (0.001 * 0.09) / (1 - 0.999);
    const double expect = 1.0 - 0.1 * (mh / (std::sqrt(vh) + 1e-8) + 0.05 * 1.0);
    CHECK(p == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("lerp_toward closed form") {
    double mom = 0.0, live = 1.0;
    for (int i = 0; i < 10; ++i) k::lerp_toward(&mom, &live, 1, 0.9);
    CHECK(std::abs((1.0 - mom) - std::pow(0.9, 10)) < 1e-12);
}

TEST_CASE("scatter_add accumulates duplicates deterministically") {
    Tensor src({3, 2}, {1, 2, 3, 4, 5, 6});
    std::vector<i64> idx = {0, 0, 1};
    Tensor dst({2, 2});
    k::scatter_add_rows(src.ptr(), idx.data(), dst.ptr(), 3, 2);
    CHECK(dst.data[0] == 4);
    CHECK(dst.data[1] == 6);
    CHECK(dst.data[2] == 5);
    CHECK(dst.data[3] == 6);
}
