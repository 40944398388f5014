#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "core/ops.hpp"
#include "model/blocks.hpp"
#include "oracles/oracles.hpp"
#include "test_support.hpp"

using namespace omnivl;
using testsup::random_tensor;
using testsup::rel_close;

namespace {

// finite-difference check of d(sum of weights*output)/d(param) for a graph
// builder that consumes one parameter
void check_gradient(Parameter& p, const std::function<Var(Tape&, Var)>& build,
                    double tol = 1e-6) {
    Rng rng(99);
    auto scalar_loss = [&](Tape& t, Var out) {
        std::vector<double> w(static_cast<size_t>(out->val.numel()));
        Rng wr(5);
        for (auto& x : w) x = wr.gaussian();
        return ops::weighted_sum(t, out, std::move(w));
    };
    Tape t;
    Var loss = scalar_loss(t, build(t, p.use(t)));
    p.zero_grad();
    t.backward(loss);
    Tensor analytic = p.grad();

    auto f = [&]() {
        Tape t2;
        return scalar_loss(t2, build(t2, p.use(t2)))->val.data[0];
    };
    auto fd = oracles::fd_gradient(f, p.value().ptr(), static_cast<size_t>(p.value().numel()));
    for (i64 i = 0; i < analytic.numel(); ++i) {
        INFO("coordinate ", i);
        CHECK(rel_close(analytic.data[i], fd[static_cast<size_t>(i)], tol));
    }
}

Parameter make_param(std::vector<i64> shape, uint64_t seed) {
    Rng rng(seed);
    Parameter p;
    p.init("p", random_tensor(std::move(shape), rng, 0.5));
    return p;
}

}  // namespace

TEST_CASE("fd_gradient sanity") {
    double x = 3.0;
    auto f = [&x]() { return x * x; };
    auto g = oracles::fd_gradient(f, &x, 1);
    CHECK(std::abs(g[0] - 6.0) < 1e-8);

    double y[2] = {2.0, -1.0};
    auto lin = [&y]() { return 3.0 * y[0] - 7.0 * y[1]; };
    auto gl = oracles::fd_gradient(lin, y, 2);
    CHECK(gl[0] == doctest::Approx(3.0).epsilon(1e-10));
    CHECK(gl[1] == doctest::Approx(-7.0).epsilon(1e-10));
}

TEST_CASE("elementwise op gradients") {
    Parameter p = make_param({3, 4}, 1);
    check_gradient(p, [](Tape& t, Var x) { return ops::gelu(t, x); });
    check_gradient(p, [](Tape& t, Var x) { return ops::scale(t, x, -2.5); });
    check_gradient(p, [](Tape& t, Var x) { return ops::mul(t, x, x); });
    check_gradient(p, [](Tape& t, Var x) { return ops::exp_op(t, ops::scale(t, x, 0.3)); });
    check_gradient(p, [](Tape& t, Var x) {
        return ops::scale_rows(t, x, {0.5, -1.0, 2.0});
    });
}

TEST_CASE("matmul gradients") {
    Parameter p = make_param({4, 3}, 2);
    Rng rng(3);
    const Tensor other = random_tensor({3, 5}, rng);
    check_gradient(p, [&other](Tape& t, Var x) {
        return ops::matmul2d(t, x, ops::constant(t, other));
    });
    const Tensor left = random_tensor({6, 4}, rng);
    check_gradient(p, [&left](Tape& t, Var x) {
        return ops::matmul2d(t, ops::constant(t, left), x);
    });
    Parameter p3 = make_param({2, 3, 4}, 4);
    const Tensor b3 = random_tensor({2, 4, 5}, rng);
    check_gradient(p3, [&b3](Tape& t, Var x) { return ops::bmm(t, x, ops::constant(t, b3)); });
    const Tensor b3t = random_tensor({2, 5, 4}, rng);
    check_gradient(p3, [&b3t](Tape& t, Var x) { return ops::bmm_nt(t, x, ops::constant(t, b3t)); });
}

TEST_CASE("softmax, logsumexp, layernorm, l2norm gradients") {
    Parameter p = make_param({5, 7}, 5);
    check_gradient(p, [](Tape& t, Var x) { return ops::softmax_lastdim(t, x); });
    check_gradient(p, [](Tape& t, Var x) { return ops::logsumexp_lastdim(t, x); });
    check_gradient(p, [](Tape& t, Var x) { return ops::l2normalize(t, x); });

    Parameter gamma = make_param({7}, 6);
    Parameter beta = make_param({7}, 7);
    check_gradient(p, [&](Tape& t, Var x) {
        return ops::layernorm(t, x, gamma.use(t), beta.use(t));
    });
    Rng rng(8);
    const Tensor xin = random_tensor({5, 7}, rng);
    check_gradient(gamma, [&](Tape& t, Var g) {
        return ops::layernorm(t, ops::constant(t, xin), g, beta.use(t));
    });
    check_gradient(beta, [&](Tape& t, Var b) {
        return ops::layernorm(t, ops::constant(t, xin), gamma.use(t), b);
    });
}

TEST_CASE("gather, scatter, concat, reshape, swap_mid gradients") {
    Parameter p = make_param({6, 3}, 9);
    check_gradient(p, [](Tape& t, Var x) {
        return ops::gather_rows(t, x, {0, 2, 2, 5, 1});
    });
    check_gradient(p, [](Tape& t, Var x) {
        return ops::scatter_rows(t, x, {1, 0, 1, 3, 2, 2}, 4);
    });
    Rng rng(10);
    const Tensor other = random_tensor({2, 3}, rng);
    check_gradient(p, [&other](Tape& t, Var x) {
        return ops::concat_rows(t, x, ops::constant(t, other));
    });
    Parameter p4 = make_param({2, 3, 4, 2}, 11);
    check_gradient(p4, [](Tape& t, Var x) { return ops::swap_mid(t, x); });
    check_gradient(p, [](Tape& t, Var x) {
        return ops::reshape(t, x, {3, 6});
    });
    check_gradient(p, [](Tape& t, Var x) {
        return ops::gather_elements(t, x, {0, 5, 5, 17});
    });
}

TEST_CASE("masked cross entropy gradient and values") {
    Parameter p = make_param({4, 6}, 12);
    std::vector<i64> targets = {1, 0, 5, 2};
    std::vector<double> w = {0.25, 0.25, 0.0, 0.5};
    {
        Tape t;
        Var loss = ops::masked_ce(t, p.use(t), targets, w);
        p.zero_grad();
        t.backward(loss);
        Tensor analytic = p.grad();
        auto f = [&]() {
            Tape t2;
            return ops::masked_ce(t2, p.use(t2), targets, w)->val.data[0];
        };
        auto fd = oracles::fd_gradient(f, p.value().ptr(), static_cast<size_t>(p.value().numel()));
        for (i64 i = 0; i < analytic.numel(); ++i)
            CHECK(rel_close(analytic.data[i], fd[static_cast<size_t>(i)], 1e-6));
    }
    // uniform logits over V classes -> ln V
    Tape t;
    Var logits = ops::constant(t, Tensor::zeros({2, 8}));
    Var loss = ops::masked_ce(t, logits, {3, 0}, {0.5, 0.5});
    CHECK(loss->val.data[0] == doctest::Approx(std::log(8.0)).epsilon(1e-12));
}

TEST_CASE("mha matches the naive attention oracle") {
    Rng rng(21);
    const i64 l = 5, d = 8;
    const int heads = 2;
    AttnParams ap;
    ap.init("a", d, 0.3, rng);
    const Tensor x = random_tensor({1, l, d}, rng);

    Tape t;
    Var out = mha(t, ops::constant(t, x), ops::constant(t, x), ap, heads, nullptr);

    auto to_mat = [](const Tensor& m) {
        oracles::Mat out(static_cast<size_t>(m.dim(0)),
                         std::vector<double>(static_cast<size_t>(m.dim(1))));
        for (i64 i = 0; i < m.dim(0); ++i)
            for (i64 j = 0; j < m.dim(1); ++j)
                out[static_cast<size_t>(i)][static_cast<size_t>(j)] = m.data[i * m.dim(1) + j];
        return out;
    };
    auto to_vec = [](const Tensor& m) { return m.data; };
    oracles::Mat xm(static_cast<size_t>(l), std::vector<double>(static_cast<size_t>(d)));
    for (i64 i = 0; i < l; ++i)
        for (i64 j = 0; j < d; ++j) xm[static_cast<size_t>(i)][static_cast<size_t>(j)] = x.data[i * d + j];

    auto ref = oracles::oracle_attention(xm, to_mat(ap.q.w.value()), to_vec(ap.q.b.value()),
                                         to_mat(ap.k.w.value()), to_vec(ap.k.b.value()),
                                         to_mat(ap.v.w.value()), to_vec(ap.v.b.value()),
                                         to_mat(ap.o.w.value()), to_vec(ap.o.b.value()), heads);
    for (i64 i = 0; i < l; ++i)
        for (i64 j = 0; j < d; ++j)
            CHECK(std::abs(out->val.data[i * d + j] -
                           ref[static_cast<size_t>(i)][static_cast<size_t>(j)]) < 1e-10);
}

TEST_CASE("gradients flow through a full attention block") {
    Rng rng(31);
    AttnParams ap;
    const i64 l = 3, d = 4;
    ap.init("a", d, 0.4, rng);
    const Tensor x = random_tensor({2, l, d}, rng);
    check_gradient(ap.q.w, [&](Tape& t, Var) {
        Var xin = ops::constant(t, x);
        return mha(t, xin, xin, ap, 2, nullptr);
    });
    check_gradient(ap.o.b, [&](Tape& t, Var) {
        Var xin = ops::constant(t, x);
        return mha(t, xin, xin, ap, 2, nullptr);
    });
}
