#include "oracles/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace omnivl::oracles {

namespace {

double dotv(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

}  // namespace

double oracle_univlc(const Mat& v, const Mat& w, const std::vector<long long>& y,
                     const Mat& view_v, const Mat& view_w,
                     const std::vector<long long>& view_y, double tau,
                     bool normalize_positives) {
    const size_t b = v.size();
    const size_t m = view_y.size();
    if (b == 0 || m == 0) throw std::invalid_argument("oracle_univlc: empty inputs");

    double loss = 0.0;
    for (size_t i = 0; i < b; ++i) {
        std::vector<size_t> positives;
        for (size_t k = 0; k < m; ++k)
            if (view_y[k] == y[i]) positives.push_back(k);
        if (positives.empty()) throw std::invalid_argument("oracle_univlc: empty positive set");

        // vision-to-text
        double denom_vt = 0.0;
        for (size_t k = 0; k < m; ++k) denom_vt += std::exp(dotv(v[i], view_w[k]) / tau);
        double term_vt = 0.0;
        for (size_t k : positives)
            term_vt += -std::log(std::exp(dotv(v[i], view_w[k]) / tau) / denom_vt);
        if (normalize_positives) term_vt /= static_cast<double>(positives.size());

        // text-to-vision (with the log, mirroring the v2t form)
        double denom_tv = 0.0;
        for (size_t k = 0; k < m; ++k) denom_tv += std::exp(dotv(w[i], view_v[k]) / tau);
        double term_tv = 0.0;
        for (size_t k : positives)
            term_tv += -std::log(std::exp(dotv(w[i], view_v[k]) / tau) / denom_tv);
        if (normalize_positives) term_tv /= static_cast<double>(positives.size());

        loss += term_vt + term_tv;
    }
    return loss / (2.0 * static_cast<double>(b));
}

std::vector<double> fd_gradient(const std::function<double()>& f, double* x, size_t n,
                                double eps) {
    std::vector<double> g(n);
    for (size_t i = 0; i < n; ++i) {
        const double keep = x[i];
        x[i] = keep + eps;
        const double hi = f();
        x[i] = keep - eps;
        const double lo = f();
        x[i] = keep;
        g[i] = (hi - lo) / (2.0 * eps);
    }
    return g;
}

std::vector<size_t> oracle_rank(size_t n_candidates,
                                const std::function<double(size_t)>& score) {
    std::vector<double> s(n_candidates);
    for (size_t i = 0; i < n_candidates; ++i) s[i] = score(i);
    std::vector<size_t> order(n_candidates);
    std::iota(order.begin(), order.end(), size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&s](size_t a, size_t b) { return s[a] > s[b]; });
    return order;
}

Mat oracle_attention(const Mat& x, const Mat& wq, const std::vector<double>& bq, const Mat& wk,
                     const std::vector<double>& bk, const Mat& wv, const std::vector<double>& bv,
                     const Mat& wo, const std::vector<double>& bo, int heads) {
    const size_t l = x.size();
    const size_t d = x[0].size();
    const size_t dh = d / static_cast<size_t>(heads);

    auto apply = [&](const Mat& m, const std::vector<double>& bias) {
        Mat out(l, std::vector<double>(d, 0.0));
        for (size_t i = 0; i < l; ++i)
            for (size_t j = 0; j < d; ++j) {
                double s = bias[j];
                for (size_t k = 0; k < d; ++k) s += x[i][k] * m[k][j];
                out[i][j] = s;
            }
        return out;
    };
    const Mat q = apply(wq, bq), k = apply(wk, bk), v = apply(wv, bv);

    Mat ctx(l, std::vector<double>(d, 0.0));
    for (int h = 0; h < heads; ++h) {
        const size_t off = static_cast<size_t>(h) * dh;
        for (size_t i = 0; i < l; ++i) {
            std::vector<double> scores(l);
            for (size_t j = 0; j < l; ++j) {
                double s = 0.0;
                for (size_t c = 0; c < dh; ++c) s += q[i][off + c] * k[j][off + c];
                scores[j] = s / std::sqrt(static_cast<double>(dh));
            }
            const double mx = *std::max_element(scores.begin(), scores.end());
            double z = 0.0;
            for (double& s : scores) {
                s = std::exp(s - mx);
                z += s;
            }
            for (size_t j = 0; j < l; ++j)
                for (size_t c = 0; c < dh; ++c) ctx[i][off + c] += scores[j] / z * v[j][off + c];
        }
    }

    Mat out(l, std::vector<double>(d, 0.0));
    for (size_t i = 0; i < l; ++i)
        for (size_t j = 0; j < d; ++j) {
            double s = bo[j];
            for (size_t c = 0; c < d; ++c) s += ctx[i][c] * wo[c][j];
            out[i][j] = s;
        }
    return out;
}

}  // namespace omnivl::oracles
