#pragma once

#include <functional>
#include <vector>

// Brute-force reference implementations used only by tests. Everything here
// is written against plain std containers in float64 and shares no code with
// the production paths it checks.
namespace omnivl::oracles {

using Mat = std::vector<std::vector<double>>;

struct OracleReport {
    std::string name;
    double max_abs = 0.0;
    double max_rel = 0.0;
    double tolerance = 0.0;
    bool pass() const { return max_abs <= tolerance; }
};

// Direct double-loop transcription of the unified contrastive objective:
// per anchor, sum -log softmax over the full scoring view for every
// positive (same label), both directions, averaged with the 1/2 factor.
// normalize_positives divides each anchor's positive sum by |P(i)|.
double oracle_univlc(const Mat& v, const Mat& w, const std::vector<long long>& y,
                     const Mat& view_v, const Mat& view_w,
                     const std::vector<long long>& view_y, double tau,
                     bool normalize_positives);

// Central finite differences of f with respect to the n doubles at x.
std::vector<double> fd_gradient(const std::function<double()>& f, double* x, size_t n,
                                double eps = 1e-5);

// Exhaustive ranking: score every candidate, stable sort descending.
std::vector<size_t> oracle_rank(size_t n_candidates,
                                const std::function<double(size_t)>& score);

// Plain multi-head self-attention reference over one sequence.
// x: [L][D]; weight matrices are [D][D], biases [D].
Mat oracle_attention(const Mat& x, const Mat& wq, const std::vector<double>& bq, const Mat& wk,
                     const std::vector<double>& bk, const Mat& wv, const std::vector<double>& bv,
                     const Mat& wo, const std::vector<double>& bo, int heads);

}  // namespace omnivl::oracles
