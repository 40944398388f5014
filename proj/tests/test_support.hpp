#pragma once

#include <cmath>
#include <filesystem>
#include <string>

#include "core/rng.hpp"
#include "core/tensor.hpp"

namespace omnivl::testsup {

inline Tensor random_tensor(std::vector<i64> shape, Rng& rng, double stddev = 1.0) {
    Tensor t(std::move(shape));
    for (double& v : t.data) v = rng.gaussian(0.0, stddev);
    return t;
}

inline double max_abs_diff(const Tensor& a, const Tensor& b) {
    double m = 0.0;
    for (i64 i = 0; i < a.numel(); ++i) m = std::max(m, std::abs(a.data[i] - b.data[i]));
    return m;
}

inline bool bitwise_equal(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) return false;
    for (i64 i = 0; i < a.numel(); ++i)
        if (a.data[i] != b.data[i]) return false;
    return true;
}

// |a-f| <= tol*max(|a|,|f|) + floor
inline bool rel_close(double a, double f, double tol, double floor = 1e-8) {
    return std::abs(a - f) <= tol * std::max(std::abs(a), std::abs(f)) + floor;
}

// unique scratch dir per test binary run
inline std::string scratch_dir(const std::string& name) {
    auto p = std::filesystem::temp_directory_path() / ("omnivl_test_" + name);
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p.string();
}

}  // namespace omnivl::testsup
