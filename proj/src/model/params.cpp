#include "model/params.hpp"

#include "core/error.hpp"

namespace omnivl {

void ParameterRegistry::add(Parameter* p) {
    if (by_name_.count(p->name)) throw ConfigError("duplicate parameter name: " + p->name);
    params_.push_back(p);
    by_name_[p->name] = p;
}

Parameter* ParameterRegistry::find(const std::string& name) const {
    auto it = by_name_.find(name);
    return it == by_name_.end() ? nullptr : it->second;
}

std::vector<Parameter*> ParameterRegistry::group(const std::string& prefix) const {
    std::vector<Parameter*> out;
    for (Parameter* p : params_)
        if (p->name.rfind(prefix, 0) == 0) out.push_back(p);
    return out;
}

i64 ParameterRegistry::total_elements() const {
    i64 n = 0;
    for (const Parameter* p : params_) n += p->value().numel();
    return n;
}

uint64_t ParameterRegistry::value_hash() const {
    uint64_t h = 1469598103934665603ull;
    auto mix = [&h](const void* data, size_t len) {
        const auto* b = static_cast<const unsigned char*>(data);
        for (size_t i = 0; i < len; ++i) h = (h ^ b[i]) * 1099511628211ull;
    };
    for (const Parameter* p : params_) {
        mix(p->name.data(), p->name.size());
        mix(p->value().data.data(), p->value().data.size() * sizeof(double));
    }
    return h;
}

void ParameterRegistry::save_values(ArrayStore& st, const std::string& ns) const {
    for (const Parameter* p : params_) st.put(ns + p->name, p->value());
}

void ParameterRegistry::load_values(const ArrayStore& st, const std::string& ns) {
    for (Parameter* p : params_) {
        const Tensor& t = st.get(ns + p->name);
        if (!t.same_shape(p->value()))
            throw ShapeError("checkpoint shape mismatch for " + p->name + ": stored " +
                             t.shape_str() + " vs model " + p->value().shape_str());
        p->value() = t;
    }
}

Tensor gaussian_tensor(std::vector<i64> shape, double stddev, Rng& rng) {
    Tensor t(std::move(shape));
    for (double& v : t.data) v = rng.gaussian(0.0, stddev);
    return t;
}

}  // namespace omnivl
