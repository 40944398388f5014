#pragma once

#include <map>
#include <string>
#include <vector>

#include "core/rng.hpp"
#include "core/serialize.hpp"
#include "core/tape.hpp"

namespace omnivl {

// A named trainable tensor. The node's value/grad buffers live here and
// survive tape teardown; use() registers the leaf with the tape so the
// optimizer can see which parameters a step actually touched.
struct Parameter {
    std::string name;
    Node node;

    Parameter() { node.needs_grad = true; }

    Tensor& value() { return node.val; }
    const Tensor& value() const { return node.val; }
    Tensor& grad() { return node.grad; }

    void init(std::string n, Tensor v, bool trainable = true) {
        name = std::move(n);
        node.val = std::move(v);
        node.grad = Tensor::zeros(node.val.shape);
        node.grad_ready = true;
        node.needs_grad = trainable;
    }

    Var use(Tape& t) {
        t.note_param(&node);
        return &node;
    }

    void zero_grad() {
        for (double& g : node.grad.data) g = 0.0;
    }
};

// Flat registry of every parameter, grouped by dotted name prefix
// (ve., te., ad., gd., proj_v., proj_t., tau.).
class ParameterRegistry {
public:
    void add(Parameter* p);
    Parameter* find(const std::string& name) const;
    const std::vector<Parameter*>& all() const { return params_; }
    std::vector<Parameter*> group(const std::string& prefix) const;

    i64 total_elements() const;
    uint64_t value_hash() const;  // order- and bit-exact fingerprint

    void save_values(ArrayStore& st, const std::string& ns) const;
    void load_values(const ArrayStore& st, const std::string& ns);

private:
    std::vector<Parameter*> params_;
    std::map<std::string, Parameter*> by_name_;
};

// Init helpers.
Tensor gaussian_tensor(std::vector<i64> shape, double stddev, Rng& rng);

}  // namespace omnivl
