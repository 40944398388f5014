#pragma once

#include <unordered_set>
#include <vector>

#include "core/serialize.hpp"
#include "model/params.hpp"

namespace omnivl {

// AdamW with decoupled weight decay. Moments and step counts are kept per
// parameter and advance only when a step actually touched the parameter, so
// temporal-attention state never moves on image batches. Decay applies to
// matrices only (biases, norms and the temperature are exempt).
class AdamW {
public:
    explicit AdamW(std::vector<Parameter*> params, double beta1 = 0.9, double beta2 = 0.999,
                   double eps = 1e-8, double weight_decay = 0.05);

    void zero_grad();
    void step(double lr, const std::unordered_set<Node*>& touched);

    void save(ArrayStore& st) const;
    void load(const ArrayStore& st);

private:
    struct Slot {
        Parameter* p;
        Tensor m, v;
        i64 t = 0;
    };
    std::vector<Slot> slots_;
    double beta1_, beta2_, eps_, wd_;
};

}  // namespace omnivl
