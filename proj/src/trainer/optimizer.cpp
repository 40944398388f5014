#include "trainer/optimizer.hpp"

#include "core/kernels.hpp"

namespace omnivl {

AdamW::AdamW(std::vector<Parameter*> params, double beta1, double beta2, double eps,
             double weight_decay)
    : beta1_(beta1), beta2_(beta2), eps_(eps), wd_(weight_decay) {
    slots_.reserve(params.size());
    for (Parameter* p : params)
        slots_.push_back({p, Tensor::zeros(p->value().shape), Tensor::zeros(p->value().shape), 0});
}

void AdamW::zero_grad() {
    for (auto& s : slots_) s.p->zero_grad();
}

void AdamW::step(double lr, const std::unordered_set<Node*>& touched) {
    for (auto& s : slots_) {
        if (!touched.count(&s.p->node)) continue;
        ++s.t;
        const double wd = s.p->value().rank() >= 2 ? wd_ : 0.0;
        kernels::adamw(s.p->value().ptr(), s.p->grad().ptr(), s.m.ptr(), s.v.ptr(),
                       s.p->value().numel(), s.t, lr, beta1_, beta2_, eps_, wd);
    }
}

void AdamW::save(ArrayStore& st) const {
    for (const auto& s : slots_) {
        st.put("opt.m." + s.p->name, s.m);
        st.put("opt.v." + s.p->name, s.v);
        st.put_scalar("opt.t." + s.p->name, static_cast<double>(s.t));
    }
}

void AdamW::load(const ArrayStore& st) {
    for (auto& s : slots_) {
        s.m = st.get("opt.m." + s.p->name);
        s.v = st.get("opt.v." + s.p->name);
        s.t = static_cast<i64>(st.get_scalar("opt.t." + s.p->name));
    }
}

}  // namespace omnivl
