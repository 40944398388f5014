#include "model/omnivl.hpp"

#include <cmath>

#include "core/kernels.hpp"

namespace omnivl {

OmniVLModel::OmniVLModel(const ModelConfig& c, uint64_t seed, double tau_init)
    : cfg(c),
      ve(c, subseed_rng(seed, "init-ve")),
      te(c, subseed_rng(seed, "init-te")),
      ad(c, subseed_rng(seed, "init-ad")),
      gd(c, subseed_rng(seed, "init-gd")) {
    cfg.validate();
    Rng rng = subseed_rng(seed, "init-heads");
    proj_v.init("proj_v", cfg.dim, cfg.proj_dim, cfg.init_std, rng);
    proj_t.init("proj_t", cfg.dim, cfg.proj_dim, cfg.init_std, rng);
    log_tau.init("tau.log_tau", Tensor::scalar(std::log(tau_init)));

    ve.collect(registry);
    te.collect(registry);
    ad.collect(registry);
    gd.collect(registry);
    proj_v.collect(registry);
    proj_t.collect(registry);
    registry.add(&log_tau);
}

MomentumEncoders::MomentumEncoders(const ModelConfig& c, uint64_t seed)
    : ve(c, subseed_rng(seed, "init-ve")), te(c, subseed_rng(seed, "init-te")) {
    Rng rng = subseed_rng(seed, "init-heads");
    proj_v.init("proj_v", c.dim, c.proj_dim, c.init_std, rng);
    proj_t.init("proj_t", c.dim, c.proj_dim, c.init_std, rng);
    ve.collect(registry);
    te.collect(registry);
    proj_v.collect(registry);
    proj_t.collect(registry);
    for (Parameter* p : registry.all()) p->node.needs_grad = false;
}

void MomentumEncoders::sync_from(const ParameterRegistry& live) {
    for (Parameter* p : registry.all()) {
        Parameter* src = live.find(p->name);
        if (src == nullptr) throw ConfigError("momentum sync: no live parameter " + p->name);
        p->value() = src->value();
    }
}

void MomentumEncoders::step_toward(const ParameterRegistry& live) {
    momentum_step(live, registry, coeff);
}

void momentum_step(const ParameterRegistry& live, ParameterRegistry& mom, double coeff) {
    for (Parameter* p : mom.all()) {
        Parameter* src = live.find(p->name);
        if (src == nullptr) throw ConfigError("momentum step: no live parameter " + p->name);
        if (!src->value().same_shape(p->value()))
            throw ShapeError("momentum step: shape mismatch for parameter " + p->name);
        kernels::lerp_toward(p->value().ptr(), src->value().ptr(), p->value().numel(), coeff);
    }
}

}  // namespace omnivl
