#pragma once

#include <cmath>
#include <string>

#include "core/ops.hpp"
#include "model/params.hpp"

namespace omnivl {

struct LinearParams {
    Parameter w, b;

    void init(const std::string& prefix, i64 din, i64 dout, double stddev, Rng& rng,
              bool zero_init = false) {
        w.init(prefix + ".w", zero_init ? Tensor::zeros({din, dout})
                                        : gaussian_tensor({din, dout}, stddev, rng));
        b.init(prefix + ".b", Tensor::zeros({dout}));
    }

    void collect(ParameterRegistry& reg) {
        reg.add(&w);
        reg.add(&b);
    }

    Var apply(Tape& t, Var x) { return ops::linear(t, x, w.use(t), b.use(t)); }
};

struct NormParams {
    Parameter gamma, beta;

    void init(const std::string& prefix, i64 d) {
        gamma.init(prefix + ".gamma", Tensor::full({d}, 1.0));
        beta.init(prefix + ".beta", Tensor::zeros({d}));
    }

    void collect(ParameterRegistry& reg) {
        reg.add(&gamma);
        reg.add(&beta);
    }

    Var apply(Tape& t, Var x) { return ops::layernorm(t, x, gamma.use(t), beta.use(t)); }
};

struct AttnParams {
    LinearParams q, k, v, o;

    // zero_out zeroes the output projection; used by temporal attention and
    // the decoders' cross attention so a fresh model reduces to the plain
    // image/text path.
    void init(const std::string& prefix, i64 d, double stddev, Rng& rng, bool zero_out = false) {
        q.init(prefix + ".q", d, d, stddev, rng);
        k.init(prefix + ".k", d, d, stddev, rng);
        v.init(prefix + ".v", d, d, stddev, rng);
        o.init(prefix + ".o", d, d, stddev, rng, zero_out);
    }

    void collect(ParameterRegistry& reg) {
        q.collect(reg);
        k.collect(reg);
        v.collect(reg);
        o.collect(reg);
    }
};

struct FfnParams {
    LinearParams fc1, fc2;

    void init(const std::string& prefix, i64 d, i64 hidden, double stddev, Rng& rng) {
        fc1.init(prefix + ".fc1", d, hidden, stddev, rng);
        fc2.init(prefix + ".fc2", hidden, d, stddev, rng);
    }

    void collect(ParameterRegistry& reg) {
        fc1.collect(reg);
        fc2.collect(reg);
    }

    Var apply(Tape& t, Var x) { return fc2.apply(t, ops::gelu(t, fc1.apply(t, x))); }
};

// Scaled dot-product multi-head attention over grouped sequences.
// q_in [G,Lq,D], kv_in [G,Lm,D]; add_mask, when present, is a [G*H,Lq,Lm]
// additive score mask (0 or a large negative).
Var mha(Tape& t, Var q_in, Var kv_in, AttnParams& p, int heads, const Tensor* add_mask);

// Additive mask builders. Masked scores get -1e30, which underflows to an
// exact zero attention weight, so masked keys cannot leak content.
Tensor causal_mask(i64 groups, int heads, i64 len);
// key_valid: [G, Lm] 0/1 per group
Tensor key_mask(const std::vector<std::vector<double>>& key_valid, int heads, i64 lq);

}  // namespace omnivl
