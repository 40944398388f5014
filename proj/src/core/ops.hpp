#pragma once

#include <vector>

#include "core/tape.hpp"

// Differentiable ops. Forward math and gradient accumulation both run
// through the kernels layer; these functions only wire up the graph.
namespace omnivl::ops {

Var constant(Tape& t, Tensor v);

Var add(Tape& t, Var a, Var b);            // same shape
Var sub(Tape& t, Var a, Var b);            // same shape
Var mul(Tape& t, Var a, Var b);            // same shape
Var add_bias(Tape& t, Var x, Var b);       // x [..,C] + b [C]
Var add_const(Tape& t, Var x, Tensor c);   // x + c, c is not a graph node
Var scale(Tape& t, Var x, double alpha);
Var scale_rows(Tape& t, Var x, std::vector<double> w);  // y[r,:] = w[r]*x[r,:]
Var mul_scalar(Tape& t, Var x, Var s);     // s has 1 element
Var exp_op(Tape& t, Var x);

Var matmul2d(Tape& t, Var a, Var b);       // [m,k] x [k,n]
Var bmm(Tape& t, Var a, Var b);            // [g,m,k] x [g,k,n]
Var bmm_nt(Tape& t, Var a, Var b);         // [g,m,k] x [g,n,k]^T

Var reshape(Tape& t, Var x, std::vector<i64> shape);
Var swap_mid(Tape& t, Var x);              // [g,a,b,c] -> [g,b,a,c]

Var gelu(Tape& t, Var x);
Var softmax_lastdim(Tape& t, Var x);
Var logsumexp_lastdim(Tape& t, Var x);
Var layernorm(Tape& t, Var x, Var gamma, Var beta, double eps = 1e-6);
Var l2normalize(Tape& t, Var x, double eps = 1e-12);

Var gather_rows(Tape& t, Var x, std::vector<i64> idx);              // rows of [R,C] view
Var scatter_rows(Tape& t, Var x, std::vector<i64> idx, i64 rout);   // out[idx[i],:] += x[i,:]
Var concat_rows(Tape& t, Var a, Var b);
Var embedding(Tape& t, Var table, const std::vector<i64>& ids);

Var gather_elements(Tape& t, Var x, std::vector<i64> flat_idx);     // -> [K]
Var weighted_sum(Tape& t, Var x, std::vector<double> w);            // -> scalar
Var sum_all(Tape& t, Var x);
Var mean_all(Tape& t, Var x);

// mean over rows with per-row weight w (already normalized by the caller):
// loss = sum_r w[r] * (logsumexp(logits[r,:]) - logits[r, targets[r]])
Var masked_ce(Tape& t, Var logits, std::vector<i64> targets, std::vector<double> w);

// x [..,Din] * W [Din,Dout] + b
Var linear(Tape& t, Var x, Var w, Var b);

}  // namespace omnivl::ops
