#pragma once

#include <cstdint>

// Compute kernels. Every nontrivial loop in the project goes through this
// API. Two implementations share one body (kernels_body.inc): `ref` is
// plain serial code, `omp` adds OpenMP pragmas. Parallelism is only ever
// over independent output elements and reductions stay serial, so both
// backends produce bit-identical results; tests assert that.
namespace omnivl::kernels {

using i64 = int64_t;

enum class Backend { serial, parallel };

Backend backend();
void set_backend(Backend b);

#define OMNIVL_KERNELS_DECL(ns)                                                            \
    namespace ns {                                                                         \
    /* batched matmul, a[g,m,k] x b[g,k,n] -> c[g,m,n]; acc adds into c */                 \
    void mm_nn(const double* a, const double* b, double* c, i64 g, i64 m, i64 k, i64 n,    \
               bool acc);                                                                  \
    /* a[g,m,k] x b[g,n,k]^T -> c[g,m,n] */                                                \
    void mm_nt(const double* a, const double* b, double* c, i64 g, i64 m, i64 k, i64 n,    \
               bool acc);                                                                  \
    /* a[g,k,m]^T x b[g,k,n] -> c[g,m,n] */                                                \
    void mm_tn(const double* a, const double* b, double* c, i64 g, i64 m, i64 k, i64 n,    \
               bool acc);                                                                  \
    void add(const double* a, const double* b, double* c, i64 n, bool acc);                \
    void sub(const double* a, const double* b, double* c, i64 n, bool acc);                \
    void mul(const double* a, const double* b, double* c, i64 n, bool acc);                \
    void scale(const double* x, double alpha, double* y, i64 n, bool acc);                 \
    void axpy(double alpha, const double* x, double* y, i64 n);                            \
    void copy(const double* x, double* y, i64 n);                                          \
    void add_bias_rows(const double* x, const double* bias, double* y, i64 r, i64 c);      \
    void sum_rows(const double* g, double* out, i64 r, i64 c);                             \
    void scale_rows(const double* x, const double* w, double* y, i64 r, i64 c, bool acc);  \
    void gelu_fwd(const double* x, double* y, i64 n);                                      \
    void gelu_bwd(const double* x, const double* gy, double* gx, i64 n);                   \
    void softmax_rows(const double* x, double* y, i64 r, i64 c);                           \
    void softmax_rows_bwd(const double* y, const double* gy, double* gx, i64 r, i64 c);    \
    void logsumexp_rows(const double* x, double* out, i64 r, i64 c);                       \
    void layernorm_fwd(const double* x, const double* gamma, const double* beta,           \
                       double* y, double* mean, double* rstd, i64 r, i64 c, double eps);   \
    void layernorm_bwd(const double* x, const double* gamma, const double* mean,           \
                       const double* rstd, const double* gy, double* gx, double* ggamma,   \
                       double* gbeta, i64 r, i64 c);                                       \
    void l2norm_rows_fwd(const double* x, double* y, double* inv_norm, i64 r, i64 c,       \
                         double eps);                                                      \
    void l2norm_rows_bwd(const double* y, const double* inv_norm, const double* gy,        \
                         double* gx, i64 r, i64 c);                                        \
    void gather_rows(const double* x, const i64* idx, double* y, i64 rout, i64 c);         \
    /* order-sensitive (duplicate indices): serial in both backends */                     \
    void scatter_add_rows(const double* gy, const i64* idx, double* gx, i64 rin, i64 c);   \
    /* y[g][b][a][c] = x[g][a][b][c]; swaps the middle two axes of a 4d view */            \
    void swap_mid_axes(const double* x, double* y, i64 g, i64 a, i64 b, i64 c, bool acc);  \
    /* per-row cross entropy: loss[r] = w[r]*(logsumexp(x[r,:]) - x[r,tgt[r]]) */          \
    void ce_rows_fwd(const double* x, const i64* tgt, const double* w, double* loss,       \
                     i64 r, i64 c);                                                        \
    void ce_rows_bwd(const double* x, const i64* tgt, const double* w, double go,          \
                     double* gx, i64 r, i64 c);                                            \
    void adamw(double* p, const double* g, double* m, double* v, i64 n, i64 t, double lr,  \
               double beta1, double beta2, double eps, double wd);                         \
    void lerp_toward(double* mom, const double* live, i64 n, double coeff);                \
    bool all_finite(const double* x, i64 n);                                               \
    double dot(const double* a, const double* b, i64 n);                                   \
    double sum(const double* x, i64 n);                                                    \
    }

OMNIVL_KERNELS_DECL(ref)
OMNIVL_KERNELS_DECL(omp)
#undef OMNIVL_KERNELS_DECL

// Dispatchers: route to the active backend.
#define OMNIVL_DISPATCH(fn, ...) \
    (backend() == Backend::parallel ? omp::fn(__VA_ARGS__) : ref::fn(__VA_ARGS__))

inline void mm_nn(const double* a, const double* b, double* c, i64 g, i64 m, i64 k, i64 n,
                  bool acc) { OMNIVL_DISPATCH(mm_nn, a, b, c, g, m, k, n, acc); }
inline void mm_nt(const double* a, const double* b, double* c, i64 g, i64 m, i64 k, i64 n,
                  bool acc) { OMNIVL_DISPATCH(mm_nt, a, b, c, g, m, k, n, acc); }
inline void mm_tn(const double* a, const double* b, double* c, i64 g, i64 m, i64 k, i64 n,
                  bool acc) { OMNIVL_DISPATCH(mm_tn, a, b, c, g, m, k, n, acc); }
inline void add(const double* a, const double* b, double* c, i64 n, bool acc) {
    OMNIVL_DISPATCH(add, a, b, c, n, acc);
}
inline void sub(const double* a, const double* b, double* c, i64 n, bool acc) {
    OMNIVL_DISPATCH(sub, a, b, c, n, acc);
}
inline void mul(const double* a, const double* b, double* c, i64 n, bool acc) {
    OMNIVL_DISPATCH(mul, a, b, c, n, acc);
}
inline void scale(const double* x, double alpha, double* y, i64 n, bool acc) {
    OMNIVL_DISPATCH(scale, x, alpha, y, n, acc);
}
inline void axpy(double alpha, const double* x, double* y, i64 n) {
    OMNIVL_DISPATCH(axpy, alpha, x, y, n);
}
inline void copy(const double* x, double* y, i64 n) { OMNIVL_DISPATCH(copy, x, y, n); }
inline void add_bias_rows(const double* x, const double* bias, double* y, i64 r, i64 c) {
    OMNIVL_DISPATCH(add_bias_rows, x, bias, y, r, c);
}
inline void sum_rows(const double* g, double* out, i64 r, i64 c) {
    OMNIVL_DISPATCH(sum_rows, g, out, r, c);
}
inline void scale_rows(const double* x, const double* w, double* y, i64 r, i64 c, bool acc) {
    OMNIVL_DISPATCH(scale_rows, x, w, y, r, c, acc);
}
inline void gelu_fwd(const double* x, double* y, i64 n) { OMNIVL_DISPATCH(gelu_fwd, x, y, n); }
inline void gelu_bwd(const double* x, const double* gy, double* gx, i64 n) {
    OMNIVL_DISPATCH(gelu_bwd, x, gy, gx, n);
}
inline void softmax_rows(const double* x, double* y, i64 r, i64 c) {
    OMNIVL_DISPATCH(softmax_rows, x, y, r, c);
}
inline void softmax_rows_bwd(const double* y, const double* gy, double* gx, i64 r, i64 c) {
    OMNIVL_DISPATCH(softmax_rows_bwd, y, gy, gx, r, c);
}
inline void logsumexp_rows(const double* x, double* out, i64 r, i64 c) {
    OMNIVL_DISPATCH(logsumexp_rows, x, out, r, c);
}
inline void layernorm_fwd(const double* x, const double* gamma, const double* beta, double* y,
                          double* mean, double* rstd, i64 r, i64 c, double eps) {
    OMNIVL_DISPATCH(layernorm_fwd, x, gamma, beta, y, mean, rstd, r, c, eps);
}
inline void layernorm_bwd(const double* x, const double* gamma, const double* mean,
                          const double* rstd, const double* gy, double* gx, double* ggamma,
                          double* gbeta, i64 r, i64 c) {
    OMNIVL_DISPATCH(layernorm_bwd, x, gamma, mean, rstd, gy, gx, ggamma, gbeta, r, c);
}
inline void l2norm_rows_fwd(const double* x, double* y, double* inv_norm, i64 r, i64 c,
                            double eps) {
    OMNIVL_DISPATCH(l2norm_rows_fwd, x, y, inv_norm, r, c, eps);
}
inline void l2norm_rows_bwd(const double* y, const double* inv_norm, const double* gy,
                            double* gx, i64 r, i64 c) {
    OMNIVL_DISPATCH(l2norm_rows_bwd, y, inv_norm, gy, gx, r, c);
}
inline void gather_rows(const double* x, const i64* idx, double* y, i64 rout, i64 c) {
    OMNIVL_DISPATCH(gather_rows, x, idx, y, rout, c);
}
inline void scatter_add_rows(const double* gy, const i64* idx, double* gx, i64 rin, i64 c) {
    OMNIVL_DISPATCH(scatter_add_rows, gy, idx, gx, rin, c);
}
inline void swap_mid_axes(const double* x, double* y, i64 g, i64 a, i64 b, i64 c, bool acc) {
    OMNIVL_DISPATCH(swap_mid_axes, x, y, g, a, b, c, acc);
}
inline void ce_rows_fwd(const double* x, const i64* tgt, const double* w, double* loss, i64 r,
                        i64 c) {
    OMNIVL_DISPATCH(ce_rows_fwd, x, tgt, w, loss, r, c);
}
inline void ce_rows_bwd(const double* x, const i64* tgt, const double* w, double go, double* gx,
                        i64 r, i64 c) {
    OMNIVL_DISPATCH(ce_rows_bwd, x, tgt, w, go, gx, r, c);
}
inline void adamw(double* p, const double* g, double* m, double* v, i64 n, i64 t, double lr,
                  double beta1, double beta2, double eps, double wd) {
    OMNIVL_DISPATCH(adamw, p, g, m, v, n, t, lr, beta1, beta2, eps, wd);
}
inline void lerp_toward(double* mom, const double* live, i64 n, double coeff) {
    OMNIVL_DISPATCH(lerp_toward, mom, live, n, coeff);
}
inline bool all_finite(const double* x, i64 n) { return OMNIVL_DISPATCH(all_finite, x, n); }
inline double dot(const double* a, const double* b, i64 n) {
    return OMNIVL_DISPATCH(dot, a, b, n);
}
inline double sum(const double* x, i64 n) { return OMNIVL_DISPATCH(sum, x, n); }

#undef OMNIVL_DISPATCH

}  // namespace omnivl::kernels
