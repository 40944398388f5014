#define OMNIVL_KERNEL_NS omp
#define OMNIVL_STRINGIZE(x) #x
#define OMNIVL_PFOR(cond) _Pragma(OMNIVL_STRINGIZE(omp parallel for if (cond)))
#define OMNIVL_PFOR2(cond) _Pragma(OMNIVL_STRINGIZE(omp parallel for collapse(2) if (cond)))

#include "core/kernels_body.inc"
