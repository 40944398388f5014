#define OMNIVL_KERNEL_NS ref
#define OMNIVL_PFOR(cond)
#define OMNIVL_PFOR2(cond)

#include "core/kernels_body.inc"
