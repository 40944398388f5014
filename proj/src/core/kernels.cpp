#include "core/kernels.hpp"

namespace omnivl::kernels {

namespace {
Backend g_backend = Backend::parallel;
}

Backend backend() { return g_backend; }
void set_backend(Backend b) { g_backend = b; }

}  // namespace omnivl::kernels
