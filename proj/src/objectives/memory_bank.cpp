#include "objectives/memory_bank.hpp"

#include "core/error.hpp"
#include "core/kernels.hpp"

namespace omnivl {

void MemoryBank::enqueue(const Tensor& v, const Tensor& w, const std::vector<i64>& y) {
    const i64 b = static_cast<i64>(y.size());
    if (b > capacity_)
        throw ArgError("memory bank: batch of " + std::to_string(b) +
                       " exceeds capacity " + std::to_string(capacity_));
    if (v.rows() != b || w.rows() != b || v.last_dim() != dim_ || w.last_dim() != dim_)
        throw ShapeError("memory bank: embedding shape mismatch");
    for (i64 i = 0; i < b; ++i) {
        kernels::copy(v.ptr() + i * dim_, visual_vecs_.ptr() + cursor_ * dim_, dim_);
        kernels::copy(w.ptr() + i * dim_, text_vecs_.ptr() + cursor_ * dim_, dim_);
        labels_[static_cast<size_t>(cursor_)] = y[static_cast<size_t>(i)];
        cursor_ = (cursor_ + 1) % capacity_;
    }
    filled_ = std::min(filled_ + b, capacity_);
}

void MemoryBank::reset() {
    cursor_ = 0;
    filled_ = 0;
    for (double& x : visual_vecs_.data) x = 0.0;
    for (double& x : text_vecs_.data) x = 0.0;
    for (i64& l : labels_) l = -1;
}

void MemoryBank::restore(Tensor v, Tensor w, std::vector<i64> y, i64 cursor, i64 filled) {
    if (v.rows() != capacity_ || w.rows() != capacity_ ||
        static_cast<i64>(y.size()) != capacity_)
        throw ShapeError("memory bank: restore size mismatch");
    visual_vecs_ = std::move(v);
    text_vecs_ = std::move(w);
    labels_ = std::move(y);
    cursor_ = cursor;
    filled_ = filled;
}

}  // namespace omnivl
