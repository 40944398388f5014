#pragma once

#include <vector>

#include "core/tensor.hpp"

namespace omnivl {

// Ring buffer of the most recent momentum embeddings and their labels: the
// visual store, the text store and the label store advance together so
// labels[k] always describes both vector rows k.
class MemoryBank {
public:
    MemoryBank(i64 capacity, i64 dim)
        : capacity_(capacity),
          dim_(dim),
          visual_vecs_({capacity, dim}),
          text_vecs_({capacity, dim}),
          labels_(static_cast<size_t>(capacity), -1) {}

    void enqueue(const Tensor& v, const Tensor& w, const std::vector<i64>& y);
    void reset();

    i64 capacity() const { return capacity_; }
    i64 dim() const { return dim_; }
    i64 filled() const { return filled_; }
    i64 write_cursor() const { return cursor_; }

    const Tensor& visual_vecs() const { return visual_vecs_; }
    const Tensor& text_vecs() const { return text_vecs_; }
    const std::vector<i64>& labels() const { return labels_; }

    // raw access for checkpoint restore
    void restore(Tensor v, Tensor w, std::vector<i64> y, i64 cursor, i64 filled);

private:
    i64 capacity_;
    i64 dim_;
    Tensor visual_vecs_;  // [M, d]
    Tensor text_vecs_;    // [M, d]
    std::vector<i64> labels_;
    i64 cursor_ = 0;
    i64 filled_ = 0;
};

}  // namespace omnivl
