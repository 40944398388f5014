#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "core/tensor.hpp"

namespace omnivl {

// Single-file container of named arrays. Doubles are written raw (little
// endian), so save -> load -> save is byte-identical.
struct ArrayStore {
    std::map<std::string, Tensor> arrays;          // ordered: stable file layout
    std::map<std::string, std::string> text;       // embedded text blobs (config, vocab)

    void put(const std::string& name, Tensor t) { arrays[name] = std::move(t); }
    void put_scalar(const std::string& name, double v) { arrays[name] = Tensor::scalar(v); }
    bool has(const std::string& name) const { return arrays.count(name) > 0; }
    const Tensor& get(const std::string& name) const;
    double get_scalar(const std::string& name) const;

    void save(const std::string& path) const;
    static ArrayStore load(const std::string& path);
};

}  // namespace omnivl
