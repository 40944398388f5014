#pragma once

#include <map>
#include <set>
#include <string>

#include "core/tensor.hpp"

namespace omnivl {

// Plain `key = value` config file with dotted keys; `#` starts a comment.
// Unknown keys are rejected against the registry of known keys.
class KeyValueConfig {
public:
    static KeyValueConfig parse_file(const std::string& path);
    static KeyValueConfig parse_text(const std::string& text);

    void set(const std::string& key, const std::string& value) { kv_[key] = value; }
    void apply_override(const std::string& assignment);  // "key=value"

    bool has(const std::string& key) const { return kv_.count(key) > 0; }
    std::string str(const std::string& key, const std::string& fallback) const;
    double num(const std::string& key, double fallback) const;
    i64 integer(const std::string& key, i64 fallback) const;
    bool flag(const std::string& key, bool fallback) const;

    void validate_keys(const std::set<std::string>& known) const;
    std::string resolved_text() const;  // sorted, reparseable snapshot

private:
    std::map<std::string, std::string> kv_;
};

}  // namespace omnivl
