#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace jigsawssl {

// Flat `key = value` config text; '#' starts a comment. Keys are looked up
// with typed accessors that throw on malformed values, and every key must be
// consumed by the caller (unknown keys are reported).
class KeyValueConfig {
public:
    KeyValueConfig() = default;

    static KeyValueConfig parse_text(const std::string& text);
    static KeyValueConfig load(const std::string& path);

    bool has(const std::string& key) const { return values_.count(key) > 0; }

    std::string get_string(const std::string& key) const;
    std::string get_string(const std::string& key, const std::string& fallback) const;
    double get_double(const std::string& key, double fallback) const;
    long get_long(const std::string& key, long fallback) const;
    std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;
    // Comma-separated list of doubles.
    std::vector<double> get_double_list(const std::string& key,
                                        const std::vector<double>& fallback) const;
    std::vector<std::uint64_t> get_u64_list(const std::string& key,
                                            const std::vector<std::uint64_t>& fallback) const;

    // Keys present in the file but never read by any accessor.
    std::vector<std::string> unused_keys() const;

    void set(const std::string& key, const std::string& value) { values_[key] = value; }

private:
    std::map<std::string, std::string> values_;
    mutable std::map<std::string, bool> touched_;
};

}  // namespace jigsawssl
