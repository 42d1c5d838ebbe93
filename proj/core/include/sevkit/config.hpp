#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace sevkit {

/// Flat ordered `key = value` text config. Lines starting with '#' are
/// comments. Serialization preserves insertion order so round-trips are
/// byte-stable.
class KVConfig {
public:
    static KVConfig parse(const std::string& text);
    static KVConfig load_file(const std::string& path);

    bool has(const std::string& key) const;
    std::optional<std::string> get(const std::string& key) const;
    std::string get_or(const std::string& key, const std::string& fallback) const;

    std::uint64_t get_u64(const std::string& key) const;
    double get_f64(const std::string& key) const;
    bool get_bool(const std::string& key) const;

    void set(const std::string& key, const std::string& value);
    void set_u64(const std::string& key, std::uint64_t value);
    void set_f64(const std::string& key, double value);
    void set_bool(const std::string& key, bool value);

    std::string to_text() const;
    void save_file(const std::string& path) const;

    const std::vector<std::pair<std::string, std::string>>& items() const { return items_; }

private:
    std::string require(const std::string& key) const;
    std::vector<std::pair<std::string, std::string>> items_;
};

}  // namespace sevkit
