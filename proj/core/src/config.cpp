#include "sevkit/config.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace sevkit {

namespace {

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

}  // namespace

KVConfig KVConfig::parse(const std::string& text) {
    KVConfig cfg;
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        std::size_t eq = t.find('=');
        if (eq == std::string::npos) {
            throw std::runtime_error("config parse: line " + std::to_string(lineno) +
                                     " is not 'key = value': " + t);
        }
        cfg.set(trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
    }
    return cfg;
}

KVConfig KVConfig::load_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse(ss.str());
}

bool KVConfig::has(const std::string& key) const {
    for (const auto& [k, v] : items_) {
        if (k == key) return true;
    }
    return false;
}

std::optional<std::string> KVConfig::get(const std::string& key) const {
    for (const auto& [k, v] : items_) {
        if (k == key) return v;
    }
    return std::nullopt;
}

std::string KVConfig::get_or(const std::string& key, const std::string& fallback) const {
    auto v = get(key);
    return v ? *v : fallback;
}

std::string KVConfig::require(const std::string& key) const {
    auto v = get(key);
    if (!v) throw std::runtime_error("config: missing key '" + key + "'");
    return *v;
}

std::uint64_t KVConfig::get_u64(const std::string& key) const {
    const std::string s = require(key);
    try {
        return std::stoull(s);
    } catch (const std::exception&) {
        throw std::runtime_error("config: key '" + key + "' is not an integer: " + s);
    }
}

double KVConfig::get_f64(const std::string& key) const {
    const std::string s = require(key);
    try {
        return std::stod(s);
    } catch (const std::exception&) {
        throw std::runtime_error("config: key '" + key + "' is not a number: " + s);
    }
}

bool KVConfig::get_bool(const std::string& key) const {
    const std::string s = require(key);
    if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
    if (s == "false" || s == "0" || s == "no" || s == "off") return false;
    throw std::runtime_error("config: key '" + key + "' is not a boolean: " + s);
}

void KVConfig::set(const std::string& key, const std::string& value) {
    for (auto& [k, v] : items_) {
        if (k == key) {
            v = value;
            return;
        }
    }
    items_.emplace_back(key, value);
}

void KVConfig::set_u64(const std::string& key, std::uint64_t value) {
    set(key, std::to_string(value));
}

void KVConfig::set_f64(const std::string& key, double value) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", value);
    set(key, buf);
}

void KVConfig::set_bool(const std::string& key, bool value) { set(key, value ? "true" : "false"); }

std::string KVConfig::to_text() const {
    std::ostringstream os;
    for (const auto& [k, v] : items_) os << k << " = " << v << "\n";
    return os.str();
}

void KVConfig::save_file(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write config file: " + path);
    out << to_text();
}

}  // namespace sevkit
