#pragma once
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "cfcml/errors.hpp"

namespace cfcml {

// Flat `key = value` text files: one pair per line, '#' starts a comment,
// blank lines ignored. Used for configs, manifests and reports.
namespace kv {

inline std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

struct Pairs {
    std::vector<std::pair<std::string, std::string>> items;

    bool has(const std::string& key) const {
        for (const auto& [k, v] : items)
            if (k == key) return true;
        return false;
    }
    const std::string* find(const std::string& key) const {
        for (const auto& [k, v] : items)
            if (k == key) return &v;
        return nullptr;
    }
    std::string get(const std::string& key) const {
        const std::string* v = find(key);
        if (!v) throw ConfigError("missing key '" + key + "'");
        return *v;
    }
    std::string get_or(const std::string& key, const std::string& dflt) const {
        const std::string* v = find(key);
        return v ? *v : dflt;
    }
    void set(const std::string& key, const std::string& value) {
        for (auto& [k, v] : items)
            if (k == key) {
                v = value;
                return;
            }
        items.emplace_back(key, value);
    }
};

inline Pairs parse(std::istream& is, const std::string& what = "kv") {
    Pairs out;
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        std::size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(what + ":" + std::to_string(lineno) + ": expected 'key = value'");
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (key.empty())
            throw ConfigError(what + ":" + std::to_string(lineno) + ": empty key");
        if (out.has(key))
            throw ConfigError(what + ":" + std::to_string(lineno) + ": duplicate key '" + key + "'");
        out.items.emplace_back(std::move(key), std::move(value));
    }
    return out;
}

inline Pairs parse_file(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open: " + path.string());
    return parse(is, path.filename().string());
}

inline void write_file(const std::filesystem::path& path, const Pairs& pairs) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw IoError("cannot open for write: " + path.string());
    for (const auto& [k, v] : pairs.items) os << k << " = " << v << "\n";
    if (!os) throw IoError("write failed: " + path.string());
}

inline std::string format_double(double x) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

inline double parse_double(const std::string& s, const std::string& key) {
    try {
        std::size_t pos = 0;
        double v = std::stod(s, &pos);
        if (pos != s.size()) throw std::invalid_argument("trailing");
        return v;
    } catch (const std::exception&) {
        throw ConfigError("key '" + key + "': expected a number, got '" + s + "'");
    }
}

inline long long parse_int(const std::string& s, const std::string& key) {
    try {
        std::size_t pos = 0;
        long long v = std::stoll(s, &pos);
        if (pos != s.size()) throw std::invalid_argument("trailing");
        return v;
    } catch (const std::exception&) {
        throw ConfigError("key '" + key + "': expected an integer, got '" + s + "'");
    }
}

inline bool parse_bool(const std::string& s, const std::string& key) {
    if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
    if (s == "false" || s == "0" || s == "no" || s == "off") return false;
    throw ConfigError("key '" + key + "': expected a boolean, got '" + s + "'");
}

inline std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == ',') {
            std::string t = trim(cur);
            if (!t.empty()) out.push_back(t);
            cur.clear();
        } else {
            cur += c;
        }
    }
    std::string t = trim(cur);
    if (!t.empty()) out.push_back(t);
    return out;
}

inline std::vector<int> parse_dims(const std::string& s, const std::string& key) {
    std::vector<int> out;
    std::string cur;
    for (char c : s + "x") {
        if (c == 'x' || c == 'X') {
            if (cur.empty()) throw ConfigError("key '" + key + "': bad dims '" + s + "'");
            out.push_back(static_cast<int>(parse_int(cur, key)));
            cur.clear();
        } else {
            cur += c;
        }
    }
    return out;
}

inline std::string dims_to_string(const std::vector<int>& dims) {
    std::string out;
    for (std::size_t i = 0; i < dims.size(); ++i) {
        if (i) out += "x";
        out += std::to_string(dims[i]);
    }
    return out;
}

}  // namespace kv
}  // namespace cfcml
