#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "spatter/errors.hpp"

namespace spatter {

/// Flat `key = value` configuration with `[section]` prefixes
/// (`[scene] width = 64` -> "scene.width"). Values may be quoted; `#`
/// starts a comment outside quotes.
class Config {
public:
    static Config parse(const std::string& text, const std::string& origin = "<config>") {
        Config c;
        std::string section;
        std::size_t lineno = 0;
        std::size_t pos = 0;
        while (pos <= text.size()) {
            const std::size_t nl = text.find('\n', pos);
            std::string line = text.substr(pos, nl == std::string::npos ? std::string::npos : nl - pos);
            pos = nl == std::string::npos ? text.size() + 1 : nl + 1;
            ++lineno;
            line = strip_comment(line);
            line = trim(line);
            if (line.empty()) continue;
            const std::string where = origin + ":" + std::to_string(lineno);
            if (line.front() == '[') {
                if (line.back() != ']') throw ConfigError(where + ": malformed section header");
                section = trim(line.substr(1, line.size() - 2));
                continue;
            }
            const auto eq = line.find('=');
            if (eq == std::string::npos) throw ConfigError(where + ": expected key = value");
            std::string key = trim(line.substr(0, eq));
            std::string value = trim(line.substr(eq + 1));
            if (key.empty()) throw ConfigError(where + ": empty key");
            if (value.size() >= 2 && value.front() == '"' && value.back() == '"') value = value.substr(1, value.size() - 2);
            if (!section.empty()) key = section + "." + key;
            if (c.values_.count(key)) throw ConfigError(where + ": duplicate key '" + key + "'");
            c.values_[key] = value;
        }
        return c;
    }

    static Config load(const std::filesystem::path& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw ConfigError("cannot open config " + path.string());
        std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        return parse(text, path.string());
    }

    /// Throws ConfigError naming the first key not in `allowed`.
    void require_known(const std::set<std::string>& allowed) const {
        for (const auto& [k, v] : values_)
            if (!allowed.count(k)) throw ConfigError("unknown config key '" + k + "'");
    }

    bool has(const std::string& key) const { return values_.count(key) > 0; }
    void set(const std::string& key, const std::string& value) { values_[key] = value; }

    std::string str(const std::string& key, const std::string& fallback = {}) const {
        auto it = values_.find(key);
        return it == values_.end() ? fallback : it->second;
    }

    double num(const std::string& key, double fallback) const {
        auto it = values_.find(key);
        if (it == values_.end()) return fallback;
        try {
            std::size_t used = 0;
            const double v = std::stod(it->second, &used);
            if (used != it->second.size()) throw std::invalid_argument(it->second);
            return v;
        } catch (const std::exception&) {
            throw ConfigError("config key '" + key + "': not a number: '" + it->second + "'");
        }
    }

    long long integer(const std::string& key, long long fallback) const {
        auto it = values_.find(key);
        if (it == values_.end()) return fallback;
        try {
            std::size_t used = 0;
            const long long v = std::stoll(it->second, &used);
            if (used != it->second.size()) throw std::invalid_argument(it->second);
            return v;
        } catch (const std::exception&) {
            throw ConfigError("config key '" + key + "': not an integer: '" + it->second + "'");
        }
    }

    std::uint64_t u64(const std::string& key, std::uint64_t fallback) const {
        auto it = values_.find(key);
        if (it == values_.end()) return fallback;
        try {
            std::size_t used = 0;
            const auto v = std::stoull(it->second, &used);
            if (used != it->second.size() || it->second.front() == '-') throw std::invalid_argument(it->second);
            return v;
        } catch (const std::exception&) {
            throw ConfigError("config key '" + key + "': not an unsigned integer: '" + it->second + "'");
        }
    }

    bool boolean(const std::string& key, bool fallback) const {
        auto it = values_.find(key);
        if (it == values_.end()) return fallback;
        if (it->second == "true" || it->second == "1") return true;
        if (it->second == "false" || it->second == "0") return false;
        throw ConfigError("config key '" + key + "': expected true/false");
    }

    /// Comma-separated numbers, optionally in brackets: `[1, 2, 3]`.
    std::vector<double> numbers(const std::string& key, std::vector<double> fallback = {}) const {
        auto it = values_.find(key);
        if (it == values_.end()) return fallback;
        std::string s = trim(it->second);
        if (!s.empty() && s.front() == '[' && s.back() == ']') s = s.substr(1, s.size() - 2);
        std::vector<double> out;
        std::size_t p = 0;
        while (p < s.size()) {
            const auto comma = s.find(',', p);
            const std::string cell = trim(s.substr(p, comma == std::string::npos ? std::string::npos : comma - p));
            p = comma == std::string::npos ? s.size() : comma + 1;
            if (cell.empty()) continue;
            try {
                std::size_t used = 0;
                out.push_back(std::stod(cell, &used));
                if (used != cell.size()) throw std::invalid_argument(cell);
            } catch (const std::exception&) {
                throw ConfigError("config key '" + key + "': not a number: '" + cell + "'");
            }
        }
        return out;
    }

    const std::map<std::string, std::string>& values() const { return values_; }

private:
    static std::string trim(const std::string& s) {
        const auto b = s.find_first_not_of(" \t\r");
        if (b == std::string::npos) return {};
        const auto e = s.find_last_not_of(" \t\r");
        return s.substr(b, e - b + 1);
    }

    static std::string strip_comment(const std::string& s) {
        bool quoted = false;
        for (std::size_t i = 0; i < s.size(); ++i) {
            if (s[i] == '"') quoted = !quoted;
            if (s[i] == '#' && !quoted) return s.substr(0, i);
        }
        return s;
    }

    std::map<std::string, std::string> values_;
};

}  // namespace spatter
