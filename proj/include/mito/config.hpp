#pragma once

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>

#include "mito/core/random.hpp"

namespace mito {

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Run configuration: one structured text file of key = value entries in
/// [section] tables ('#' and ';' start comments). CLI flags override config
/// keys, so the file is the single source of truth per run.
class Config {
public:
    Config() = default;

    static Config parse(const std::string& text, const std::string& origin = "<string>") {
        Config cfg;
        std::istringstream in(text);
        std::string line;
        std::string section;
        int lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            const std::string trimmed = trim(strip_comment(line));
            if (trimmed.empty()) continue;
            if (trimmed.front() == '[') {
                if (trimmed.back() != ']') {
                    throw ConfigError(origin + ":" + std::to_string(lineno) +
                                      ": unterminated section header");
                }
                section = trim(trimmed.substr(1, trimmed.size() - 2));
                continue;
            }
            const auto eq = trimmed.find('=');
            if (eq == std::string::npos) {
                throw ConfigError(origin + ":" + std::to_string(lineno) +
                                  ": expected key = value");
            }
            const std::string key = trim(trimmed.substr(0, eq));
            std::string value = trim(trimmed.substr(eq + 1));
            if (value.size() >= 2 && value.front() == '"' && value.back() == '"') {
                value = value.substr(1, value.size() - 2);
            }
            if (key.empty()) {
                throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty key");
            }
            cfg.sections_[section][key] = value;
        }
        return cfg;
    }

    static Config parse_file(const std::filesystem::path& path) {
        std::ifstream in(path);
        if (!in) throw ConfigError("config: cannot open " + path.string());
        std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        return parse(text, path.string());
    }

    bool has(const std::string& section, const std::string& key) const {
        const auto s = sections_.find(section);
        return s != sections_.end() && s->second.count(key) > 0;
    }

    std::string get(const std::string& section, const std::string& key,
                    const std::string& fallback) const {
        const auto s = sections_.find(section);
        if (s == sections_.end()) return fallback;
        const auto k = s->second.find(key);
        return k == s->second.end() ? fallback : k->second;
    }

    double get_double(const std::string& section, const std::string& key, double fallback) const {
        if (!has(section, key)) return fallback;
        try {
            return std::stod(get(section, key, ""));
        } catch (const std::exception&) {
            throw ConfigError(path_of(section, key) + ": expected a number");
        }
    }

    long get_int(const std::string& section, const std::string& key, long fallback) const {
        if (!has(section, key)) return fallback;
        try {
            return std::stol(get(section, key, ""));
        } catch (const std::exception&) {
            throw ConfigError(path_of(section, key) + ": expected an integer");
        }
    }

    std::uint64_t get_u64(const std::string& section, const std::string& key,
                          std::uint64_t fallback) const {
        if (!has(section, key)) return fallback;
        try {
            return std::stoull(get(section, key, ""));
        } catch (const std::exception&) {
            throw ConfigError(path_of(section, key) + ": expected an unsigned integer");
        }
    }

    bool get_bool(const std::string& section, const std::string& key, bool fallback) const {
        if (!has(section, key)) return fallback;
        const std::string v = get(section, key, "");
        if (v == "true" || v == "1" || v == "yes") return true;
        if (v == "false" || v == "0" || v == "no") return false;
        throw ConfigError(path_of(section, key) + ": expected a boolean");
    }

    void set(const std::string& section, const std::string& key, const std::string& value) {
        sections_[section][key] = value;
    }

    /// Canonical text: sections and keys sorted, so the hash is stable under
    /// reordering of the source file.
    std::string canonical() const {
        std::ostringstream out;
        for (const auto& [section, entries] : sections_) {
            out << "[" << section << "]\n";
            for (const auto& [key, value] : entries) {
                out << key << "=" << value << "\n";
            }
        }
        return out.str();
    }

    /// Hex FNV-1a of the canonical form; recorded into artifact sidecars.
    std::string hash() const {
        std::ostringstream out;
        out << std::hex << fnv1a64(canonical());
        return out.str();
    }

private:
    static std::string strip_comment(const std::string& s) {
        bool quoted = false;
        for (std::size_t i = 0; i < s.size(); ++i) {
            if (s[i] == '"') quoted = !quoted;
            if (!quoted && (s[i] == '#' || s[i] == ';')) return s.substr(0, i);
        }
        return s;
    }

    static std::string trim(const std::string& s) {
        std::size_t a = 0, b = s.size();
        while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
        while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
        return s.substr(a, b - a);
    }

    static std::string path_of(const std::string& section, const std::string& key) {
        return section.empty() ? key : section + "." + key;
    }

    std::map<std::string, std::map<std::string, std::string>> sections_;
};

}  // namespace mito
