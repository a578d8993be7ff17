#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>

namespace sptree {

// Line-based `key = value` configuration with '#' comments. Experiments
// declare their known keys; anything else is rejected up front.
class ExperimentConfig {
public:
    std::string experiment;
    std::uint64_t seed = 20090401;

    void set(const std::string& key, const std::string& value) {
        values_[key] = value;
    }

    void load_file(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw std::runtime_error("config: cannot open " + path);
        std::string line;
        int lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            const auto hash = line.find('#');
            if (hash != std::string::npos) line.erase(hash);
            const auto eq = line.find('=');
            if (eq == std::string::npos) {
                if (line.find_first_not_of(" \t\r") != std::string::npos)
                    throw std::runtime_error("config: line " + std::to_string(lineno) +
                                             " is not `key = value`");
                continue;
            }
            set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
        }
    }

    void validate_keys(const std::set<std::string>& known) const {
        for (const auto& [key, value] : values_) {
            if (!known.count(key))
                throw std::invalid_argument("config: unknown key `" + key + "` for " +
                                            experiment);
        }
    }

    bool has(const std::string& key) const { return values_.count(key) > 0; }

    double get_double(const std::string& key, double fallback) const {
        auto it = values_.find(key);
        if (it == values_.end()) return fallback;
        return parse<double>(it->first, it->second);
    }

    std::int64_t get_int(const std::string& key, std::int64_t fallback) const {
        auto it = values_.find(key);
        if (it == values_.end()) return fallback;
        return parse<std::int64_t>(it->first, it->second);
    }

    std::string get_string(const std::string& key, std::string fallback) const {
        auto it = values_.find(key);
        return it == values_.end() ? fallback : it->second;
    }

    const std::map<std::string, std::string>& raw() const { return values_; }

private:
    static std::string trim(std::string s) {
        const auto a = s.find_first_not_of(" \t\r");
        const auto b = s.find_last_not_of(" \t\r");
        if (a == std::string::npos) return "";
        return s.substr(a, b - a + 1);
    }

    template <class T>
    static T parse(const std::string& key, const std::string& value) {
        std::istringstream in(value);
        T out;
        in >> out;
        if (in.fail())
            throw std::invalid_argument("config: cannot parse value for `" + key + "`");
        return out;
    }

    std::map<std::string, std::string> values_;
};

}  // namespace sptree
