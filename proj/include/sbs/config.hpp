// config.hpp — sectioned key/value configuration text

#pragma once

#include <map>
#include <string>
#include <vector>

namespace sbs::config {

// Lines "key = value", sections "[name]" prefix keys as "name.key".
// '#' and ';' start comments.
class Config {
public:
    static Config parse(const std::string& text);
    static Config load(const std::string& path);

    bool has(const std::string& key) const { return values_.count(key) > 0; }
    std::string get(const std::string& key, const std::string& fallback) const;
    double get(const std::string& key, double fallback) const;
    long get_int(const std::string& key, long fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;
    std::vector<double> get_list(const std::string& key, const std::vector<double>& fallback) const;
    void set(const std::string& key, const std::string& value) { values_[key] = value; }
    const std::map<std::string, std::string>& values() const { return values_; }

private:
    std::map<std::string, std::string> values_;
};

std::vector<double> parse_list(const std::string& text);

}  // namespace sbs::config
