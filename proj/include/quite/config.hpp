#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace quite {

/// Flat `key = value` configuration. Keys are namespaced with dots
/// (data.*, model.*, train.*); `#` starts a comment line.
class Config {
public:
    static Config parse(const std::string& text, const std::string& source = "<config>");
    static Config load(const std::string& path);

    void set(const std::string& key, const std::string& value);
    bool has(const std::string& key) const { return entries_.count(key) != 0; }
    void erase(const std::string& key) { entries_.erase(key); }

    std::string get(const std::string& key, const std::string& fallback) const;
    double get_double(const std::string& key, double fallback) const;
    std::size_t get_size(const std::string& key, std::size_t fallback) const;
    std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;
    /// Comma-separated lists.
    std::vector<double> get_doubles(const std::string& key, const std::vector<double>& fallback) const;
    std::vector<std::size_t> get_sizes(const std::string& key, const std::vector<std::size_t>& fallback) const;

    /// Throws ValidationError naming the first key outside `known`.
    void check_known(const std::set<std::string>& known) const;

    const std::map<std::string, std::string>& entries() const { return entries_; }
    /// Sorted `key = value` lines.
    std::string to_text() const;
    /// FNV-1a 64 over to_text(), as 16 hex digits.
    std::string hash() const;

private:
    std::map<std::string, std::string> entries_;
};

std::uint64_t fnv1a64(const std::string& bytes);

}  // namespace quite
