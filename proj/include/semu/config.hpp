#pragma once

#include <map>
#include <string>
#include <vector>

#include "semu/errors.hpp"

namespace semu {

// Flat key=value document with dotted keys, '#' comments, blank lines.
// Duplicate keys are rejected.
std::map<std::string, std::string> parse_kv_file(const std::string& path);
std::map<std::string, std::string> parse_kv_text(const std::string& text,
                                                 const std::string& origin);

// Typed accessors over a parsed document. Every get_* records the key as
// consumed; reject_unknown() then fails on anything left over.
class KvReader {
public:
    explicit KvReader(std::map<std::string, std::string> kv) : kv_(std::move(kv)) {}

    bool has(const std::string& key) const { return kv_.count(key) > 0; }

    std::string get_string(const std::string& key, const std::string& fallback);
    double get_double(const std::string& key, double fallback);
    int get_int(const std::string& key, int fallback);
    std::uint64_t get_u64(const std::string& key, std::uint64_t fallback);
    std::vector<double> get_double_list(const std::string& key,
                                        const std::vector<double>& fallback);
    std::vector<int> get_int_list(const std::string& key, const std::vector<int>& fallback);
    std::vector<std::string> get_string_list(const std::string& key,
                                             const std::vector<std::string>& fallback);

    void reject_unknown() const;

private:
    std::map<std::string, std::string> kv_;
    mutable std::map<std::string, bool> consumed_;
    const std::string* find(const std::string& key) const;
};

std::vector<std::string> split_list(const std::string& s);

}  // namespace semu
