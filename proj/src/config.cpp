#include "semu/config.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

namespace semu {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

}  // namespace

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

std::map<std::string, std::string> parse_kv_text(const std::string& text,
                                                 const std::string& origin) {
    std::map<std::string, std::string> kv;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw FormatError(origin + ":" + std::to_string(lineno) +
                              ": expected key=value, got '" + line + "'");
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty()) {
            throw FormatError(origin + ":" + std::to_string(lineno) + ": empty key");
        }
        if (kv.count(key)) {
            throw FormatError(origin + ":" + std::to_string(lineno) + ": duplicate key '" + key +
                              "'");
        }
        kv[key] = value;
    }
    return kv;
}

std::map<std::string, std::string> parse_kv_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_kv_text(buf.str(), path);
}

const std::string* KvReader::find(const std::string& key) const {
    auto it = kv_.find(key);
    if (it == kv_.end()) return nullptr;
    consumed_[key] = true;
    return &it->second;
}

std::string KvReader::get_string(const std::string& key, const std::string& fallback) {
    const auto* v = find(key);
    return v ? *v : fallback;
}

double KvReader::get_double(const std::string& key, double fallback) {
    const auto* v = find(key);
    if (!v) return fallback;
    char* end = nullptr;
    const double d = std::strtod(v->c_str(), &end);
    if (end == v->c_str() || *end != '\0') {
        throw FormatError("config key '" + key + "': bad number '" + *v + "'");
    }
    return d;
}

int KvReader::get_int(const std::string& key, int fallback) {
    const double d = get_double(key, static_cast<double>(fallback));
    const int i = static_cast<int>(d);
    if (static_cast<double>(i) != d) {
        throw FormatError("config key '" + key + "': expected an integer");
    }
    return i;
}

std::uint64_t KvReader::get_u64(const std::string& key, std::uint64_t fallback) {
    const auto* v = find(key);
    if (!v) return fallback;
    char* end = nullptr;
    const unsigned long long u = std::strtoull(v->c_str(), &end, 10);
    if (end == v->c_str() || *end != '\0') {
        throw FormatError("config key '" + key + "': bad unsigned integer '" + *v + "'");
    }
    return u;
}

std::vector<double> KvReader::get_double_list(const std::string& key,
                                              const std::vector<double>& fallback) {
    const auto* v = find(key);
    if (!v) return fallback;
    std::vector<double> out;
    for (const auto& tok : split_list(*v)) {
        char* end = nullptr;
        const double d = std::strtod(tok.c_str(), &end);
        if (end == tok.c_str() || *end != '\0') {
            throw FormatError("config key '" + key + "': bad number '" + tok + "'");
        }
        out.push_back(d);
    }
    if (out.empty()) throw FormatError("config key '" + key + "': empty list");
    return out;
}

std::vector<int> KvReader::get_int_list(const std::string& key, const std::vector<int>& fallback) {
    const auto* v = find(key);
    if (!v) return fallback;
    std::vector<int> out;
    for (double d : get_double_list(key, {})) {
        const int i = static_cast<int>(d);
        if (static_cast<double>(i) != d) {
            throw FormatError("config key '" + key + "': expected integers");
        }
        out.push_back(i);
    }
    return out;
}

std::vector<std::string> KvReader::get_string_list(const std::string& key,
                                                   const std::vector<std::string>& fallback) {
    const auto* v = find(key);
    if (!v) return fallback;
    auto out = split_list(*v);
    if (out.empty()) throw FormatError("config key '" + key + "': empty list");
    return out;
}

void KvReader::reject_unknown() const {
    for (const auto& [key, value] : kv_) {
        if (!consumed_.count(key)) {
            throw FormatError("unknown config key '" + key + "'");
        }
    }
}

}  // namespace semu
