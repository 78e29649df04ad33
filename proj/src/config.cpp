#include "vtmorph/config.hpp"

#include <charconv>
#include <cmath>
#include <sstream>

namespace vtmorph {

namespace cfg {

namespace {

[[noreturn]] void bad(const std::string& key, const std::string& value, const char* what) {
    throw ConfigError("config key '" + key + "': expected " + what + ", got '" + value + "'");
}

}  // namespace

int64_t to_int(const std::string& key, const std::string& value) {
    int64_t v = 0;
    const auto res = std::from_chars(value.data(), value.data() + value.size(), v);
    if (value.empty() || res.ec != std::errc() || res.ptr != value.data() + value.size()) bad(key, value, "an integer");
    return v;
}

uint64_t to_u64(const std::string& key, const std::string& value) {
    uint64_t v = 0;
    const auto res = std::from_chars(value.data(), value.data() + value.size(), v);
    if (value.empty() || res.ec != std::errc() || res.ptr != value.data() + value.size()) {
        bad(key, value, "a non-negative integer");
    }
    return v;
}

double to_double(const std::string& key, const std::string& value) {
    double v = 0.0;
    const auto res = std::from_chars(value.data(), value.data() + value.size(), v);
    if (value.empty() || res.ec != std::errc() || res.ptr != value.data() + value.size() || !std::isfinite(v)) {
        bad(key, value, "a finite number");
    }
    return v;
}

bool to_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1" || value == "yes") return true;
    if (value == "false" || value == "0" || value == "no") return false;
    bad(key, value, "true or false");
}

std::vector<int64_t> to_int_list(const std::string& key, const std::string& value) {
    std::vector<int64_t> out;
    std::istringstream is(value);
    std::string item;
    while (std::getline(is, item, ',')) out.push_back(to_int(key, item));
    if (out.empty()) bad(key, value, "a comma-separated integer list");
    return out;
}

std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

std::string format_int_list(const std::vector<int64_t>& values) {
    std::string out;
    for (size_t i = 0; i < values.size(); ++i) {
        if (i) out += ',';
        out += std::to_string(values[i]);
    }
    return out;
}

}  // namespace cfg

std::map<std::string, std::string> parse_config_text(const std::string& text) {
    std::map<std::string, std::string> out;
    std::istringstream is(text);
    std::string line;
    int line_no = 0;
    auto trim = [](std::string s) {
        const auto a = s.find_first_not_of(" \t\r");
        if (a == std::string::npos) return std::string();
        return s.substr(a, s.find_last_not_of(" \t\r") - a + 1);
    };
    while (std::getline(is, line)) {
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("config line " + std::to_string(line_no) + ": expected key=value, got '" + line + "'");
        }
        const std::string key = trim(line.substr(0, eq));
        if (key.empty()) throw ConfigError("config line " + std::to_string(line_no) + ": empty key");
        if (!out.emplace(key, trim(line.substr(eq + 1))).second) {
            throw ConfigError("config line " + std::to_string(line_no) + ": key '" + key + "' given twice");
        }
    }
    return out;
}

}  // namespace vtmorph
