#pragma once

// key=value configuration plumbing shared by the trainer, metrics, synthesis
// and the command line.

#include <cstdint>
#include <functional>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace vtmorph {

class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

template <typename S>
struct ConfigField {
    std::string name;
    std::string description;
    std::function<std::string(const S&)> get;
    std::function<void(S&, const std::string&)> set;
};

namespace cfg {
int64_t to_int(const std::string& key, const std::string& value);
uint64_t to_u64(const std::string& key, const std::string& value);
double to_double(const std::string& key, const std::string& value);
bool to_bool(const std::string& key, const std::string& value);
std::vector<int64_t> to_int_list(const std::string& key, const std::string& value);
// Shortest text that parses back to the same double.
std::string format_double(double v);
std::string format_int_list(const std::vector<int64_t>& values);
}  // namespace cfg

// Parses key=value lines; '#' starts a comment, blank lines are skipped and
// repeated keys are an error.
std::map<std::string, std::string> parse_config_text(const std::string& text);

}  // namespace vtmorph
