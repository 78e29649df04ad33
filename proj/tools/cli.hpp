#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace vtmorph::cli {

// Exit codes are a stable contract.
enum Exit : int {
    kOk = 0,
    kVerificationFailure = 1,
    kInvalidInput = 2,
    kRuntimeAbort = 3,
};

// args excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// Markdown listing of every config key with its default and meaning.
std::string config_reference();

}  // namespace vtmorph::cli
