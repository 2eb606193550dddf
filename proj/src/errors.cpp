#include "pfeller/errors.hpp"

#include <sstream>

namespace pfeller {

namespace {

std::string describe_parse(std::size_t position, const std::vector<std::string>& expected,
                           const std::string& found) {
    std::ostringstream os;
    os << "parse error at position " << position << ": expected ";
    for (std::size_t i = 0; i < expected.size(); ++i) {
        if (i > 0) os << (i + 1 == expected.size() ? " or " : ", ");
        os << expected[i];
    }
    os << ", found " << found;
    return os.str();
}

std::string describe_validation(const std::string& invariant, double t, const std::string& detail) {
    std::ostringstream os;
    os.precision(17);
    os << "validation failed: " << invariant << " at t=" << t;
    if (!detail.empty()) os << " (" << detail << ")";
    return os.str();
}

}  // namespace

ParseError::ParseError(std::size_t position, std::vector<std::string> expected, const std::string& found)
    : Error(describe_parse(position, expected, found)), position_(position), expected_(std::move(expected)) {}

ValidationError::ValidationError(std::string invariant, double t, const std::string& detail)
    : Error(describe_validation(invariant, t, detail)), invariant_(std::move(invariant)), t_(t) {}

NonConvergence::NonConvergence(const std::string& what, std::vector<std::string> trace)
    : Error(what), trace_(std::move(trace)) {}

}  // namespace pfeller
