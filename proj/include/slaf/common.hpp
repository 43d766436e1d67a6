#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>
#include <sstream>
#include <cstdint>

namespace slaf {

// Runtime failure with a formatted message. Shape errors, range errors and
// usage errors all funnel through here so callers can report op and axes.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

template <typename... Args>
[[noreturn]] inline void fail(Args&&... args) {
    std::ostringstream os;
    (os << ... << args);
    throw Error(os.str());
}

#define SLAF_CHECK(cond, ...) \
    do { if (!(cond)) ::slaf::fail(__VA_ARGS__); } while (0)

// Dense row-major matrix; the single value type of the whole engine.
// Row vectors are 1xN matrices, scalars are 1x1.
template <typename S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using Index = Eigen::Index;

} // namespace slaf
