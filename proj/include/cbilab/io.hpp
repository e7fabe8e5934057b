#pragma once

#include <string>
#include <string_view>

namespace cbilab {

/// Shortest representation that reads back to the same double; `inf`/`-inf`
/// for infinities and `nan` for NaN.
std::string format_double(double v);

/// Inverse of format_double; throws ConfigError on malformed input.
double parse_double(std::string_view text);

}  // namespace cbilab
