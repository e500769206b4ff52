#pragma once

#include <string>

namespace cirmag {

// Per-point status bits written to the flags column of every curve or map.
enum PointFlag : unsigned {
  kFlagOk = 0,
  kFlagPole = 1u << 0,
  kFlagSaturated = 1u << 1,
  kFlagSingular = 1u << 2,
};

/// "OK", or the set bits joined with '|' (e.g. "POLE|SATURATED").
std::string flags_to_string(unsigned flags);

}  // namespace cirmag
