#pragma once

#include <cstdint>

#include "smoothstyle/errors.hpp"

namespace smoothstyle {

// One of the m disjoint domains an image can belong to.
struct DomainLabel {
  std::int64_t index = 0;

  bool operator==(const DomainLabel&) const = default;
};

inline void check_domain(DomainLabel d, std::int64_t m) {
  if (d.index < 0 || d.index >= m) {
    throw ContractViolation("domain index " + std::to_string(d.index) +
                            " out of range [0, " + std::to_string(m) + ")");
  }
}

// Where a style code came from.
enum class CodeSource { encoder, mapper, interpolated };

enum class InterpStrategy { lerp, slerp };

// Whether an interpolation stays inside one domain or crosses two.
enum class PathKind { intra, inter };

}  // namespace smoothstyle
