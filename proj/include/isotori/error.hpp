#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace isotori {

enum class ErrorKind {
  dimension,
  numeric_failure,
  degenerate_frame,
  nondegeneracy_failure,
  no_convergence,
  index_out_of_range,
  stiffness,
  blow_up,
  degenerate_torus,
  singular_frequency_matrix,
  chart_overflow,
  degenerate_point,
  geometry,
  invalid_spec,
  unsupported_oracle,
  config,
};

constexpr std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::dimension: return "dimension";
    case ErrorKind::numeric_failure: return "numeric-failure";
    case ErrorKind::degenerate_frame: return "degenerate-frame";
    case ErrorKind::nondegeneracy_failure: return "nondegeneracy-failure";
    case ErrorKind::no_convergence: return "no-convergence";
    case ErrorKind::index_out_of_range: return "index-out-of-range";
    case ErrorKind::stiffness: return "stiffness";
    case ErrorKind::blow_up: return "blow-up";
    case ErrorKind::degenerate_torus: return "degenerate-torus";
    case ErrorKind::singular_frequency_matrix: return "singular-frequency-matrix";
    case ErrorKind::chart_overflow: return "chart-overflow";
    case ErrorKind::degenerate_point: return "degenerate-point";
    case ErrorKind::geometry: return "geometry";
    case ErrorKind::invalid_spec: return "invalid-spec";
    case ErrorKind::unsupported_oracle: return "unsupported-oracle";
    case ErrorKind::config: return "config";
  }
  return "unknown";
}

/// Every failure raised by the library carries a kind so callers (and the
/// CLI exit-code mapping) can dispatch without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace isotori
