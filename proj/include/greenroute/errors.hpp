#pragma once

#include <stdexcept>
#include <string>

namespace greenroute {

/// Raised when input data (files, records, trace specs, plans) violates a
/// documented invariant. Messages carry row/field locations where available.
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(const std::string& message) : std::runtime_error(message) {}
};

}  // namespace greenroute
