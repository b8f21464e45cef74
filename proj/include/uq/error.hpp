#pragma once

#include <stdexcept>
#include <string>

namespace uq {

/// Failure category. The CLI maps each category onto a process exit code.
enum class ErrorKind {
  io,        ///< file missing or unreadable
  parse,     ///< malformed manifest / tensor / index
  version,   ///< unsupported format version
  shape,     ///< incompatible extents between tensors or layers
  weights,   ///< missing, extra or duplicated weight tensors
  mask,      ///< dropout mask does not match the graph's dropout sites
  argument,  ///< invalid scalar argument (rate, sample count, bounds...)
  numeric,   ///< non-finite value where a finite one is required
};

const char* to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace uq
