#include "uq/error.hpp"

namespace uq {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::io: return "io";
    case ErrorKind::parse: return "parse";
    case ErrorKind::version: return "version";
    case ErrorKind::shape: return "shape";
    case ErrorKind::weights: return "weights";
    case ErrorKind::mask: return "mask";
    case ErrorKind::argument: return "argument";
    case ErrorKind::numeric: return "numeric";
  }
  return "unknown";
}

}  // namespace uq
