#pragma once

#include <stdexcept>
#include <string>

namespace bscch {

/// Machine-readable failure categories. The CLI writes these into its error record.
enum class ErrorKind {
  InvalidParameter,
  SingularDomain,
  DimensionMismatch,
  Compatibility,
  Assembly,
  Resource,
  Nonconvergence,
  UnsupportedRegime,
  Config,
  Io,
};

const char* to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// Raised when a singular potential is evaluated outside (-1,1). Carries the node id when known.
class SingularDomainError : public Error {
 public:
  SingularDomainError(const std::string& what, double value, long node = -1)
      : Error(ErrorKind::SingularDomain, what), value_(value), node_(node) {}
  double value() const noexcept { return value_; }
  long node() const noexcept { return node_; }

 private:
  double value_;
  long node_;
};

}  // namespace bscch
