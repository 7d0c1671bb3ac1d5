#pragma once

#include <stdexcept>
#include <string>

namespace stackopt {

// Every library failure derives from Error so callers can catch one type.
// kind() is a short machine-readable tag used by the CLI's error line.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& what)
      : std::runtime_error(what), kind_(std::move(kind)) {}
  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

class DimensionError : public Error {
 public:
  explicit DimensionError(const std::string& what) : Error("dimension", what) {}
};

class InvalidArgument : public Error {
 public:
  explicit InvalidArgument(const std::string& what) : Error("invalid_argument", what) {}
};

// A linear system whose reciprocal condition number fell below the threshold.
class SingularSystem : public Error {
 public:
  SingularSystem(const std::string& what, double rcond)
      : Error("singular", what + " (reciprocal condition " + std::to_string(rcond) + ")"),
        rcond_(rcond) {}
  double rcond() const noexcept { return rcond_; }

 private:
  double rcond_;
};

class NumericalError : public Error {
 public:
  explicit NumericalError(const std::string& what) : Error("numerical", what) {}
};

}  // namespace stackopt
