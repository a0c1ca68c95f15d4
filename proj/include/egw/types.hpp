#ifndef EGW_TYPES_HPP
#define EGW_TYPES_HPP

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace egw {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Base class for everything thrown by this library.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Bad inputs: malformed files, non-normalized weights, infeasible flags.
class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& what) : Error(what) {}
};

// Floating-point breakdown: kernel overflow/underflow, ill-conditioned solves.
class NumericError : public Error {
 public:
  explicit NumericError(const std::string& what) : Error(what) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(what) {}
};

}  // namespace egw

#endif  // EGW_TYPES_HPP
