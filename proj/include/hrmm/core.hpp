#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <stdexcept>
#include <string>

namespace hrmm {

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using Matrix = MatrixX<double>;
using Vector = VectorX<double>;

// Bid is the top sign everywhere: a bid fill adds z_k to the inventory.
enum class Side : int { bid = 0, ask = 1 };

constexpr int side_sign(Side s) noexcept { return s == Side::bid ? 1 : -1; }
constexpr const char* side_name(Side s) noexcept { return s == Side::bid ? "bid" : "ask"; }

// Maps onto the CLI exit codes.
enum class ErrorKind : int { config = 2, numerical = 3, io = 4 };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, std::string module, const std::string& message, std::string context = {})
      : std::runtime_error(message), kind_(kind), module_(std::move(module)), context_(std::move(context)) {}

  ErrorKind kind() const noexcept { return kind_; }
  const std::string& module() const noexcept { return module_; }
  const std::string& context() const noexcept { return context_; }

 private:
  ErrorKind kind_;
  std::string module_;
  std::string context_;
};

class ConfigError : public Error {
 public:
  ConfigError(std::string module, const std::string& message, std::string context = {})
      : Error(ErrorKind::config, std::move(module), message, std::move(context)) {}
};

class NumericalError : public Error {
 public:
  NumericalError(std::string module, const std::string& message, std::string context = {})
      : Error(ErrorKind::numerical, std::move(module), message, std::move(context)) {}
};

// A query fell outside a tabulated p-range; callers may rebuild wider tables.
class RangeError : public NumericalError {
 public:
  RangeError(std::string module, const std::string& message, double value, std::string context = {})
      : NumericalError(std::move(module), message, std::move(context)), value_(value) {}
  double value() const noexcept { return value_; }

 private:
  double value_;
};

class IoError : public Error {
 public:
  IoError(std::string module, const std::string& message, std::string context = {})
      : Error(ErrorKind::io, std::move(module), message, std::move(context)) {}
};

}  // namespace hrmm
