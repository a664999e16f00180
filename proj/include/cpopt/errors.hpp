#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace cpopt {

/// Base class of every error raised by the engine.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A simulated path left the representable range.
class NonFiniteState : public Error {
 public:
  NonFiniteState(std::size_t path, std::size_t step)
      : Error("non-finite state on path " + std::to_string(path) + " at step " +
              std::to_string(step)),
        path_(path),
        step_(step) {}
  std::size_t path() const noexcept { return path_; }
  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t path_;
  std::size_t step_;
};

class UnsupportedEnlargement : public Error {
 public:
  using Error::Error;
};

class DegenerateLikelihood : public Error {
 public:
  using Error::Error;
};

class OutOfRange : public Error {
 public:
  using Error::Error;
};

class NoConvergence : public Error {
 public:
  using Error::Error;
};

class BracketFailure : public Error {
 public:
  using Error::Error;
};

class NonFinite : public Error {
 public:
  using Error::Error;
};

/// The risk benchmark is below the smallest attainable expected loss.
class Infeasible : public Error {
 public:
  Infeasible(const std::string& what, double eps, double eps_min)
      : Error(what), eps_(eps), eps_min_(eps_min) {}
  double eps() const noexcept { return eps_; }
  double eps_min() const noexcept { return eps_min_; }

 private:
  double eps_;
  double eps_min_;
};

class Unattainable : public Error {
 public:
  using Error::Error;
};

class QuadratureFailure : public Error {
 public:
  using Error::Error;
};

class IllConditioned : public Error {
 public:
  using Error::Error;
};

class OrderViolation : public Error {
 public:
  using Error::Error;
};

class NoRoot : public Error {
 public:
  NoRoot(const std::string& what, double lo, double hi)
      : Error(what), lo_(lo), hi_(hi) {}
  double lo() const noexcept { return lo_; }
  double hi() const noexcept { return hi_; }

 private:
  double lo_;
  double hi_;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace cpopt
