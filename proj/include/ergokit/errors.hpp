#pragma once

#include <stdexcept>
#include <string>

namespace ergokit {

/// Base class for every error raised by the toolkit.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// A precondition on sizes, ranges or parameters was violated by the caller.
class ContractViolation : public Error {
public:
  using Error::Error;
};

/// A simulated state became non-finite or left the divergence ball.
class DivergedTrajectory : public Error {
public:
  DivergedTrajectory(const std::string& what, long step)
      : Error(what + " (at t=" + std::to_string(step) + ")"), step_(step) {}
  long step() const noexcept { return step_; }

private:
  long step_;
};

/// An iterative procedure (series, power iteration) did not reach its tolerance.
class NonConvergence : public Error {
public:
  NonConvergence(const std::string& what, double last_term)
      : Error(what), last_term_(last_term) {}
  double last_term() const noexcept { return last_term_; }

private:
  double last_term_;
};

/// The quadrature grid does not cover the essential support of the kernel.
class GridTooSmall : public Error {
public:
  GridTooSmall(const std::string& what, double leak) : Error(what), leak_(leak) {}
  double leak() const noexcept { return leak_; }

private:
  double leak_;
};

/// A numerical linear-algebra routine failed (singular system, eigensolve).
class NumericalFailure : public Error {
public:
  using Error::Error;
};

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw ContractViolation(msg);
}

}  // namespace ergokit
