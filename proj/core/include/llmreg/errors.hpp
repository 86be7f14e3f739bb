#pragma once

#include <stdexcept>
#include <string>

namespace llmreg {

// Base class for all library errors. Subclasses exist where callers need to
// branch on the failure kind (transport vs. replay miss vs. bad input).
struct Error : std::runtime_error {
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Malformed files, bad CSV cells, duplicate registry names, bad expressions.
struct ParseError : Error {
  using Error::Error;
};

// Violated preconditions: shape mismatches, invalid configuration values.
struct InvalidArgument : Error {
  using Error::Error;
};

// LLM gateway failures.
struct GatewayError : Error {
  using Error::Error;
};

struct TransportError : GatewayError {
  using GatewayError::GatewayError;
};

struct ReplayMissError : GatewayError {
  explicit ReplayMissError(const std::string& hash)
      : GatewayError("replay store has no transcript for request hash " + hash),
        missing_hash(hash) {}
  std::string missing_hash;
};

struct ConvergenceError : Error {
  ConvergenceError(const std::string& what, double gradient_norm)
      : Error(what), residual_gradient_norm(gradient_norm) {}
  double residual_gradient_norm;
};

}  // namespace llmreg
