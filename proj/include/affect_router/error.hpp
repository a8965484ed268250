#pragma once

#include <stdexcept>
#include <string>

namespace affect_router {

// Exception hierarchy. The CLI maps each kind to a process exit code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input document (XML, JSON, CSV, TOML).
class ParseError : public Error {
 public:
  using Error::Error;
};

/// A value or file violates a documented invariant.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// A context provider could not answer for a location.
class ProviderError : public Error {
 public:
  ProviderError(std::string provider, const std::string& what)
      : Error(provider + ": " + what), provider_(std::move(provider)) {}
  const std::string& provider() const noexcept { return provider_; }

 private:
  std::string provider_;
};

/// Target not reachable from source.
class NoRouteError : public Error {
 public:
  NoRouteError() : Error("no route") {}
};

/// OD sampling ran out of attempts.
class SimulationError : public Error {
 public:
  using Error::Error;
};

/// The HTTP server could not start (for example, the port is taken).
class ServiceError : public Error {
 public:
  using Error::Error;
};

/// Bad command-line or configuration input.
class UsageError : public Error {
 public:
  using Error::Error;
};

}  // namespace affect_router
