#pragma once

#include <stdexcept>
#include <string>

namespace weyllab {

// A precondition was not met; the CLI maps this to exit code 2.
class Refusal : public std::runtime_error {
 public:
  explicit Refusal(const std::string& what) : std::runtime_error(what) {}
};

// A computed certificate did not hold; the CLI maps this to exit code 3.
class CertificateFailure : public std::runtime_error {
 public:
  explicit CertificateFailure(const std::string& what)
      : std::runtime_error(what) {}
};

}  // namespace weyllab
