// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace augal {

/// Invalid configuration: bad scenario fields, incompatible shapes at graph
/// build time, unknown architecture or config key.
class ConfigError : public std::runtime_error {
  public:
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

/// API contract violation by the caller (non-scalar loss, missing gradient,
/// invalid class id, mismatched image shapes).
class UsageError : public std::runtime_error {
  public:
    explicit UsageError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Malformed file content (IDX/CIFAR/checkpoint). Message carries the byte
/// offset where parsing failed when known.
class FormatError : public std::runtime_error {
  public:
    explicit FormatError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Non-finite value where the contract requires finite math.
class NumericError : public std::runtime_error {
  public:
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Runtime failure of a training run (divergence), with coordinates.
class RunError : public std::runtime_error {
  public:
    explicit RunError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace augal
