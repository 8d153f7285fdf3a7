// Copyright 2026 The scengen Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace scengen {

/// Invalid configuration, bad arguments, failed validation. CLI exit code 2.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Filesystem / parsing failures. CLI exit code 3.
struct IoError : std::runtime_error {
  explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Numerical abort (NaN/Inf detected mid-run). CLI exit code 4.
struct NumericError : std::runtime_error {
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Unreadable or truncated model artifact. CLI exit code 5.
struct CorruptArtifactError : std::runtime_error {
  explicit CorruptArtifactError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace scengen
