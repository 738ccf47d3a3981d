// Copyright (c) 2026 deitsp contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace deitsp {

// Base for everything thrown on purpose by this library. The CLI maps each
// subtree to a distinct exit code; anything else escaping is a bug.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Caller misuse: bad flag combinations, out-of-range arguments, contradictory
// configuration. Exit code 2.
struct UsageError : Error {
  using Error::Error;
};

// Configuration that parses but contradicts itself (e.g. an iteration
// schedule that collapses to duplicate timesteps). Still exit code 2.
struct ConfigError : UsageError {
  using UsageError::UsageError;
};

// Malformed or inconsistent input data (datasets, TSPLIB files, checkpoints,
// results files). Exit code 3.
struct DataError : Error {
  using Error::Error;
};

// Input parsed fine but uses a feature we deliberately don't handle, such as
// a non-EUC_2D TSPLIB edge weight type. Exit code 3.
struct UnsupportedFormatError : DataError {
  using DataError::DataError;
};

// Instance outside the exact-solver range (Held-Karp handles 3..16 nodes).
// Exit code 4.
struct SizeError : Error {
  using Error::Error;
};

// Non-finite value where a finite one is required: NaN/Inf loss, gradient,
// or activation. Message names the offending quantity. Exit code 5.
struct NumericError : Error {
  using Error::Error;
};

// Tensor shape mismatch. A programming error in practice, so it shares the
// usage exit code.
struct ShapeError : UsageError {
  using UsageError::UsageError;
};

}  // namespace deitsp
