// Copyright (C) 2026 The starmem Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace starmem {

/// Invalid MemoryConfig, or a pooling request the config forbids.
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Caller broke a precondition (shape mismatch, bad weight, wrong length).
class ContractViolation : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// Frame indices or timestamps that do not strictly increase.
class OrderingError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Snapshot requested before any frame was written.
class EmptyMemoryError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Breakpoint window selected no frames.
class EmptyWindowError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed stream, snapshot, config or script file.
class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Internal invariant failed at runtime. Always a bug.
class InvariantBreach : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

#define STARMEM_EXPECT(cond, msg)                                                   \
    do {                                                                            \
        if (!(cond)) throw ::starmem::ContractViolation(std::string(msg));          \
    } while (0)

}  // namespace starmem
