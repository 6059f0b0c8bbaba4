// SPDX-License-Identifier: Apache-2.0
// Copyright (c) the kahc project authors.
//
// Common error taxonomy and small shared aliases for the kahc library.

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace kahc {

/// Base class for every error thrown by the library.
class error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A caller passed a value outside an operation's documented domain.
class argument_error : public error {
 public:
  using error::error;
};

/// Text input could not be parsed; the message names the offending row.
class parse_error : public error {
 public:
  using error::error;
};

/// Input was readable but structurally invalid (wrong arity, empty file, ...).
class structural_error : public error {
 public:
  using error::error;
};

/// The requested operation is not defined for the given object
/// (e.g. asking for a dendrogram from an algorithm that never builds one).
class unsupported_operation : public error {
 public:
  using error::error;
};

using index_t = std::size_t;

}  // namespace kahc
