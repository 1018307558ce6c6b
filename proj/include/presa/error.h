// Copyright 2026 The presa Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef PRESA_ERROR_H_
#define PRESA_ERROR_H_

#include <cstddef>
#include <stdexcept>
#include <string>

namespace presa {

// Invalid or degenerate configuration (bad spec, empty class, bad range).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// API misuse by the caller: shape mismatch, stepping a finished episode,
// empty batch.
class UsageError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Non-finite value encountered during scoring or training.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Operation not defined for this environment kind (e.g. DP on point-mass).
class UnsupportedError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed file contents. `line()` is 1-based, 0 when not line-oriented.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : std::runtime_error(line == 0 ? what
                                     : "line " + std::to_string(line) + ": " +
                                           what),
        line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

}  // namespace presa

#endif  // PRESA_ERROR_H_
