// Copyright 2026 The Agentic Slicing Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef SLICING_ERROR_HPP_
#define SLICING_ERROR_HPP_

#include <cstddef>
#include <stdexcept>
#include <string>

namespace slicing {

// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A caller broke a documented precondition (negative allocation, bad index).
class ContractViolation : public Error {
 public:
  using Error::Error;
};

// Malformed input text. `line` / `offset` are 1-based when known, 0 otherwise.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line = 0,
             std::size_t offset = 0)
      : Error(what), line_(line), offset_(offset) {}
  std::size_t line() const { return line_; }
  std::size_t offset() const { return offset_; }

 private:
  std::size_t line_;
  std::size_t offset_;
};

// Well-formed input that fails a semantic check.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// A configuration key is missing or holds an invalid value. `key()` is the
// full dotted key path.
class ConfigError : public Error {
 public:
  ConfigError(const std::string& key, const std::string& what)
      : Error(key + ": " + what), key_(key) {}
  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

// Non-finite loss or parameters during learning.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

// The step protocol could not complete (missing agent action, timeout).
class OrchestrationFault : public Error {
 public:
  using Error::Error;
};

}  // namespace slicing

#endif  // SLICING_ERROR_HPP_
