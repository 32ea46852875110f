// Copyright 2026 The Varflow Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef VARFLOW_ERROR_HPP_
#define VARFLOW_ERROR_HPP_

#include <stdexcept>
#include <string>

namespace varflow {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A precondition on an argument was violated (shape mismatch, index out of
// range, NaN input, bad configuration value).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// A quantity that would be infinite or undefined was requested, e.g. the
// reveal hazard at t -> 1.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

// Non-finite loss, gradient or model output.
class NumericalError : public Error {
 public:
  using Error::Error;
};

// Failures while reading or writing dataset, checkpoint and config files.
class DataError : public Error {
 public:
  enum class Kind { kIo, kBadMagic, kVersionMismatch, kTruncated, kShape, kParse };

  DataError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}

  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

}  // namespace varflow

#endif  // VARFLOW_ERROR_HPP_
