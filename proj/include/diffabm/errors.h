// Copyright 2026 The diffabm Authors
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

#ifndef DIFFABM_ERRORS_H_
#define DIFFABM_ERRORS_H_

#include <cstddef>
#include <stdexcept>
#include <string>

namespace diffabm {

// Root of every error raised by the library. The CLI maps subclasses onto
// exit codes, so new error kinds should derive from one of the groups below.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Numerical / contract violations inside the computation graph.
class NonFiniteInput : public Error {
 public:
  using Error::Error;
};
class ShapeMismatch : public Error {
 public:
  using Error::Error;
};
class DomainError : public Error {
 public:
  using Error::Error;
};
class NotScalar : public Error {
 public:
  using Error::Error;
};
class DetachedTensor : public Error {
 public:
  using Error::Error;
};
class InconsistentState : public Error {
 public:
  using Error::Error;
};

// Input data problems. All of these map to the "data error" exit code.
class DataError : public Error {
 public:
  using Error::Error;
};
class InvalidSpec : public DataError {
 public:
  using DataError::DataError;
};
class ConfigError : public DataError {
 public:
  using DataError::DataError;
};
class IntegrityError : public DataError {
 public:
  using DataError::DataError;
};
class LengthMismatch : public DataError {
 public:
  using DataError::DataError;
};
class WeekRangeMismatch : public DataError {
 public:
  using DataError::DataError;
};
class EmptySeries : public DataError {
 public:
  using DataError::DataError;
};
class UnknownAttribute : public DataError {
 public:
  using DataError::DataError;
};

class ParseError : public DataError {
 public:
  ParseError(const std::string& file, std::size_t line, const std::string& what)
      : DataError(file + ":" + std::to_string(line) + ": " + what),
        line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// Raised by the optimizer when the loss stops being finite.
class DivergenceError : public Error {
 public:
  DivergenceError(int iteration, const std::string& what)
      : Error("diverged at iteration " + std::to_string(iteration) + ": " +
              what),
        iteration_(iteration) {}
  int iteration() const { return iteration_; }

 private:
  int iteration_;
};

}  // namespace diffabm

#endif  // DIFFABM_ERRORS_H_
