// Copyright 2026 The tocomm Authors.
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

#ifndef TOCOMM_ERRORS_HPP_
#define TOCOMM_ERRORS_HPP_

#include <cstddef>
#include <stdexcept>
#include <string>

namespace tocomm {

// Root of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad argument or precondition violation (out-of-range probability, k < 2, ...).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

// Malformed file contents (IDX magic, truncated payload, CSV header).
class FormatError : public Error {
 public:
  using Error::Error;
};

// Two inputs that are individually fine but disagree (image/label counts).
class ConsistencyError : public Error {
 public:
  using Error::Error;
};

// Operation requested in a transmission/encoder mode that cannot support it.
class ModeError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// Numerical failure during an iterative procedure.
class TrainingFailure : public Error {
 public:
  TrainingFailure(const std::string& what, std::size_t step)
      : Error(what + " (step " + std::to_string(step) + ")"), step_(step) {}
  std::size_t step() const { return step_; }

 private:
  std::size_t step_;
};

class RankDeficientError : public Error {
 public:
  RankDeficientError(std::size_t rank, std::size_t dim)
      : Error("normal matrix is rank deficient: rank " + std::to_string(rank) +
              " of " + std::to_string(dim)),
        rank_(rank),
        dim_(dim) {}
  std::size_t rank() const { return rank_; }
  std::size_t dim() const { return dim_; }

 private:
  std::size_t rank_;
  std::size_t dim_;
};

}  // namespace tocomm

#endif  // TOCOMM_ERRORS_HPP_
