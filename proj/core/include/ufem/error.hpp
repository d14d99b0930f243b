// core/include/ufem/error.hpp

// Copyright 2026  The ufem authors

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

#ifndef UFEM_ERROR_HPP_
#define UFEM_ERROR_HPP_

#include <stdexcept>
#include <string>

namespace ufem {

/// Base class for every error raised by this library.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Bad argument, shape mismatch, tap ordering violation, schema violation.
class InvalidArgument : public Error {
 public:
  explicit InvalidArgument(const std::string& msg) : Error(msg) {}
};

/// Missing/corrupt files, digest mismatches, unreadable images.
class IoError : public Error {
 public:
  explicit IoError(const std::string& msg) : Error(msg) {}
};

/// Non-finite loss during optimization; carries the batch seed so the
/// offending batch can be replayed.
class TrainingDiverged : public Error {
 public:
  TrainingDiverged(const std::string& msg, long long step, unsigned long long batch_seed)
      : Error(msg), step(step), batch_seed(batch_seed) {}
  long long step;
  unsigned long long batch_seed;
};

#define UFEM_CHECK(cond, msg)                      \
  do {                                             \
    if (!(cond)) throw ::ufem::InvalidArgument(msg); \
  } while (0)

}  // namespace ufem

#endif  // UFEM_ERROR_HPP_
