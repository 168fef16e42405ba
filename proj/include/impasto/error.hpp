// Copyright 2026 The impasto Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef IMPASTO_ERROR_HPP_
#define IMPASTO_ERROR_HPP_

#include <stdexcept>
#include <string>

namespace impasto {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed tensors, mismatched extents, out-of-range pixel data.
class InvalidInput : public Error {
 public:
  using Error::Error;
};

class InvalidConfig : public Error {
 public:
  using Error::Error;
};

// The oracle does not provide the requested capability.
class UnsupportedOperation : public Error {
 public:
  using Error::Error;
};

// The oracle answered, but the answer is unusable (zero-norm embedding,
// non-finite gradient, remote error status, broken connection).
class OracleError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace impasto

#endif  // IMPASTO_ERROR_HPP_
