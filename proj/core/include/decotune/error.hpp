// Copyright 2026 The decotune Authors
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

#pragma once

#include <stdexcept>
#include <string>

namespace decotune {

/// Root of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed knob schema or configuration-space construction.
class SpecError : public Error {
 public:
  using Error::Error;
};

/// A value falls outside its knob's domain.
class DomainError : public Error {
 public:
  DomainError(std::string knob, const std::string& what)
      : Error("knob '" + knob + "': " + what), knob_(std::move(knob)) {}
  const std::string& knob() const noexcept { return knob_; }

 private:
  std::string knob_;
};

class ParseError : public Error {
 public:
  using Error::Error;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

}  // namespace decotune
