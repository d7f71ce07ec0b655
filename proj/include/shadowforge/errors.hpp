// Copyright 2026 The ShadowForge Authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at

//     http://www.apache.org/licenses/LICENSE-2.0

// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <stdexcept>
#include <string>

namespace shadowforge {

/// Precondition violated by the caller (bad sizes, indices, configs).
class InvalidArgument : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

/// A numerical routine failed: eigensolver did not converge, loss became NaN.
class NumericalFailure : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Malformed input file. The message carries the offending line number.
class ParseError : public std::runtime_error {
  public:
    ParseError(const std::string &source, std::size_t line, const std::string &what)
        : std::runtime_error(source + ":" + std::to_string(line) + ": " + what), line_(line) {}

    [[nodiscard]] std::size_t line() const noexcept { return line_; }

  private:
    std::size_t line_;
};

class VersionError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Raised when code running in training mode touches held-out test data.
class AccessError : public std::logic_error {
  public:
    using std::logic_error::logic_error;
};

/// R^2 and friends are undefined when the reference has no spread.
class UndefinedMetric : public std::domain_error {
  public:
    using std::domain_error::domain_error;
};

} // namespace shadowforge
