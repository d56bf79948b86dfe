/**
 * Copyright 2026, The oifuse Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace oifuse {

enum class ErrorCode {
  InvalidArgument,
  LengthMismatch,
  EmptyArchive,
  GeometryMismatch,
  NoOverlap,
  UnsortedInput,
  InsufficientData,
  EmptyInput,
  ConfigInvalid,
  Io,
  Format,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::EmptyArchive: return "EmptyArchive";
    case ErrorCode::GeometryMismatch: return "GeometryMismatch";
    case ErrorCode::NoOverlap: return "NoOverlap";
    case ErrorCode::UnsortedInput: return "UnsortedInput";
    case ErrorCode::InsufficientData: return "InsufficientData";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::ConfigInvalid: return "ConfigInvalid";
    case ErrorCode::Io: return "Io";
    case ErrorCode::Format: return "Format";
  }
  return "Unknown";
}

/// All recoverable failures raised by the library carry one of the codes
/// above; anything else escaping an operation is a bug.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace oifuse
