/* Copyright 2026 The TimeMoE Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#pragma once

#include <stdexcept>
#include <string>

namespace timemoe {

// Root of every error thrown by the library. Each subclass names one failure
// class so callers (and the CLI) can map them to diagnostics.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define TIMEMOE_DEFINE_ERROR(Name)          \
  class Name : public Error {               \
   public:                                  \
    using Error::Error;                     \
  }

TIMEMOE_DEFINE_ERROR(ShapeError);
TIMEMOE_DEFINE_ERROR(NumericError);
TIMEMOE_DEFINE_ERROR(UsageError);
TIMEMOE_DEFINE_ERROR(ConfigError);
TIMEMOE_DEFINE_ERROR(DataError);
TIMEMOE_DEFINE_ERROR(FormatError);
TIMEMOE_DEFINE_ERROR(RangeError);
TIMEMOE_DEFINE_ERROR(ParseError);
TIMEMOE_DEFINE_ERROR(TrainingError);
TIMEMOE_DEFINE_ERROR(CompatibilityError);
TIMEMOE_DEFINE_ERROR(WindowingError);

#undef TIMEMOE_DEFINE_ERROR

}  // namespace timemoe
