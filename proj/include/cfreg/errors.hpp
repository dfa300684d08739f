/*
Copyright 2026 the cfreg contributors
Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at
    http://www.apache.org/licenses/LICENSE-2.0
Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
*/
#pragma once

#include <stdexcept>
#include <string>

namespace cfreg {

/// Base class for all cfreg errors.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Mismatched or invalid tensor/volume dimensions.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// Malformed file contents (bad magic, truncated payload, bad descriptor).
class FormatError : public Error {
public:
    using Error::Error;
};

/// File uses a datatype code the reader does not support.
class UnsupportedDtypeError : public FormatError {
public:
    using FormatError::FormatError;
};

/// Input violates a numeric precondition (e.g. constant volume to normalize).
class DegenerateInputError : public Error {
public:
    using Error::Error;
};

/// Invalid configuration values or combinations.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// On-disk dataset problems: missing files, inconsistent manifests.
class DataError : public Error {
public:
    using Error::Error;
};

/// Non-finite values where finite ones are required (e.g. training loss).
class NumericalError : public Error {
public:
    using Error::Error;
};

/// A randomized generator exhausted its retry budget.
class GenerationError : public Error {
public:
    using Error::Error;
};

/// Filesystem failures, annotated with the offending path.
class IoError : public Error {
public:
    using Error::Error;
};

} // namespace cfreg
