// Copyright 2026 The TOWER Authors. All Rights Reserved.
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

namespace tower {

// Root of every error raised by the library. The CLI maps subclasses onto
// exit codes: validation errors exit 1, everything else exits 2.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad user input: config keys, flags, option values.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Argument outside the mathematical domain of an operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

// Malformed or out-of-range data (pixels, shapes, labels).
class DataError : public Error {
 public:
  using Error::Error;
};

// API misuse: backward before forward, missing caches, missing gradients.
class UsageError : public Error {
 public:
  using Error::Error;
};

// Non-finite values or degenerate inputs such as zero-norm vectors.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Binary file format violations (IDX, checkpoints, PNG).
class FormatError : public Error {
 public:
  using Error::Error;
};

// Dataset ingestion failures; the message names the row or file.
class IngestionError : public DataError {
 public:
  using DataError::DataError;
};

// A class has no representatives after label-fraction subsampling.
class StratificationError : public DataError {
 public:
  using DataError::DataError;
};

// A metric is undefined for the given labels (e.g. AUC with one class).
class MetricError : public DataError {
 public:
  using DataError::DataError;
};

}  // namespace tower
