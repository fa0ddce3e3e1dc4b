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

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace tower::cli {

// Record appended to manifest.txt in the run directory for every command.
struct RunManifest {
  std::string command;
  std::string version;
  std::uint64_t seed = 0;
  std::uint64_t dataset_hash = 0;
  std::string config;
  std::vector<std::string> outputs;

  std::string to_text() const;
};

void append_manifest(const std::filesystem::path& run_dir, const RunManifest& manifest);

// Parses argv and runs one subcommand. Returns 0 on success, 1 on usage or
// configuration errors and 2 on runtime failures, in which case the
// diagnostic is also written to error.log in the run directory.
int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace tower::cli
