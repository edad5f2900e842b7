// Copyright 2026 The evchain Authors
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

#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "evchain/config.h"

namespace evchain {

/// Exit codes of the command-line tool.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitRuntime = 2;

/// A required stage artifact (model, screen cache) is missing.
class MissingArtifact : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Stage artifacts live under model_dir and are named by a fingerprint of
/// the corpus contents and every setting that shapes them, so models built
/// for one corpus or configuration are never silently reused for another.
struct ArtifactPaths {
  std::string screener;
  std::string screener_loss;
  std::string screens;
  std::string refiner;
  std::string refiner_loss;
};

ArtifactPaths artifact_paths(const RunConfig& cfg, const std::string& corpus_digest);

/// Hex digest of a file's bytes.
std::string file_digest(const std::string& path);

/// Entry point of the `evchain` tool; args[0] is the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace evchain
