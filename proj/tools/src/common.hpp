// Copyright 2026 The knnmt-dual Authors
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
#include <functional>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "knnmt/context_file.hpp"
#include "knnmt/error.hpp"
#include "knnmt/datastore.hpp"
#include "knnmt/prediction.hpp"

namespace knnmt::cli {

using Json = nlohmann::ordered_json;

enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 2,
  kExitMissingInput = 3,
  kExitFormat = 4,
  kExitNumeric = 5,
};

class CliError : public std::runtime_error {
 public:
  CliError(int exit_code, const std::string& message)
      : std::runtime_error(message), exit_code_(exit_code) {}
  int exit_code() const noexcept { return exit_code_; }

 private:
  int exit_code_;
};

struct Context {
  std::ostream& out;
  std::ostream& err;
};

/// Tool version, seed and the resolved option values of one subcommand.
struct Header {
  std::string subcommand;
  std::uint64_t seed = 0;
  std::vector<std::pair<std::string, std::string>> config;
};

Header MakeHeader(const CLI::App& sub, std::uint64_t seed);
Json HeaderJson(const Header& header);
/// "# key=value" comment lines for CSV reports.
std::string HeaderCsv(const Header& header);

/// Writes `content` to `path` through a temp file and a rename; "-" means the
/// context's output stream.
void WriteReport(const Context& ctx, const std::string& path, const std::string& content);
std::string DumpJson(const Json& j);

void RequireInput(const std::string& path, const char* what);
/// Fails unless the directory that will receive `path` exists.
void RequireOutput(const std::string& path, const char* what);

// Loaders map library format errors to exit code 4 and keep missing files at 3.
Datastore LoadDatastoreFile(const std::string& path);
ContextCorpus LoadCorpusFile(const std::string& path);
Projection LoadProjectionFile(const std::string& path);
Json LoadJsonFile(const std::string& path);

Metric ParseMetricFlag(const std::string& text);

/// Adds --seed to `sub`, bound to `seed`.
void AddSeed(CLI::App* sub, std::uint64_t& seed, std::uint64_t fallback = 1);

void AddSynth(CLI::App& app, const Context& ctx);
void AddBuild(CLI::App& app, const Context& ctx);
void AddSearch(CLI::App& app, const Context& ctx);
void AddScore(CLI::App& app, const Context& ctx);
void AddDualCheck(CLI::App& app, const Context& ctx);
void AddGradCheck(CLI::App& app, const Context& ctx);
void AddFinetune(CLI::App& app, const Context& ctx);
void AddCompare(CLI::App& app, const Context& ctx);
void AddAnalyze(CLI::App& app, const Context& ctx);
void AddBench(CLI::App& app, const Context& ctx);

}  // namespace knnmt::cli
