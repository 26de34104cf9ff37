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

#include "common.hpp"

#include <fstream>
#include <ostream>
#include <sstream>

#ifndef KNNMT_VERSION
#define KNNMT_VERSION "0.0.0"
#endif

namespace knnmt::cli {
namespace fs = std::filesystem;

namespace {

std::string OptionValue(const CLI::Option* opt) {
  if (opt->get_type_size() == 0) return opt->count() > 0 ? "true" : "false";
  if (opt->count() == 0) return opt->get_default_str();
  std::string joined;
  for (const auto& r : opt->results()) {
    if (!joined.empty()) joined += ",";
    joined += r;
  }
  return joined;
}

template <typename F>
auto MapFormatErrors(const std::string& path, F&& load) {
  try {
    return load();
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kIo) throw CliError(kExitMissingInput, e.what());
    if (e.code() == ErrorCode::kNonFinite) throw CliError(kExitNumeric, path + ": " + e.what());
    throw CliError(kExitFormat, path + ": " + e.what());
  }
}

}  // namespace

Header MakeHeader(const CLI::App& sub, std::uint64_t seed) {
  Header h;
  h.subcommand = sub.get_name();
  h.seed = seed;
  for (const CLI::Option* opt : sub.get_options()) {
    const std::string name = opt->get_single_name();
    if (name == "help" || name.empty()) continue;
    h.config.emplace_back(name, OptionValue(opt));
  }
  return h;
}

Json HeaderJson(const Header& header) {
  Json config = Json::object();
  for (const auto& [k, v] : header.config) config[k] = v;
  return Json{{"tool", "knnmt"},
              {"version", KNNMT_VERSION},
              {"subcommand", header.subcommand},
              {"seed", header.seed},
              {"config", config}};
}

std::string HeaderCsv(const Header& header) {
  std::ostringstream os;
  os << "# tool=knnmt version=" << KNNMT_VERSION << " subcommand=" << header.subcommand
     << " seed=" << header.seed << "\n";
  for (const auto& [k, v] : header.config) os << "# " << k << "=" << v << "\n";
  return os.str();
}

std::string DumpJson(const Json& j) { return j.dump(2) + "\n"; }

void WriteReport(const Context& ctx, const std::string& path, const std::string& content) {
  if (path == "-") {
    ctx.out << content;
    ctx.out.flush();
    return;
  }
  const fs::path target(path);
  fs::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw CliError(kExitMissingInput, "cannot write report: " + tmp.string());
    os << content;
    if (!os) throw CliError(kExitMissingInput, "write failed: " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw CliError(kExitMissingInput, "cannot rename report into place: " + path);
  }
}

void RequireInput(const std::string& path, const char* what) {
  std::error_code ec;
  if (path.empty() || !fs::is_regular_file(path, ec)) {
    throw CliError(kExitMissingInput, std::string("missing ") + what + ": " + path);
  }
}

void RequireOutput(const std::string& path, const char* what) {
  if (path == "-") return;
  if (path.empty()) throw CliError(kExitUsage, std::string("empty path for ") + what);
  const fs::path parent = fs::path(path).parent_path();
  std::error_code ec;
  if (!parent.empty() && !fs::is_directory(parent, ec)) {
    throw CliError(kExitMissingInput,
                   std::string("output directory for ") + what + " does not exist: " +
                       parent.string());
  }
}

Datastore LoadDatastoreFile(const std::string& path) {
  RequireInput(path, "datastore");
  return MapFormatErrors(path, [&] { return Datastore::Load(path); });
}

ContextCorpus LoadCorpusFile(const std::string& path) {
  RequireInput(path, "context-pair file");
  return MapFormatErrors(path, [&] { return LoadContextCorpus(path); });
}

Projection LoadProjectionFile(const std::string& path) {
  RequireInput(path, "projection");
  return MapFormatErrors(path, [&] { return LoadProjection(path); });
}

Json LoadJsonFile(const std::string& path) {
  RequireInput(path, "JSON file");
  std::ifstream in(path);
  if (!in) throw CliError(kExitMissingInput, "cannot open " + path);
  try {
    return Json::parse(in);
  } catch (const Json::exception& e) {
    throw CliError(kExitFormat, path + ": " + e.what());
  }
}

Metric ParseMetricFlag(const std::string& text) {
  try {
    return ParseMetric(text);
  } catch (const Error& e) {
    throw CliError(kExitUsage, e.what());
  }
}

void AddSeed(CLI::App* sub, std::uint64_t& seed, std::uint64_t fallback) {
  seed = fallback;
  sub->add_option("--seed", seed, "Random seed")->capture_default_str();
}

}  // namespace knnmt::cli
