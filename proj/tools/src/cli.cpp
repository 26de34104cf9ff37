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

#include "knnmt_cli/cli.hpp"

#include <ostream>

#include "common.hpp"

namespace knnmt::cli {

namespace {

int ExitFor(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument:
      return kExitUsage;
    case ErrorCode::kIo:
      return kExitMissingInput;
    case ErrorCode::kNonFinite:
      return kExitNumeric;
    default:
      return kExitFormat;
  }
}

}  // namespace

int Run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"kNN-MT datastore, dual-form and OPL fine-tuning toolkit", "knnmt"};
  app.set_version_flag("--version", KNNMT_VERSION);
  app.set_config("--config", "", "TOML/INI file supplying option values (flags take precedence)");
  app.require_subcommand(1, 1);
  app.fallthrough();

  const Context ctx{out, err};
  AddSynth(app, ctx);
  AddBuild(app, ctx);
  AddSearch(app, ctx);
  AddScore(app, ctx);
  AddDualCheck(app, ctx);
  AddGradCheck(app, ctx);
  AddFinetune(app, ctx);
  AddCompare(app, ctx);
  AddAnalyze(app, ctx);
  AddBench(app, ctx);

  try {
    app.parse(argc, argv);
  } catch (const CLI::FileError& e) {
    err << "knnmt: " << e.what() << "\n";
    return kExitMissingInput;
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  } catch (const CliError& e) {
    err << "knnmt: " << e.what() << "\n";
    return e.exit_code();
  } catch (const Error& e) {
    err << "knnmt: " << ErrorCodeName(e.code()) << ": " << e.what() << "\n";
    return ExitFor(e.code());
  } catch (const std::exception& e) {
    err << "knnmt: " << e.what() << "\n";
    return kExitFormat;
  }
  return kExitOk;
}

}  // namespace knnmt::cli
