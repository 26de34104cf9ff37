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

#include <cmath>
#include <memory>
#include <sstream>

#include "common.hpp"
#include "knnmt/checks.hpp"

namespace knnmt::cli {

void AddDualCheck(CLI::App& app, const Context& ctx) {
  struct Opts {
    DualCheckLimits limits;
    std::size_t trials = 1000;
    double tol = 1e-6;
    std::string out = "-";
    std::uint64_t seed = 1;
  };
  auto o = std::make_shared<Opts>();
  CLI::App* sub = app.add_subcommand(
      "dual-check", "Residual between the dual-form output and the interpolated relaxed forms");
  sub->add_option("--trials", o->trials, "Random instances")->capture_default_str();
  sub->add_option("--max-dim", o->limits.max_dim, "Largest d_in")->capture_default_str();
  sub->add_option("--max-vocab", o->limits.max_vocab, "Largest |Y|")->capture_default_str();
  sub->add_option("--max-k", o->limits.max_k, "Largest k")->capture_default_str();
  sub->add_option("--temperatures", o->limits.temperatures, "Temperature pool")
      ->delimiter(',')
      ->capture_default_str();
  sub->add_option("--tol", o->tol, "Largest accepted residual")->capture_default_str();
  sub->add_option("--out", o->out, "CSV path, - for stdout")->capture_default_str();
  AddSeed(sub, o->seed);

  sub->callback([o, sub, ctx] {
    RequireOutput(o->out, "report");
    std::vector<DualCheckRow> rows;
    try {
      rows = RunDualCheck(o->trials, o->seed, o->limits);
    } catch (const Error& e) {
      throw CliError(kExitUsage, e.what());
    }
    std::ostringstream os;
    os << HeaderCsv(MakeHeader(*sub, o->seed)) << "seed,d_in,vocab,k,lambda,T,residual\n";
    os.precision(17);
    std::size_t failures = 0;
    for (const auto& r : rows) {
      os << r.seed << "," << r.dim << "," << r.vocab << "," << r.k << "," << r.lambda << ","
         << r.temperature << "," << r.residual << "\n";
      if (!(r.residual <= o->tol)) ++failures;
    }
    WriteReport(ctx, o->out, os.str());
    if (failures > 0) {
      throw CliError(kExitNumeric,
                     std::to_string(failures) + " residual(s) above " + std::to_string(o->tol));
    }
  });
}

void AddGradCheck(CLI::App& app, const Context& ctx) {
  struct Opts {
    GradCheckLimits limits;
    std::size_t trials = 100;
    double tol = 1e-5;
    std::string out = "-";
    std::uint64_t seed = 1;
  };
  auto o = std::make_shared<Opts>();
  CLI::App* sub = app.add_subcommand(
      "grad-check", "Analytic OPL gradient against central finite differences");
  sub->add_option("--trials", o->trials, "Random instances")->capture_default_str();
  sub->add_option("--max-dim", o->limits.max_dim, "Largest d_in")->capture_default_str();
  sub->add_option("--max-vocab", o->limits.max_vocab, "Largest |Y|")->capture_default_str();
  sub->add_option("--max-k", o->limits.max_k, "Largest k")->capture_default_str();
  sub->add_option("--alphas", o->limits.alphas, "l2 coefficients, cycled over trials")
      ->delimiter(',')
      ->capture_default_str();
  sub->add_option("--epsilon", o->limits.epsilon, "Finite-difference step")
      ->capture_default_str();
  sub->add_option("--rel-floor", o->limits.rel_floor, "Relative-error denominator floor")
      ->capture_default_str();
  sub->add_option("--tol", o->tol, "Largest accepted relative error")->capture_default_str();
  sub->add_option("--out", o->out, "CSV path, - for stdout")->capture_default_str();
  AddSeed(sub, o->seed);

  sub->callback([o, sub, ctx] {
    RequireOutput(o->out, "report");
    std::vector<GradCheckRow> rows;
    try {
      rows = RunGradCheck(o->trials, o->seed, o->limits);
    } catch (const Error& e) {
      throw CliError(kExitUsage, e.what());
    }
    std::ostringstream os;
    os << HeaderCsv(MakeHeader(*sub, o->seed))
       << "seed,d_in,vocab,k,alpha,max_rel_error,max_abs_error\n";
    os.precision(17);
    std::size_t failures = 0;
    for (const auto& r : rows) {
      os << r.seed << "," << r.dim << "," << r.vocab << "," << r.k << "," << r.alpha << ","
         << r.max_rel_error << "," << r.max_abs_error << "\n";
      if (!(r.max_rel_error <= o->tol)) ++failures;
    }
    WriteReport(ctx, o->out, os.str());
    if (failures > 0) {
      throw CliError(kExitNumeric, std::to_string(failures) + " instance(s) above tolerance");
    }
  });
}

}  // namespace knnmt::cli
