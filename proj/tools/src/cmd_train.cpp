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

#include <algorithm>
#include <chrono>
#include <cmath>
#include <memory>
#include <sstream>

#include "common.hpp"
#include "knnmt/analysis.hpp"
#include "knnmt/experiments.hpp"
#include "knnmt/opl_finetune.hpp"

namespace knnmt::cli {
namespace fs = std::filesystem;

namespace {

Json FiniteOrNull(double x) { return std::isfinite(x) ? Json(x) : Json(nullptr); }

GoldProbSeries LoadSeries(const std::string& path) {
  const Json j = LoadJsonFile(path);
  GoldProbSeries s;
  try {
    s.variant = j.at("variant").get<std::string>();
    s.probs = j.at("probs").get<std::vector<double>>();
  } catch (const Json::exception& e) {
    throw CliError(kExitFormat, path + ": not a score series: " + e.what());
  }
  return s;
}

Json PrfJson(const std::vector<BucketPrf>& rows) {
  Json out = Json::array();
  for (const auto& r : rows) {
    out.push_back({{"bucket", r.label},
                   {"words", r.n_words},
                   {"ref_count", r.ref_count},
                   {"precision", r.precision},
                   {"recall", r.recall},
                   {"f1", r.f1}});
  }
  return out;
}

Json SummaryJson(const std::vector<BucketSummary>& rows) {
  Json out = Json::array();
  for (const auto& r : rows) {
    out.push_back({{"bucket", r.label}, {"words", r.n_words}, {"mean", r.mean}, {"std", r.stddev}});
  }
  return out;
}

double Median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

void AddFinetune(CLI::App& app, const Context& ctx) {
  struct Opts {
    std::string projection, train, val, out = "-", save_projection, mode = "full";
    GridSpec grid = GridSpec::Default();
    FtHyper ft{.lr = 0.1, .alpha = 0.0, .steps = 500, .batch = 32, .eval_interval = 50, .seed = 1};
    std::uint64_t seed = 1;
  };
  auto o = std::make_shared<Opts>();
  CLI::App* sub = app.add_subcommand("finetune", "Grid-searched full-data OPL fine-tuning");
  sub->add_option("--projection", o->projection, "Starting projection (KNPJ)")->required();
  sub->add_option("--train", o->train, "Training pairs (KNCP)")->required();
  sub->add_option("--val", o->val, "Validation pairs (KNCP)")->required();
  sub->add_option("--lr-grid", o->grid.lr_candidates, "Learning-rate candidates")
      ->delimiter(',')
      ->capture_default_str();
  sub->add_option("--alpha-grid", o->grid.alpha_candidates, "l2 coefficient candidates")
      ->delimiter(',')
      ->capture_default_str();
  sub->add_option("--mode", o->mode, "full (every lr x alpha) or staged (lr, then alpha)")
      ->check(CLI::IsMember({"full", "staged"}))
      ->capture_default_str();
  sub->add_option("--steps", o->ft.steps, "SGD steps per run")->capture_default_str();
  sub->add_option("--batch", o->ft.batch, "Mini-batch size")->capture_default_str();
  sub->add_option("--eval-interval", o->ft.eval_interval, "Steps between validations")
      ->capture_default_str();
  sub->add_option("--save-projection", o->save_projection,
                  "Write the projection trained with the selected hyper-parameters");
  sub->add_option("--out", o->out, "JSON report path, - for stdout")->capture_default_str();
  AddSeed(sub, o->seed);

  sub->callback([o, sub, ctx] {
    RequireInput(o->projection, "projection");
    RequireInput(o->train, "training pairs");
    RequireInput(o->val, "validation pairs");
    RequireOutput(o->out, "report");
    if (!o->save_projection.empty()) RequireOutput(o->save_projection, "projection");
    o->ft.seed = o->seed;
    try {
      ValidateFtHyper(o->ft);
    } catch (const Error& e) {
      throw CliError(kExitUsage, e.what());
    }
    if (o->grid.lr_candidates.empty() || o->grid.alpha_candidates.empty()) {
      throw CliError(kExitUsage, "empty grid");
    }
    const Projection proj = LoadProjectionFile(o->projection);
    const ContextCorpus train = LoadCorpusFile(o->train);
    const ContextCorpus val = LoadCorpusFile(o->val);
    if (train.dim != proj.dim() || val.dim != proj.dim() ||
        train.vocab_size != proj.vocab_size() || val.vocab_size != proj.vocab_size()) {
      throw CliError(kExitFormat, "projection and pair files disagree on dim/vocab_size");
    }
    const GridMode mode = o->mode == "full" ? GridMode::kFull : GridMode::kStaged;
    const GridResult result = GridSearch(proj, train.pairs, val.pairs, o->grid, o->ft, mode);
    if (!std::isfinite(result.best_val_ppl)) {
      throw CliError(kExitNumeric, "every grid cell diverged");
    }
    Json cells = Json::array();
    for (const auto& c : result.cells) {
      cells.push_back({{"lr", c.lr}, {"alpha", c.alpha}, {"val_ppl", FiniteOrNull(c.val_ppl)}});
    }
    Json report{{"header", HeaderJson(MakeHeader(*sub, o->seed))},
                {"lr", result.best.lr},
                {"alpha", result.best.alpha},
                {"val_ppl", result.best_val_ppl},
                {"initial_val_ppl", ValidationPerplexity(proj, val.pairs)},
                {"cells", cells}};
    if (!o->save_projection.empty()) {
      const auto tuned = FinetuneFull(proj, train.pairs, result.best, val.pairs);
      SaveProjection(tuned.projection, o->save_projection);
    }
    WriteReport(ctx, o->out, DumpJson(report));
  });
}

void AddCompare(CLI::App& app, const Context& ctx) {
  struct Opts {
    std::vector<std::string> series;
    std::string out = "-";
    std::uint64_t seed = 1;
  };
  auto o = std::make_shared<Opts>();
  CLI::App* sub = app.add_subcommand(
      "compare", "Mean / variance matrix of gold-probability differences between series");
  sub->add_option("--series", o->series, "Series files written by `score`")
      ->required()
      ->expected(2, 64);
  sub->add_option("--out", o->out, "JSON report path, - for stdout")->capture_default_str();
  AddSeed(sub, o->seed);

  sub->callback([o, sub, ctx] {
    for (const auto& p : o->series) RequireInput(p, "series file");
    RequireOutput(o->out, "report");
    std::vector<GoldProbSeries> series;
    for (const auto& p : o->series) series.push_back(LoadSeries(p));
    const std::size_t n = series.size();
    Json names = Json::array(), mean(Json::array()), var(Json::array());
    for (std::size_t i = 0; i < n; ++i) {
      names.push_back({{"path", o->series[i]},
                       {"variant", series[i].variant},
                       {"n", series[i].probs.size()}});
      Json mrow = Json::array(), vrow = Json::array();
      for (std::size_t j = 0; j < n; ++j) {
        try {
          mrow.push_back(MeanDiff(series[i], series[j]));
          vrow.push_back(VarDiff(series[i], series[j]));
        } catch (const Error& e) {
          throw CliError(kExitFormat, o->series[i] + " vs " + o->series[j] + ": " + e.what());
        }
      }
      mean.push_back(mrow);
      var.push_back(vrow);
    }
    Json report{{"header", HeaderJson(MakeHeader(*sub, o->seed))},
                {"series", names},
                {"mean", mean},
                {"variance", var}};
    WriteReport(ctx, o->out, DumpJson(report));
  });
}

void AddAnalyze(CLI::App& app, const Context& ctx) {
  struct Opts {
    std::string task_dir, projection, ft_projection, datastore, out = "-", neighbors_csv,
        metric = "ip";
    Hyper hyper;
    std::uint64_t seed = 1;
  };
  auto o = std::make_shared<Opts>();
  CLI::App* sub = app.add_subcommand(
      "analyze", "Word-level P/R/F1, incremental recall and neighbor quality on a synth task");
  sub->add_option("--task-dir", o->task_dir, "Directory written by `synth`")->required();
  sub->add_option("--projection", o->projection, "Base projection (default <task-dir>/base.knpj)");
  sub->add_option("--ft-projection", o->ft_projection, "Fine-tuned projection (KNPJ)")
      ->required();
  sub->add_option("--datastore", o->datastore, "In-domain datastore (KNDS)")->required();
  sub->add_option("-k,--k", o->hyper.k, "Neighbors per step")->capture_default_str();
  sub->add_option("--lambda", o->hyper.lambda, "Interpolation weight")->capture_default_str();
  sub->add_option("--temperature", o->hyper.temperature, "kNN softmax temperature")
      ->capture_default_str();
  sub->add_option("--metric", o->metric, "ip or l2")->capture_default_str();
  sub->add_option("--neighbors-csv", o->neighbors_csv, "Per-occurrence neighbor-quality CSV");
  sub->add_option("--out", o->out, "JSON report path, - for stdout")->capture_default_str();
  AddSeed(sub, o->seed);

  sub->callback([o, sub, ctx] {
    const fs::path dir(o->task_dir);
    const std::string base_path =
        o->projection.empty() ? (dir / "base.knpj").string() : o->projection;
    const std::string words_path = (dir / "words.json").string();
    const std::string test_path = (dir / "test.kncp").string();
    RequireInput(base_path, "base projection");
    RequireInput(o->ft_projection, "fine-tuned projection");
    RequireInput(o->datastore, "datastore");
    RequireInput(words_path, "words.json");
    RequireInput(test_path, "test.kncp");
    RequireOutput(o->out, "report");
    if (!o->neighbors_csv.empty()) RequireOutput(o->neighbors_csv, "neighbor CSV");
    o->hyper.metric = ParseMetricFlag(o->metric);
    try {
      ValidateHyper(o->hyper);
    } catch (const Error& e) {
      throw CliError(kExitUsage, e.what());
    }

    const Json words = LoadJsonFile(words_path);
    SynthSplit test;
    test.corpus = LoadCorpusFile(test_path);
    FrequencyTable f_id, f_gd;
    SubwordMap subwords;
    try {
      test.words = words.at("test_words").get<std::vector<std::vector<std::string>>>();
      f_id = words.at("indomain_word_freq").get<FrequencyTable>();
      f_gd = words.at("general_word_freq").get<FrequencyTable>();
      subwords = words.at("subword_map").get<SubwordMap>();
    } catch (const Json::exception& e) {
      throw CliError(kExitFormat, words_path + ": " + e.what());
    }
    const Projection base = LoadProjectionFile(base_path);
    const Projection ft = LoadProjectionFile(o->ft_projection);
    const Datastore ds = LoadDatastoreFile(o->datastore);

    WordAnalysis wa;
    try {
      wa = AnalyzeWords({test, f_id, f_gd, subwords, ds}, o->hyper, base, ft);
    } catch (const Error& e) {
      if (e.code() == ErrorCode::kNonFinite) throw CliError(kExitNumeric, e.what());
      throw CliError(kExitFormat, e.what());
    }

    Json systems = Json::object();
    for (const auto& [name, stats] :
         {std::pair{"nmt", &wa.nmt}, std::pair{"knn_mt", &wa.knn_mt}, std::pair{"ft", &wa.ft}}) {
      systems[name] = {{"by_gamma", PrfJson(PrfByGamma(*stats))},
                       {"by_frequency", PrfJson(PrfByFrequency(*stats))}};
    }
    Json neighbors = Json::array();
    for (const auto& s : wa.neighbors_by_frequency) {
      neighbors.push_back({{"bucket", s.label},
                           {"occurrences", s.occurrences},
                           {"unretrieved_pct", s.unretrieved_pct},
                           {"gold_rank", s.gold_rank},
                           {"gold_dist", s.gold_dist},
                           {"gold_count", s.gold_count},
                           {"distinct_labels", s.distinct_labels}});
    }
    const Header header = MakeHeader(*sub, o->seed);
    Json report{{"header", HeaderJson(header)},
                {"prf", systems},
                {"delta_recall",
                 {{"by_gamma", SummaryJson(wa.delta_by_gamma)},
                  {"by_frequency", SummaryJson(wa.delta_by_frequency)}}},
                {"neighbors_by_frequency", neighbors}};
    if (!o->neighbors_csv.empty()) {
      std::ostringstream os;
      os << HeaderCsv(header)
         << "word,first_step,unretrieved,gold_rank,gold_dist,gold_count,distinct_labels\n";
      os.precision(17);
      for (const auto& occ : wa.occurrences) {
        const auto& q = occ.quality;
        os << occ.word << "," << occ.first_step << "," << (q.unretrieved ? 1 : 0) << ","
           << q.gold_rank << "," << q.gold_dist << "," << q.gold_count << ","
           << q.distinct_labels << "\n";
      }
      WriteReport(ctx, o->neighbors_csv, os.str());
    }
    WriteReport(ctx, o->out, DumpJson(report));
  });
}

void AddBench(CLI::App& app, const Context& ctx) {
  struct Opts {
    std::string projection, datastore, queries, out = "-", metric = "ip";
    Hyper hyper;
    std::size_t reps = 5;
    std::uint64_t seed = 1;
  };
  auto o = std::make_shared<Opts>();
  CLI::App* sub = app.add_subcommand(
      "bench", "Per-token scoring time of pure NMT against interpolated kNN-MT");
  sub->add_option("--projection", o->projection, "Projection (KNPJ)")->required();
  sub->add_option("--datastore", o->datastore, "Datastore (KNDS)")->required();
  sub->add_option("--queries", o->queries, "Scored context pairs (KNCP)")->required();
  sub->add_option("-k,--k", o->hyper.k, "Neighbors per step")->capture_default_str();
  sub->add_option("--lambda", o->hyper.lambda, "Interpolation weight")->capture_default_str();
  sub->add_option("--temperature", o->hyper.temperature, "kNN softmax temperature")
      ->capture_default_str();
  sub->add_option("--metric", o->metric, "ip or l2")->capture_default_str();
  sub->add_option("--reps", o->reps, "Timed repetitions (median reported)")
      ->check(CLI::Range(std::size_t{3}, std::size_t{1000}))
      ->capture_default_str();
  sub->add_option("--out", o->out, "JSON report path, - for stdout")->capture_default_str();
  AddSeed(sub, o->seed);

  sub->callback([o, sub, ctx] {
    RequireInput(o->projection, "projection");
    RequireInput(o->datastore, "datastore");
    RequireInput(o->queries, "query file");
    RequireOutput(o->out, "report");
    o->hyper.metric = ParseMetricFlag(o->metric);
    try {
      ValidateHyper(o->hyper);
    } catch (const Error& e) {
      throw CliError(kExitUsage, e.what());
    }
    const Projection proj = LoadProjectionFile(o->projection);
    const Datastore ds = LoadDatastoreFile(o->datastore);
    const ContextCorpus queries = LoadCorpusFile(o->queries);
    if (queries.pairs.empty()) throw CliError(kExitFormat, "no query pairs");
    if (proj.dim() != ds.dim() || queries.dim != ds.dim()) {
      throw CliError(kExitFormat, "projection, datastore and queries disagree on dim");
    }

    ScoreOptions nmt_opts;
    nmt_opts.variant = ScoreVariant::kNmt;
    const ScoreOptions knn_opts;
    const double tokens = static_cast<double>(queries.pairs.size());
    auto time_once = [&](const ScoreOptions& opts) {
      const auto t0 = std::chrono::steady_clock::now();
      const auto scored = ScoreSequence(proj, ds, o->hyper, queries.pairs, opts);
      const auto t1 = std::chrono::steady_clock::now();
      if (scored.size() != queries.pairs.size()) throw CliError(kExitNumeric, "scoring failed");
      return std::chrono::duration<double, std::nano>(t1 - t0).count() / tokens;
    };
    // With lambda = 0 the interpolated variant runs the NMT path itself, so a
    // single measurement serves both and the ratio is exactly 1.
    const bool shared_path = o->hyper.lambda == 0.0;
    time_once(nmt_opts);
    if (!shared_path) time_once(knn_opts);
    std::vector<double> nmt_ns, knn_ns;
    for (std::size_t r = 0; r < o->reps; ++r) {
      nmt_ns.push_back(time_once(nmt_opts));
      knn_ns.push_back(shared_path ? nmt_ns.back() : time_once(knn_opts));
    }
    const double nmt_med = Median(nmt_ns);
    const double knn_med = Median(knn_ns);
    Json report{{"header", HeaderJson(MakeHeader(*sub, o->seed))},
                {"tokens", queries.pairs.size()},
                {"reps", o->reps},
                {"shared_path", shared_path},
                {"nmt_ns_per_token", nmt_med},
                {"knn_ns_per_token", knn_med},
                {"relative_speed", shared_path ? 1.0 : nmt_med / knn_med},
                {"nmt_ns_samples", nmt_ns},
                {"knn_ns_samples", knn_ns}};
    WriteReport(ctx, o->out, DumpJson(report));
  });
}

}  // namespace knnmt::cli
