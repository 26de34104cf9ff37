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
#include "knnmt/opl_finetune.hpp"
#include "knnmt/synthdata.hpp"

namespace knnmt::cli {
namespace fs = std::filesystem;

namespace {

Json WordsJson(const std::vector<std::vector<std::string>>& words) {
  Json out = Json::array();
  for (const auto& s : words) out.push_back(s);
  return out;
}

Json FrequencyJson(const FrequencyTable& table) {
  Json out = Json::object();
  for (const auto& [w, c] : table) out[w] = c;
  return out;
}

}  // namespace

void AddSynth(CLI::App& app, const Context& ctx) {
  struct Opts {
    SynthConfig cfg;
    std::string out_dir;
    bool no_base = false;
    std::uint64_t seed = 1;
  };
  auto o = std::make_shared<Opts>();
  CLI::App* sub = app.add_subcommand("synth", "Generate a synthetic general/in-domain task");
  sub->add_option("--out-dir", o->out_dir, "Directory receiving the task files")->required();
  sub->add_option("--dim", o->cfg.dim, "Context dimension")->capture_default_str();
  sub->add_option("--vocab", o->cfg.vocab_size, "Vocabulary size")->capture_default_str();
  sub->add_option("--n-general", o->cfg.n_general, "General-domain pairs")->capture_default_str();
  sub->add_option("--n-indomain", o->cfg.n_indomain, "In-domain training pairs")
      ->capture_default_str();
  sub->add_option("--n-val", o->cfg.n_val, "In-domain validation pairs")->capture_default_str();
  sub->add_option("--n-test", o->cfg.n_test, "In-domain test pairs")->capture_default_str();
  sub->add_option("--class-sep", o->cfg.class_sep, "Distance between class means")
      ->capture_default_str();
  sub->add_option("--shift", o->cfg.shift, "In-domain mean displacement")->capture_default_str();
  sub->add_option("--skew", o->cfg.low_freq_skew, "Zipf exponent")->capture_default_str();
  sub->add_option("--noise", o->cfg.noise, "Context noise sd")->capture_default_str();
  sub->add_option("--domain-fraction", o->cfg.domain_fraction, "Share of domain words")
      ->capture_default_str();
  sub->add_option("--general-damp", o->cfg.general_damp,
                  "General-domain weight multiplier of domain words")
      ->capture_default_str();
  sub->add_option("--context-scale", o->cfg.context_scale, "Context vector scale")
      ->capture_default_str();
  sub->add_flag("--no-base", o->no_base, "Skip training the base projection");
  AddSeed(sub, o->seed);

  sub->callback([o, sub, ctx] {
    o->cfg.seed = o->seed;
    std::error_code ec;
    fs::create_directories(o->out_dir, ec);
    if (!fs::is_directory(o->out_dir)) {
      throw CliError(kExitMissingInput, "cannot create output directory: " + o->out_dir);
    }
    const Header header = MakeHeader(*sub, o->seed);
    SynthTask task;
    try {
      task = GenerateTask(o->cfg);
    } catch (const Error& e) {
      throw CliError(kExitUsage, e.what());
    }
    const fs::path dir(o->out_dir);
    SaveContextCorpus(task.general.corpus, dir / "general.kncp");
    SaveContextCorpus(task.train.corpus, dir / "train.kncp");
    SaveContextCorpus(task.val.corpus, dir / "val.kncp");
    SaveContextCorpus(task.test.corpus, dir / "test.kncp");

    Json subwords = Json::object();
    for (const auto& [w, pieces] : task.subword_map) subwords[w] = pieces;
    Json words{{"header", HeaderJson(header)},
               {"general_word_freq", FrequencyJson(task.general_word_freq)},
               {"indomain_word_freq", FrequencyJson(task.indomain_word_freq)},
               {"subword_map", subwords},
               {"val_words", WordsJson(task.val.words)},
               {"test_words", WordsJson(task.test.words)}};
    WriteReport(ctx, (dir / "words.json").string(), DumpJson(words));

    Json manifest{{"header", HeaderJson(header)},
                  {"files", {"general.kncp", "train.kncp", "val.kncp", "test.kncp", "words.json"}},
                  {"pairs",
                   {{"general", task.general.corpus.pairs.size()},
                    {"train", task.train.corpus.pairs.size()},
                    {"val", task.val.corpus.pairs.size()},
                    {"test", task.test.corpus.pairs.size()}}}};
    if (!o->no_base) {
      const BaseModel base = TrainBaseProjection(o->cfg, task.general.corpus.pairs);
      SaveProjection(base.projection, dir / "base.knpj");
      manifest["files"].push_back("base.knpj");
      manifest["base"] = {{"general_val_ppl", base.val_ppl},
                          {"indomain_test_ppl",
                           ValidationPerplexity(base.projection, task.test.corpus.pairs)},
                          {"steps", base.steps}};
    }
    WriteReport(ctx, (dir / "manifest.json").string(), DumpJson(manifest));
  });
}

void AddBuild(CLI::App& app, const Context& ctx) {
  struct Opts {
    std::string pairs, out, report = "-";
    std::uint64_t seed = 1;
  };
  auto o = std::make_shared<Opts>();
  CLI::App* sub = app.add_subcommand("build", "Build a datastore from a context-pair file");
  sub->add_option("--pairs", o->pairs, "Input context-pair file (KNCP)")->required();
  sub->add_option("--out", o->out, "Output datastore (KNDS)")->required();
  sub->add_option("--report", o->report, "Summary report path, - for stdout")
      ->capture_default_str();
  AddSeed(sub, o->seed);

  sub->callback([o, sub, ctx] {
    RequireInput(o->pairs, "context-pair file");
    RequireOutput(o->out, "datastore");
    RequireOutput(o->report, "report");
    const ContextCorpus corpus = LoadCorpusFile(o->pairs);
    Datastore ds = [&] {
      try {
        return Datastore::Build(corpus.pairs, corpus.dim, corpus.vocab_size);
      } catch (const Error& e) {
        if (e.code() == ErrorCode::kNonFinite) throw CliError(kExitNumeric, e.what());
        throw CliError(kExitFormat, e.what());
      }
    }();
    ds.Save(o->out);
    Json report{{"header", HeaderJson(MakeHeader(*sub, o->seed))},
                {"dim", ds.dim()},
                {"vocab_size", ds.vocab_size()},
                {"count", ds.count()},
                {"sentences", corpus.sentence_count()}};
    WriteReport(ctx, o->report, DumpJson(report));
  });
}

void AddSearch(CLI::App& app, const Context& ctx) {
  struct Opts {
    std::string datastore, queries, out = "-", format = "csv", metric = "ip";
    std::size_t k = 8;
    std::uint64_t seed = 1;
  };
  auto o = std::make_shared<Opts>();
  CLI::App* sub = app.add_subcommand("search", "Exact top-k retrieval for a file of queries");
  sub->add_option("--datastore", o->datastore, "Datastore (KNDS)")->required();
  sub->add_option("--queries", o->queries, "Query contexts (KNCP)")->required();
  sub->add_option("-k,--k", o->k, "Neighbors per query")->capture_default_str();
  sub->add_option("--metric", o->metric, "ip or l2")->capture_default_str();
  sub->add_option("--format", o->format, "csv or json")
      ->check(CLI::IsMember({"csv", "json"}))
      ->capture_default_str();
  sub->add_option("--out", o->out, "Report path, - for stdout")->capture_default_str();
  AddSeed(sub, o->seed);

  sub->callback([o, sub, ctx] {
    RequireInput(o->datastore, "datastore");
    RequireInput(o->queries, "query file");
    RequireOutput(o->out, "report");
    const Metric metric = ParseMetricFlag(o->metric);
    if (o->k == 0) throw CliError(kExitUsage, "k must be >= 1");
    const Datastore ds = LoadDatastoreFile(o->datastore);
    const ContextCorpus queries = LoadCorpusFile(o->queries);
    if (queries.dim != ds.dim()) throw CliError(kExitFormat, "query dim != datastore dim");
    const Header header = MakeHeader(*sub, o->seed);
    if (o->format == "csv") {
      std::ostringstream os;
      os << HeaderCsv(header) << "query,rank,index,value,score\n";
      os.precision(17);
      for (std::size_t q = 0; q < queries.pairs.size(); ++q) {
        const auto nbrs = ds.Search(queries.pairs[q].context, o->k, metric);
        for (std::size_t r = 0; r < nbrs.size(); ++r) {
          const auto& n = nbrs.entries[r];
          os << q << "," << r << "," << n.index << "," << n.value << "," << n.score << "\n";
        }
      }
      WriteReport(ctx, o->out, os.str());
      return;
    }
    Json results = Json::array();
    for (const auto& p : queries.pairs) {
      const auto nbrs = ds.Search(p.context, o->k, metric);
      Json row = Json::array();
      for (const auto& n : nbrs.entries) {
        row.push_back({{"index", n.index}, {"value", n.value}, {"score", n.score}});
      }
      results.push_back(row);
    }
    WriteReport(ctx, o->out, DumpJson({{"header", HeaderJson(header)}, {"results", results}}));
  });
}

void AddScore(CLI::App& app, const Context& ctx) {
  struct Opts {
    std::string projection, datastore, pairs, out = "-", metric = "ip", variant = "interpolated";
    Hyper hyper;
    std::uint64_t seed = 1;
  };
  auto o = std::make_shared<Opts>();
  CLI::App* sub = app.add_subcommand("score", "Teacher-forced scoring; writes a gold-probability series");
  sub->add_option("--projection", o->projection, "Output projection (KNPJ)")->required();
  sub->add_option("--datastore", o->datastore, "Datastore (KNDS); unused for --variant nmt");
  sub->add_option("--pairs", o->pairs, "Reference context pairs (KNCP)")->required();
  sub->add_option("-k,--k", o->hyper.k, "Neighbors per step")->capture_default_str();
  sub->add_option("--lambda", o->hyper.lambda, "Interpolation weight")->capture_default_str();
  sub->add_option("--temperature", o->hyper.temperature, "kNN softmax temperature")
      ->capture_default_str();
  sub->add_option("--metric", o->metric, "ip or l2")->capture_default_str();
  sub->add_option("--variant", o->variant, "nmt, knn or interpolated")
      ->check(CLI::IsMember({"nmt", "knn", "interpolated"}))
      ->capture_default_str();
  sub->add_option("--out", o->out, "Series report path, - for stdout")->capture_default_str();
  AddSeed(sub, o->seed);

  sub->callback([o, sub, ctx] {
    RequireInput(o->projection, "projection");
    RequireInput(o->pairs, "context-pair file");
    const bool needs_ds = o->variant != "nmt";
    if (needs_ds) RequireInput(o->datastore, "datastore");
    RequireOutput(o->out, "report");
    o->hyper.metric = ParseMetricFlag(o->metric);
    try {
      ValidateHyper(o->hyper);
    } catch (const Error& e) {
      throw CliError(kExitUsage, e.what());
    }
    const Projection proj = LoadProjectionFile(o->projection);
    const ContextCorpus corpus = LoadCorpusFile(o->pairs);
    const Datastore ds = needs_ds ? LoadDatastoreFile(o->datastore)
                                  : Datastore(corpus.dim, corpus.vocab_size);
    if (proj.dim() != corpus.dim || proj.vocab_size() != corpus.vocab_size ||
        (needs_ds && (ds.dim() != corpus.dim || ds.vocab_size() != corpus.vocab_size))) {
      throw CliError(kExitFormat, "projection, datastore and pairs disagree on dim/vocab_size");
    }
    ScoreOptions opts;
    opts.variant = o->variant == "nmt"  ? ScoreVariant::kNmt
                   : o->variant == "knn" ? ScoreVariant::kKnn
                                          : ScoreVariant::kInterpolated;
    const auto scored = ScoreSequence(proj, ds, o->hyper, corpus.pairs, opts);
    Json probs = Json::array(), logs = Json::array(), predicted = Json::array();
    double nll = 0.0;
    for (const auto& t : scored) {
      probs.push_back(t.p_gold);
      logs.push_back(t.log_p_gold);
      predicted.push_back(t.predicted);
      nll -= t.log_p_gold;
    }
    const double ppl = std::exp(nll / static_cast<double>(std::max<std::size_t>(1, scored.size())));
    // A pure kNN distribution can give the gold token zero mass; JSON has no
    // infinity, so such perplexities (and log-probabilities) become null.
    Json report{{"header", HeaderJson(MakeHeader(*sub, o->seed))},
                {"variant", o->variant},
                {"n", scored.size()},
                {"ppl", std::isfinite(ppl) ? Json(ppl) : Json(nullptr)},
                {"probs", probs},
                {"log_probs", logs},
                {"predicted", predicted}};
    WriteReport(ctx, o->out, DumpJson(report));
  });
}

}  // namespace knnmt::cli
