// groomrisk: score, train, evaluate and synthesise annotated chat corpora.
//
// Exit codes: 0 success, 1 data error, 2 usage error.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "groomrisk/groomrisk.hpp"

namespace {

using namespace groomrisk;

constexpr int kExitData = 1;
constexpr int kExitUsage = 2;

// Thrown for flag/config problems detected after CLI11 parsing.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::vector<ChatContext> read_corpus(const std::string& path, int window) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open corpus '" + path + "'");
  return load_contexts(in, window);
}

EmbeddingTable read_embeddings(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open embeddings '" + path + "'");
  try {
    return load_embeddings(in);
  } catch (const DataError& e) {
    throw DataError(path + ": " + e.what());
  }
}

void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path + "'");
  out << text;
  if (!out) throw DataError("failed writing '" + path + "'");
}

std::string fmt(const char* spec, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

// Options shared by every subcommand that categorises scores.
struct FuzzyFlags {
  std::string membership_mode;
  std::string defuzz_mode;
  double alpha = 0.0;
  CLI::Option* membership_opt = nullptr;
  CLI::Option* defuzz_opt = nullptr;
  CLI::Option* alpha_opt = nullptr;

  void attach(CLI::App* app) {
    membership_opt = app->add_option("--membership-mode", membership_mode,
                                     "literal-pdf | normalized | normalized-shoulder "
                                     "(default normalized-shoulder)");
    defuzz_opt = app->add_option("--defuzz-mode", defuzz_mode,
                                 "argmax | alpha-highest (default argmax)");
    alpha_opt = app->add_option("--alpha", alpha, "alpha-cut in (0,1] (default 0.5)");
  }

  void apply(FuzzyConfig& cfg) const {
    if (*membership_opt) cfg.membership_mode = membership_mode_from_string(membership_mode);
    if (*defuzz_opt) cfg.defuzz_mode = defuzz_mode_from_string(defuzz_mode);
    if (*alpha_opt) cfg.alpha = alpha;
  }
};

struct Common {
  std::string config_path;
  int window = kDefaultWindow;
  CLI::Option* window_opt = nullptr;

  void attach(CLI::App* app) {
    app->add_option("--config", config_path,
                    std::string("JSON config file (falls back to $") + kConfigEnvVar + ")");
    window_opt = app->add_option("--window", window,
                                 "context window size n for message-level corpora (default 3)");
  }

  RunConfig load() const {
    RunConfig cfg = load_run_config(config_path);
    if (*window_opt) cfg.window_size = window;
    return cfg;
  }
};

// ---------------------------------------------------------------------------

struct ScoreCmd {
  Common common;
  FuzzyFlags fuzzy;
  std::string corpus;
  std::string out;

  void attach(CLI::App* app) {
    common.attach(app);
    fuzzy.attach(app);
    app->add_option("--corpus", corpus, "annotated corpus (JSON lines)")->required();
    app->add_option("--out", out, "output table (default stdout)");
  }

  RunConfig resolve() const {
    RunConfig cfg = common.load();
    fuzzy.apply(cfg.fuzzy);
    cfg.fuzzy.validate();
    if (cfg.window_size < 1) throw ParameterError("window size must be >= 1");
    return cfg;
  }

  void run(const RunConfig& cfg) const {
    const auto contexts = read_corpus(corpus, cfg.window_size);
    std::ostringstream os;
    os << "# config: " << nlohmann::json{{"fuzzy", cfg.fuzzy}, {"run", {{"window_size", cfg.window_size}}}}.dump()
       << "\n";
    os << "context_id\tr_groom\tmu_moderate\tmu_significant\tmu_severe\tcategory\n";
    for (const auto& c : contexts) {
      const double score = c.risk_score();
      const auto mv = membership_vector(score, cfg.fuzzy);
      os << c.context_id << '\t' << fmt("%.1f", score) << '\t' << fmt("%.6f", mv.moderate) << '\t'
         << fmt("%.6f", mv.significant) << '\t' << fmt("%.6f", mv.severe) << '\t'
         << to_string(defuzzify(mv, cfg.fuzzy)) << '\n';
    }
    write_text(out, os.str());
  }
};

struct TrainCmd {
  Common common;
  std::string corpus;
  std::string features = "hash";
  std::string embeddings;
  std::string out;
  std::string log;
  double lr = 0.0;
  int epochs = 0;
  int batch = 0;
  std::uint64_t seed = 0;
  std::size_t dimension = 0;
  bool pooled = false;
  CLI::Option *features_opt = nullptr, *lr_opt = nullptr, *epochs_opt = nullptr,
              *batch_opt = nullptr, *seed_opt = nullptr, *dim_opt = nullptr;

  void attach(CLI::App* app) {
    common.attach(app);
    app->add_option("--corpus", corpus, "annotated corpus (JSON lines)")->required();
    features_opt = app->add_option("--features", features, "hash | embeddings (default hash)")
                       ->check(CLI::IsMember({"hash", "embeddings"}));
    app->add_option("--embeddings", embeddings, "embedding file (required for --features embeddings)");
    app->add_option("--out", out, "model file to write")->required();
    app->add_option("--log", log, "training log (default MODEL.log)");
    lr_opt = app->add_option("--lr", lr, "Adam learning rate (default 2e-5)");
    epochs_opt = app->add_option("--epochs", epochs,
                                 "training epochs (default 5; the hashed baseline "
                                 "usually wants ~50)");
    batch_opt = app->add_option("--batch", batch, "mini-batch size (default 4)");
    seed_opt = app->add_option("--seed", seed, "shuffle seed (default 0)");
    dim_opt = app->add_option("--dimension", dimension, "hashed feature dimension (default 262144)");
    app->add_flag("--pooled", pooled, "train one model on all groups (default: one per group)");
  }

  RunConfig resolve() const {
    RunConfig cfg = common.load();
    if (*lr_opt) cfg.train.learning_rate = lr;
    if (*epochs_opt) cfg.train.epochs = epochs;
    if (*batch_opt) cfg.train.batch_size = batch;
    if (*seed_opt) cfg.train.shuffle_seed = seed;
    if (pooled) cfg.pooled = true;
    if (*features_opt) {
      if (features == "embeddings") {
        cfg.features.kind = EmbeddingSpec{};
      } else if (!cfg.features.is_hash()) {
        cfg.features.kind = HashSpec{};
      }
    }
    if (*dim_opt) {
      auto* h = std::get_if<HashSpec>(&cfg.features.kind);
      if (h == nullptr) throw ParameterError("--dimension applies to hashed features only");
      h->dimension = dimension;
    }
    if (!cfg.features.is_hash() && embeddings.empty()) {
      throw ParameterError("--features embeddings requires --embeddings PATH");
    }
    cfg.train.validate();
    if (cfg.features.is_hash()) cfg.features.validate();
    if (cfg.window_size < 1) throw ParameterError("window size must be >= 1");
    return cfg;
  }

  void run(RunConfig cfg) const {
    const auto contexts = read_corpus(corpus, cfg.window_size);
    std::optional<EmbeddingTable> table;
    if (!cfg.features.is_hash()) {
      table = read_embeddings(embeddings);
      if (table->empty()) throw DataError("embedding file '" + embeddings + "' is empty");
      cfg.features.kind = EmbeddingSpec{table->begin()->second.dimension()};
    }
    const EmbeddingTable* tp = table ? &*table : nullptr;

    std::map<std::string, std::vector<ChatContext>> partitions;
    for (const auto& c : contexts) {
      partitions[cfg.pooled ? kPooledHead : std::string(to_string(c.group))].push_back(c);
    }
    if (partitions.empty()) throw DataError("corpus '" + corpus + "' has no contexts to train on");

    ModelBundle bundle;
    for (const auto& [head, data] : partitions) {
      bundle.emplace(head, train(data, cfg.features, cfg.train, tp));
    }

    std::ostringstream model_bytes;
    save_bundle(model_bytes, bundle);
    write_text(out, model_bytes.str());

    std::ostringstream lg;
    lg << "# config: " << nlohmann::json(cfg).dump() << "\n";
    lg << "head\tepoch\tmean_loss\n";
    for (const auto& [head, model] : bundle) {
      const auto& losses = model.train_meta.epoch_losses;
      for (std::size_t e = 0; e < losses.size(); ++e) {
        lg << head << '\t' << (e + 1) << '\t' << fmt("%.17g", losses[e]) << '\n';
      }
      lg << head << "\tfinal\t" << fmt("%.17g", model.train_meta.final_loss) << '\n';
    }
    write_text(log.empty() ? out + ".log" : log, lg.str());
  }
};

struct EvalCmd {
  Common common;
  FuzzyFlags fuzzy;
  std::string corpus;
  std::string model;
  std::string embeddings;
  std::string report;
  std::string format = "table-text";
  bool by_group = true;
  bool clamp = false;

  void attach(CLI::App* app) {
    common.attach(app);
    fuzzy.attach(app);
    app->add_option("--corpus", corpus, "annotated corpus (JSON lines)")->required();
    app->add_option("--model", model, "model file written by train")->required();
    app->add_option("--embeddings", embeddings, "embedding file for embedding-feature models");
    app->add_flag("--by-group", by_group,
                  "report per group (LEO / Victim / Decoy); always on, accepted for clarity");
    app->add_option("--report", report, "report file (default stdout)");
    app->add_option("--format", format, "table-text | csv | json (default table-text)")
        ->check(CLI::IsMember({"table-text", "csv", "json"}));
    app->add_flag("--clamp", clamp, "clamp predictions to [0, 12]");
  }

  RunConfig resolve() const {
    RunConfig cfg = common.load();
    fuzzy.apply(cfg.fuzzy);
    if (clamp) cfg.clamp = true;
    cfg.fuzzy.validate();
    report_format_from_string(format);
    return cfg;
  }

  void run(const RunConfig& cfg) const {
    const auto contexts = read_corpus(corpus, cfg.window_size);
    ModelBundle bundle;
    {
      std::ifstream in(model, std::ios::binary);
      if (!in) throw DataError("cannot open model '" + model + "'");
      bundle = load_bundle(in);
    }
    std::optional<EmbeddingTable> table;
    if (!embeddings.empty()) table = read_embeddings(embeddings);

    std::map<std::string, std::vector<ChatContext>> partitions;
    for (const auto& c : contexts) {
      const std::string group(to_string(c.group));
      if (bundle.contains(group)) {
        partitions[group].push_back(c);
      } else if (bundle.contains(kPooledHead)) {
        partitions[kPooledHead].push_back(c);
      } else {
        throw DataError("model has no head for group " + group + " and no pooled head");
      }
    }

    std::vector<EvalInput> inputs;
    for (const auto& [head, data] : partitions) {
      const auto& m = bundle.at(head);
      if (!m.feature_spec.is_hash() && !table) {
        throw DataError("model head '" + head + "' uses embedding features; pass --embeddings");
      }
      const auto feats = featurize(data, m.feature_spec, table ? &*table : nullptr);
      for (std::size_t i = 0; i < data.size(); ++i) {
        if (feats[i].dimension() != m.weights.size()) {
          throw DataError("feature dimension mismatch for head '" + head + "'");
        }
        inputs.push_back({data[i].context_id, data[i].group, data[i].risk_score(),
                          predict(m, feats[i], cfg.clamp)});
      }
    }

    nlohmann::json train_echo = nlohmann::json::object();
    nlohmann::json spec_echo = nlohmann::json::object();
    for (const auto& [head, m] : bundle) {
      train_echo[head] = m.train_meta.config;
      spec_echo[head] = m.feature_spec;
    }
    const nlohmann::json echo = {
        {"fuzzy", cfg.fuzzy},
        {"train", train_echo},
        {"features", spec_echo},
        {"run", {{"window_size", cfg.window_size}, {"clamp", cfg.clamp}}},
        {"inputs", {{"corpus", corpus}, {"model", model}, {"embeddings", embeddings}}}};

    const auto records = bucket(inputs, cfg.fuzzy);
    write_text(report, emit_report(make_report(records, echo), format));
  }
};

struct SynthCmd {
  Common common;
  std::string out;
  std::uint64_t seed = 0;
  int per_group = 0;
  double density = 0.0;
  double partial = 0.0;
  CLI::Option *seed_opt = nullptr, *per_group_opt = nullptr, *density_opt = nullptr,
              *partial_opt = nullptr;

  void attach(CLI::App* app) {
    common.attach(app);
    app->add_option("--out", out, "corpus file to write (context-level JSON lines)")->required();
    seed_opt = app->add_option("--seed", seed, "generator seed (default 42)");
    per_group_opt = app->add_option("--per-group", per_group, "conversations per group (default 200)");
    density_opt = app->add_option("--density", density,
                                  "probability each strategy is planted in a context (default 0.15)");
    partial_opt = app->add_option("--partial", partial,
                                  "probability a planted strategy is partial, 0.5 (default 0.3)");
  }

  RunConfig resolve() const {
    RunConfig cfg = common.load();
    if (*seed_opt) cfg.synth.seed = seed;
    if (*per_group_opt) cfg.synth.conversations_per_group = per_group;
    if (*density_opt) cfg.synth.strategy_density = density;
    if (*partial_opt) cfg.synth.partial_probability = partial;
    if (*common.window_opt) cfg.synth.window_size = common.window;
    cfg.synth.validate();
    return cfg;
  }

  void run(const RunConfig& cfg) const {
    const auto corpus = generate(cfg.synth);
    std::ostringstream os;
    write_corpus<ChatContext>(os, corpus);
    write_text(out, os.str());
    // The corpus format has no header, so the generator settings go beside it.
    write_text(out + ".config.json", nlohmann::json{{"synth", cfg.synth}}.dump(2) + "\n");
  }
};

template <typename Cmd>
int dispatch(const Cmd& cmd) {
  RunConfig cfg;
  try {
    cfg = cmd.resolve();
  } catch (const ParameterError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: config: " << e.what() << "\n";
    return kExitUsage;
  }
  try {
    cmd.run(cfg);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"groomrisk: fuzzy grooming-risk scoring, training and evaluation"};
  app.require_subcommand(1);

  ScoreCmd score;
  TrainCmd train_cmd;
  EvalCmd eval;
  SynthCmd synth;
  auto* score_app = app.add_subcommand("score", "categorise every context's annotated risk score");
  auto* train_app = app.add_subcommand(
      "train", "train a linear risk regressor (Adam, lr 2e-5, 5 epochs, batch 4 by default)");
  auto* eval_app = app.add_subcommand("eval", "per-group, per-category MSE report");
  auto* synth_app = app.add_subcommand("synth", "generate a seeded synthetic annotated corpus");
  score.attach(score_app);
  train_cmd.attach(train_app);
  eval.attach(eval_app);
  synth.attach(synth_app);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  if (*score_app) return dispatch(score);
  if (*train_app) return dispatch(train_cmd);
  if (*eval_app) return dispatch(eval);
  return dispatch(synth);
}
