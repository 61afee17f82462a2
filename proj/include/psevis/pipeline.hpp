#pragma once

// End-to-end stages. Each stage reads its inputs from files named by the
// config and writes its outputs to the output directory:
//   train  : corpus                      -> model.json
//   probe  : corpus + model.json         -> probes.json, perplexity.csv
//   eval   : corpus + model.json (+probes) -> report
//   export : model.json + probes.json    -> grid.svg

#include <filesystem>
#include <ostream>
#include <string>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "psevis/analysis.hpp"
#include "psevis/corpus.hpp"
#include "psevis/perplexity.hpp"
#include "psevis/probes.hpp"
#include "psevis/serialization.hpp"
#include "psevis/service.hpp"
#include "psevis/svg.hpp"
#include "psevis/train.hpp"

namespace psevis {

struct PipelineConfig {
  std::filesystem::path train_corpus = "data/train.txt";
  std::filesystem::path test_corpus = "data/test.txt";
  std::filesystem::path lexicon = "data/lexicon.tsv";
  std::filesystem::path colormap = "data/colormap.json";
  std::filesystem::path output_dir = "out";

  std::size_t min_count = 2;
  std::size_t max_vocab = 2000;
  LstmTrainConfig model;
  bool float32 = false;
  ProbeTrainConfig probe;
  ProbeTarget probe_target = ProbeTarget::next_token;
  unsigned threads = 0;

  std::size_t bar_k = 3;
  double dominance_fraction = 0.1;
  ServiceConfig service;

  std::filesystem::path model_path() const { return output_dir / "model.json"; }
  std::filesystem::path probes_path() const { return output_dir / "probes.json"; }
  std::filesystem::path table_path() const { return output_dir / "perplexity.csv"; }
  std::filesystem::path svg_path() const { return output_dir / "grid.svg"; }

  void validate() const {
    model.validate();
    probe.validate();
    if (min_count == 0 || bar_k == 0) throw ConfigError("min_count and k must be positive");
    if (!(dominance_fraction > 0) || dominance_fraction > 1) {
      throw ConfigError("dominance_fraction must be in (0, 1]");
    }
  }

  /// Relative paths in `j` are resolved against `base_dir`. Missing keys keep
  /// their defaults.
  static PipelineConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {}) {
    PipelineConfig c;
    auto path = [&](const char* key, std::filesystem::path& out) {
      if (j.contains("paths") && j["paths"].contains(key)) {
        std::filesystem::path p = j["paths"][key].get<std::string>();
        out = p.is_absolute() || base_dir.empty() ? p : base_dir / p;
      }
    };
    try {
      path("train_corpus", c.train_corpus);
      path("test_corpus", c.test_corpus);
      path("lexicon", c.lexicon);
      path("colormap", c.colormap);
      path("output_dir", c.output_dir);
      if (j.contains("paths") && j["paths"].contains("static_dir")) {
        std::filesystem::path p = j["paths"]["static_dir"].get<std::string>();
        c.service.static_dir = (p.is_absolute() || base_dir.empty() ? p : base_dir / p).string();
      }
      if (const auto v = j.find("vocab"); v != j.end()) {
        c.min_count = v->value("min_count", c.min_count);
        c.max_vocab = v->value("max_size", c.max_vocab);
      }
      if (const auto m = j.find("model"); m != j.end()) {
        auto& t = c.model;
        t.hidden_size = m->value("hidden_size", t.hidden_size);
        t.num_layers = m->value("num_layers", t.num_layers);
        t.epochs = m->value("epochs", t.epochs);
        t.learning_rate = m->value("learning_rate", t.learning_rate);
        t.lr_decay = m->value("lr_decay", t.lr_decay);
        t.decay_start = m->value("decay_start", t.decay_start);
        t.clip = m->value("clip", t.clip);
        t.bptt = m->value("bptt", t.bptt);
        t.seed = m->value("seed", t.seed);
        c.float32 = m->value("float32", c.float32);
      }
      if (const auto p = j.find("probe"); p != j.end()) {
        auto& t = c.probe;
        t.epochs = p->value("epochs", t.epochs);
        t.learning_rate = p->value("learning_rate", t.learning_rate);
        t.l2 = p->value("l2", t.l2);
        t.batch_size = p->value("batch_size", t.batch_size);
        t.clip = p->value("clip", t.clip);
        t.seed = p->value("seed", t.seed);
        const std::string target = p->value("target", std::string("next_token"));
        if (target == "next_token") {
          c.probe_target = ProbeTarget::next_token;
        } else if (target == "input_token") {
          c.probe_target = ProbeTarget::input_token;
        } else {
          throw ConfigError("probe.target must be next_token or input_token");
        }
        c.threads = p->value("threads", c.threads);
      }
      if (const auto e = j.find("encoding"); e != j.end()) {
        c.bar_k = e->value("k", c.bar_k);
        c.dominance_fraction = e->value("dominance_fraction", c.dominance_fraction);
      }
      if (const auto s = j.find("service"); s != j.end()) {
        c.service.host = s->value("host", c.service.host);
        c.service.port = s->value("port", c.service.port);
      }
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(std::string("config: ") + e.what());
    }
    c.service.default_k = c.bar_k;
    c.service.dominance_fraction = c.dominance_fraction;
    return c;
  }

  static PipelineConfig load(const std::filesystem::path& path) {
    const std::string text = read_file(path);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("config '" + path.string() + "': " + e.what());
    }
    return from_json(j, path.parent_path());
  }

  nlohmann::ordered_json to_json() const {
    return {
        {"paths",
         {{"train_corpus", train_corpus.string()},
          {"test_corpus", test_corpus.string()},
          {"lexicon", lexicon.string()},
          {"colormap", colormap.string()},
          {"output_dir", output_dir.string()},
          {"static_dir", service.static_dir}}},
        {"vocab", {{"min_count", min_count}, {"max_size", max_vocab}}},
        {"model",
         {{"hidden_size", model.hidden_size},
          {"num_layers", model.num_layers},
          {"epochs", model.epochs},
          {"learning_rate", model.learning_rate},
          {"lr_decay", model.lr_decay},
          {"decay_start", model.decay_start},
          {"clip", model.clip},
          {"bptt", model.bptt},
          {"seed", model.seed},
          {"float32", float32}}},
        {"probe",
         {{"epochs", probe.epochs},
          {"learning_rate", probe.learning_rate},
          {"l2", probe.l2},
          {"batch_size", probe.batch_size},
          {"clip", probe.clip},
          {"seed", probe.seed},
          {"target", probe_target == ProbeTarget::next_token ? "next_token" : "input_token"},
          {"threads", threads}}},
        {"encoding", {{"k", bar_k}, {"dominance_fraction", dominance_fraction}}},
        {"service", {{"host", service.host}, {"port", service.port}}}};
  }
};

struct Corpora {
  std::vector<TokenSequence> train;
  std::vector<TokenSequence> test;
};

inline Corpora load_corpora(const PipelineConfig& cfg, const Vocabulary& vocab) {
  return {encode_corpus(read_lines(cfg.train_corpus), vocab), encode_corpus(read_lines(cfg.test_corpus), vocab)};
}

struct TrainSummary {
  std::size_t vocab_size = 0;
  std::vector<EpochReport> epochs;
  double train_perplexity = 0;
  double test_perplexity = 0;
  std::string model_hash;
};

inline TrainSummary run_train(const PipelineConfig& cfg, std::ostream& log) {
  cfg.validate();
  const auto train_lines = read_lines(cfg.train_corpus);
  const Vocabulary vocab = Vocabulary::build(train_lines, cfg.min_count, cfg.max_vocab);
  const Corpora corpora{encode_corpus(train_lines, vocab), encode_corpus(read_lines(cfg.test_corpus), vocab)};
  log << fmt::format("vocabulary: {} tokens, {} train / {} test sentences\n", vocab.size(),
                     corpora.train.size(), corpora.test.size());

  auto report = [&](const EpochReport& r) {
    log << fmt::format("epoch {:3d}  lr {:.4f}  loss {:.5f}  ppl {:.3f}\n", r.epoch, r.learning_rate,
                       r.mean_loss, std::exp(r.mean_loss));
    log.flush();
  };
  TrainSummary summary;
  LstmParams<double> params;
  if (cfg.float32) {
    auto result = train_lstm<float>(corpora.train, vocab.size(), cfg.model, report);
    params = result.params.cast<double>();
    summary.epochs = std::move(result.epochs);
  } else {
    auto result = train_lstm<double>(corpora.train, vocab.size(), cfg.model, report);
    params = std::move(result.params);
    summary.epochs = std::move(result.epochs);
  }
  const std::string text = serialize_model(vocab, params);
  write_file(cfg.model_path(), text);
  summary.vocab_size = vocab.size();
  summary.model_hash = sha256_hex(text);
  summary.train_perplexity = model_perplexity(corpora.train, params).perplexity;
  summary.test_perplexity = model_perplexity(corpora.test, params).perplexity;
  log << fmt::format("train perplexity {:.4f}\ntest perplexity {:.4f}\nwrote {} (sha256 {})\n",
                     summary.train_perplexity, summary.test_perplexity, cfg.model_path().string(),
                     summary.model_hash);
  return summary;
}

inline std::string format_table_report(const std::vector<ProbeTableRow>& rows, double rnn_test) {
  std::string out = fmt::format("{:<12} {:>12} {:>12}\n", "kind", "train_ppl", "test_ppl");
  for (const auto& row : rows) {
    out += fmt::format("{:<12} {:>12.3f} {:>12.3f}\n", row.kind.name(), row.train_perplexity,
                       row.test_perplexity);
  }
  out += fmt::format("{:<12} {:>12} {:>12.3f}\n", "rnn", "", rnn_test);
  return out;
}

inline ProbeBundle run_probe(const PipelineConfig& cfg, std::ostream& log) {
  cfg.validate();
  if (!std::filesystem::exists(cfg.model_path())) {
    throw IngestionError("model file '" + cfg.model_path().string() + "' not found; run `train` first");
  }
  const std::string model_text = read_file(cfg.model_path());
  const auto model = deserialize_model(model_text);
  const Corpora corpora = load_corpora(cfg, model.vocab);

  const auto datasets = extract_probe_datasets(corpora.train, corpora.test, model.params, cfg.probe_target);
  log << fmt::format("extracted {} kinds, {} train / {} test pairs each\n", datasets.size(),
                     datasets.begin()->second.train.size(), datasets.begin()->second.test.size());

  ProbeBundle bundle;
  bundle.model_hash = sha256_hex(model_text);
  const auto trained = train_all_probes(
      datasets, model.vocab.size(), cfg.probe, cfg.threads,
      [&](const StateKind& kind, const ProbeTrainResult& r) {
        log << fmt::format("probe {:<10} final epoch loss {:.5f}\n", kind.name(), r.epoch_losses.back());
        log.flush();
      });
  for (const auto& [kind, result] : trained) bundle.probes.emplace(kind, result.model);
  bundle.table = evaluate_probe_table(bundle.probes, datasets, model.params.num_layers());
  bundle.rnn_train_perplexity = model_perplexity(corpora.train, model.params).perplexity;
  bundle.rnn_test_perplexity = model_perplexity(corpora.test, model.params).perplexity;

  save_probes(cfg.probes_path(), bundle);
  write_file(cfg.table_path(), format_perplexity_table(bundle.table));
  log << format_table_report(bundle.table, bundle.rnn_test_perplexity);
  log << fmt::format("wrote {} and {}\n", cfg.probes_path().string(), cfg.table_path().string());
  return bundle;
}

struct EvalReport {
  double train_perplexity = 0;
  double test_perplexity = 0;
  std::vector<ProbeTableRow> table;  // empty when no bundle is present
};

inline EvalReport run_eval(const PipelineConfig& cfg, std::ostream& log) {
  const std::string model_text = read_file(cfg.model_path());
  const auto model = deserialize_model(model_text);
  const Corpora corpora = load_corpora(cfg, model.vocab);
  EvalReport report;
  report.train_perplexity = model_perplexity(corpora.train, model.params).perplexity;
  report.test_perplexity = model_perplexity(corpora.test, model.params).perplexity;
  log << fmt::format("model train perplexity {:.4f}\nmodel test perplexity {:.4f}\n",
                     report.train_perplexity, report.test_perplexity);
  if (std::filesystem::exists(cfg.probes_path())) {
    const auto bundle = load_probes(cfg.probes_path());
    if (bundle.model_hash != sha256_hex(model_text)) {
      throw FormatError("probe bundle does not belong to " + cfg.model_path().string());
    }
    const auto datasets = extract_probe_datasets(corpora.train, corpora.test, model.params, cfg.probe_target);
    report.table = evaluate_probe_table(bundle.probes, datasets, model.params.num_layers());
    log << format_table_report(report.table, report.test_perplexity);
  }
  return report;
}

inline Workbench load_workbench(const PipelineConfig& cfg) {
  auto wb = Workbench::load(cfg.model_path(), cfg.probes_path(), cfg.lexicon, cfg.colormap);
  wb.check_complete();
  return wb;
}

inline std::string run_export(const PipelineConfig& cfg, const std::string& sentence,
                              const std::filesystem::path& out_path, std::ostream& log) {
  if (detail::split_whitespace(sentence).empty()) throw IngestionError("cannot export an empty sentence");
  const Workbench wb = load_workbench(cfg);
  const auto grid = analyze_sentence(
      sentence, wb, EncodingConfig::for_vocabulary(wb.vocab.size(), cfg.bar_k, cfg.dominance_fraction));
  std::string svg = render_grid_svg(grid, wb.tags);
  write_file(out_path, svg);
  log << fmt::format("wrote {} ({} x {} cells)\n", out_path.string(), grid.rows(), grid.kinds.size());
  return svg;
}

}  // namespace psevis
