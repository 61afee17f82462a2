// Acceptance suite. Prints one PASS/FAIL line per criterion and exits
// nonzero if any criterion fails.
//
//   acceptance [scratch_dir]
//
// The pipeline criteria run the bundled desk profile twice into scratch_dir.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>

#include <fmt/format.h>

#include "psevis/pipeline.hpp"
#include "test_support.hpp"

using namespace psevis;
using Clock = std::chrono::steady_clock;

namespace {

// Every tolerance used below.
constexpr double kGradientTolerance = 1e-4;
constexpr double kGradientSeconds = 60.0;
constexpr int kInvariantSteps = 1000;
constexpr double kInvariantTolerance = 1e-12;
constexpr double kPerplexityTolerance = 1e-6;
constexpr double kSpecializationTolerance = 1e-12;
constexpr double kProbeRatioLimit = 1.25;
constexpr double kPipelineMinutes = 30.0;
constexpr int kTopKTrials = 1000;
constexpr double kCellTolerance = 1e-12;

const std::string kSentence = "`` we stand in solidarity , '' she emphasized .";

struct Outcome {
  bool pass = true;
  std::vector<std::string> notes;

  void check(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      notes.push_back("failed: " + what);
    }
  }
  void note(const std::string& s) { notes.push_back(s); }
};

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

Outcome gradient_correctness() {
  Outcome out;
  const auto start = Clock::now();
  const auto p = oracle::random_params(7, 4, 2, 77, 0.5);
  const std::vector<TokenId> inputs{1, 4, 2, 6, 3};
  const std::vector<TokenId> targets{4, 2, 6, 3, 0};
  const auto grads = oracle::analytic_gradient(inputs, targets, p);
  const auto check = oracle::finite_difference_check(inputs, targets, p, grads);
  const double elapsed = seconds_since(start);
  out.check(check.max_relative_error.size() == 19, "19 parameter tensors compared");
  for (const auto& [name, err] : check.max_relative_error) out.check(err < kGradientTolerance, name);
  out.check(elapsed < kGradientSeconds, "runtime");
  out.note(fmt::format("max relative error {:.3e} over {} tensors, {:.2f} s", check.overall,
                       check.max_relative_error.size(), elapsed));
  return out;
}

Outcome lstm_invariants() {
  Outcome out;
  Rng rng(2024);
  const Eigen::Index N = 5;
  double worst = 0;
  bool ranges = true;
  for (int step = 0; step < kInvariantSteps; ++step) {
    const auto p = oracle::random_params(6, N, 2, 5000 + static_cast<std::uint64_t>(step), 2.0);
    auto state = RecurrentState<double>::zeros(2, N);
    for (std::size_t u = 0; u < 2; ++u) {
      for (Eigen::Index k = 0; k < N; ++k) {
        state.c[u](k) = rng.uniform(-3, 3);
        state.h[u](k) = rng.uniform(-1, 1);
      }
    }
    const auto prev_c = state.c;
    Vector<double> input(N);
    for (Eigen::Index k = 0; k < N; ++k) input(k) = rng.uniform(-1, 1);
    const auto rec = lstm_step<double>(input, state, p);
    for (std::size_t u = 0; u < 2; ++u) {
      const auto& s = rec.layers[u];
      for (Eigen::Index k = 0; k < N; ++k) {
        const auto open = [](double v, double lo, double hi) { return v > lo && v < hi; };
        ranges = ranges && open(s.f(k), 0, 1) && open(s.i(k), 0, 1) && open(s.o(k), 0, 1) &&
                 open(s.c_tilde(k), -1, 1) && open(s.h(k), -1, 1);
        worst = std::max({worst, std::abs(s.l(k) - s.f(k) * prev_c[u](k)),
                          std::abs(s.s(k) - s.i(k) * s.c_tilde(k)), std::abs(s.c(k) - (s.l(k) + s.s(k))),
                          std::abs(s.h(k) - s.o(k) * std::tanh(s.c(k)))});
      }
    }
  }
  out.check(ranges, "gate ranges");
  out.check(worst <= kInvariantTolerance, "identities");
  out.note(fmt::format("{} steps, worst identity residual {:.3e}", kInvariantSteps, worst));
  return out;
}

Outcome perplexity_units() {
  Outcome out;
  const std::size_t V = 929;
  const std::vector<double> uniform(50, 1.0 / static_cast<double>(V));
  const double u = eval_perplexity(uniform).perplexity;
  const double one = eval_perplexity(std::vector<double>(50, 1.0)).perplexity;
  const double pair = eval_perplexity(std::vector<double>{0.5, 0.25}).perplexity;
  // Same check through a model: a zero classifier is uniform over V.
  const auto zero = LstmParams<double>::zeros(static_cast<Eigen::Index>(V), 3, 1);
  std::vector<TokenSequence> corpus(1);
  corpus[0].ids = {1, 5, 9, 2, 0};
  const double model_u = model_perplexity(corpus, zero).perplexity;
  out.check(std::abs(u - static_cast<double>(V)) <= 1e-9 * static_cast<double>(V), "uniform gives V");
  out.check(std::abs(model_u - static_cast<double>(V)) <= 1e-9 * static_cast<double>(V), "uniform model gives V");
  out.check(one == 1.0, "all-correct gives 1");
  // 2.8284 is sqrt(8) to four places; the tolerance applies to the exact value.
  out.check(std::abs(pair - std::sqrt(8.0)) <= kPerplexityTolerance, "p=[0.5,0.25] gives sqrt(8)");
  out.note(fmt::format("uniform {} (V={}), model {}, certain {}, pair {:.10f}", u, V, model_u, one, pair));
  return out;
}

struct PipelineRun {
  PipelineConfig cfg;
  ProbeBundle bundle;
  TrainSummary summary;
  double seconds = 0;
  std::string model, probes, table, svg;
};

PipelineRun run_pipeline(const std::filesystem::path& out_dir) {
  PipelineRun run;
  run.cfg = PipelineConfig::load(oracle::source_dir() / "configs" / "desk.json");
  run.cfg.output_dir = out_dir;
  std::filesystem::remove_all(out_dir);
  std::ostringstream log;
  const auto start = Clock::now();
  run.summary = run_train(run.cfg, log);
  run.bundle = run_probe(run.cfg, log);
  run_export(run.cfg, kSentence, run.cfg.svg_path(), log);
  run.seconds = seconds_since(start);
  run.model = read_file(run.cfg.model_path());
  run.probes = read_file(run.cfg.probes_path());
  run.table = read_file(run.cfg.table_path());
  run.svg = read_file(run.cfg.svg_path());
  return run;
}

Outcome specialization(const PipelineRun& run) {
  Outcome out;
  const auto model = deserialize_model(run.model);
  const auto corpora = load_corpora(run.cfg, model.vocab);
  const auto probe = ProbeModel::from_classifier(model.params);
  const auto datasets = extract_probe_datasets(corpora.train, corpora.test, model.params);
  const auto& test = datasets.at(probe.kind).test;

  double worst = 0;
  for (Eigen::Index r = 0; r < static_cast<Eigen::Index>(test.size()); r += 7) {
    const Vector<double> h = test.inputs.row(r).transpose();
    worst = std::max(worst, (probe_predict(probe, h) - classify(h, model.params)).cwiseAbs().maxCoeff());
  }
  const double probe_ppl = probe_perplexity(probe, test).perplexity;
  const double rnn_ppl = model_perplexity(corpora.test, model.params).perplexity;
  const double rel = std::abs(probe_ppl - rnn_ppl) / rnn_ppl;
  out.check(probe.kind.name() == fmt::format("h_{}", model.params.num_layers()), "copied into final-layer h");
  out.check(worst <= kSpecializationTolerance, "distributions");
  out.check(rel <= kSpecializationTolerance, "test perplexity");
  out.note(fmt::format("max |probe - classify| {:.3e}; probe ppl {:.12f} vs rnn {:.12f} (rel {:.1e})", worst,
                       probe_ppl, rnn_ppl, rel));
  return out;
}

Outcome probe_ordering(const PipelineRun& run) {
  Outcome out;
  const int U = run.cfg.model.num_layers;
  auto rows = run.bundle.table;
  const auto ppl_of = [&](const StateKind& k) {
    return std::find_if(rows.begin(), rows.end(), [&](const auto& r) { return r.kind == k; })->test_perplexity;
  };
  std::sort(rows.begin(), rows.end(),
            [](const auto& a, const auto& b) { return a.test_perplexity < b.test_perplexity; });
  const auto h = StateKind::cell(CellVector::h, U);
  const auto l = StateKind::cell(CellVector::l, U);
  const auto c = StateKind::cell(CellVector::c, U);

  out.check(rows.size() == 17, "17 kinds");
  out.check(rows[0].kind == h && rows[1].test_perplexity > rows[0].test_perplexity, "final h strictly lowest");
  const auto& top1 = rows[rows.size() - 1];
  const auto& top2 = rows[rows.size() - 2];
  const auto& third = rows[rows.size() - 3];
  const bool l_c_top = ((top1.kind == l && top2.kind == c) || (top1.kind == c && top2.kind == l)) &&
                       top2.test_perplexity > third.test_perplexity;
  out.check(l_c_top, "final l and c strictly the two highest");
  const double ratio = ppl_of(h) / run.bundle.rnn_test_perplexity;
  out.check(ratio <= kProbeRatioLimit, "final h within 1.25x of the RNN");
  out.check(run.seconds < kPipelineMinutes * 60, "pipeline runtime");

  std::string ranking;
  for (const auto& r : rows) ranking += fmt::format(" {}={:.2f}", r.kind.name(), r.test_perplexity);
  out.note("ascending test ppl:" + ranking);
  out.note(fmt::format("rnn test ppl {:.3f}; h_{} ratio {:.3f}; l_{} rank {} and c_{} rank {} of 17 (17 = highest)",
                       run.bundle.rnn_test_perplexity, U, ratio, U,
                       std::find_if(rows.begin(), rows.end(), [&](const auto& r) { return r.kind == l; }) -
                           rows.begin() + 1,
                       U,
                       std::find_if(rows.begin(), rows.end(), [&](const auto& r) { return r.kind == c; }) -
                           rows.begin() + 1));
  out.note(fmt::format("pipeline (train + probe + export) took {:.0f} s", run.seconds));
  return out;
}

Outcome encoding_laws() {
  Outcome out;
  const Rgb green = parse_hex_color("#00AA00");
  const Rgb white{255, 255, 255};
  for (std::size_t m : {2u, 3u, 5u, 8u}) {
    out.check(interpolate_swatch(green, 1.0, m) == green, fmt::format("pure color at m={}", m));
    out.check(interpolate_swatch(green, 1.0 / static_cast<double>(m), m) == white,
              fmt::format("white at 1/m, m={}", m));
    double prev = -1;
    bool monotone = true;
    for (int step = 0; step <= 10000; ++step) {
      const double t = swatch_saturation(step / 10000.0, m);
      monotone = monotone && t >= prev;
      prev = t;
    }
    out.check(monotone, fmt::format("monotone at m={}", m));
    // Dominance never falls below 1/m, so the 0.3333 case needs at least three colors.
    if (m >= 3) {
      const double a = swatch_saturation(0.90, m), b = swatch_saturation(0.50, m), c = swatch_saturation(0.3333, m);
      out.check(a > b && b > c, fmt::format("0.90 > 0.50 > 0.3333 saturation at m={}", m));
    }
  }

  Rng rng(11);
  int mismatches = 0;
  for (int trial = 0; trial < kTopKTrials; ++trial) {
    const std::size_t n = 1 + rng.below(60);
    std::vector<double> dist(n);
    double total = 0;
    for (auto& v : dist) total += v = (trial % 2 == 0) ? static_cast<double>(rng.below(4)) : rng.uniform();
    if (total == 0) dist[0] = total = 1;
    for (auto& v : dist) v /= total;
    const std::size_t k = 1 + rng.below(n + 3);
    std::vector<std::size_t> order(n);
    for (std::size_t j = 0; j < n; ++j) order[j] = j;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return dist[x] > dist[y]; });
    const auto got = top_k(dist, k);
    bool same = got.size() == std::min(k, n);
    for (std::size_t j = 0; same && j < got.size(); ++j) {
      same = static_cast<std::size_t>(got[j].id) == order[j] && got[j].probability == dist[order[j]];
    }
    mismatches += same ? 0 : 1;
  }
  out.check(mismatches == 0, "top-k vs full sort");
  out.note(fmt::format("top-k: {} trials, {} mismatches; m=3 saturations 0.90->{:.3f} 0.50->{:.3f} 0.3333->{:.5f}",
                       kTopKTrials, mismatches, swatch_saturation(0.90, 3), swatch_saturation(0.50, 3),
                       swatch_saturation(0.3333, 3)));
  return out;
}

Outcome determinism(const PipelineRun& a, const PipelineRun& b) {
  Outcome out;
  out.check(a.model == b.model, "model file");
  out.check(a.probes == b.probes, "probe bundle");
  out.check(a.table == b.table, "perplexity table");
  out.check(a.svg == b.svg, "SVG export");
  out.note(fmt::format("model sha256 {} / {}", sha256_hex(a.model).substr(0, 16), sha256_hex(b.model).substr(0, 16)));
  out.note(fmt::format("bundle sha256 {} / {}", sha256_hex(a.probes).substr(0, 16),
                       sha256_hex(b.probes).substr(0, 16)));
  return out;
}

Outcome api_contract(const PipelineRun& run) {
  Outcome out;
  auto wb = std::make_shared<const Workbench>(load_workbench(run.cfg));
  PseService service(run.cfg.service);
  service.load(wb);
  const auto response = service.handle_analyze(nlohmann::json{{"sentence", kSentence}}.dump());
  out.check(response.status == 200, "status 200");
  if (response.status != 200) return out;
  const auto j = nlohmann::json::parse(response.body);

  const auto seq = encode_sentence(kSentence, wb->vocab);
  const std::size_t T = seq.length();
  out.check(j["grid"].size() == T, "T rows");
  bool widths = true;
  for (const auto& row : j["grid"]) widths = widths && row.size() == 17;
  out.check(widths, "17 cells per row");

  // Columns must be ordered so every kind sits right of what it depends on.
  const auto col = [&](const std::string& name) { return j["layout_hints"][name]["column"].get<int>(); };
  bool ordered = col("embedding") < col("f_1");
  for (int u = 1; u <= wb->params.num_layers(); ++u) {
    const auto n = [u](const char* v) { return fmt::format("{}_{}", v, u); };
    for (const char* gate : {"f", "i", "o", "c_tilde"}) {
      ordered = ordered && col(n(gate)) > (u == 1 ? col("embedding") : col(fmt::format("h_{}", u - 1)));
    }
    ordered = ordered && col(n("l")) > col(n("f")) && col(n("s")) > col(n("i")) && col(n("s")) > col(n("c_tilde")) &&
              col(n("c")) > col(n("l")) && col(n("c")) > col(n("s")) && col(n("h")) > col(n("o")) &&
              col(n("h")) > col(n("c"));
  }
  ordered = ordered && col("y") > col(fmt::format("h_{}", wb->params.num_layers()));
  out.check(ordered, "layout_hints respect dependence order");

  // Offline recomputation of one cell: scalar LSTM plus a plain-loop softmax.
  const std::size_t t_cell = 4;
  const auto kind = StateKind::cell(CellVector::c, wb->params.num_layers());
  const auto N = static_cast<std::size_t>(wb->params.hidden_size());
  std::vector<std::vector<double>> h(static_cast<std::size_t>(wb->params.num_layers()), std::vector<double>(N, 0.0));
  auto c = h;
  std::vector<double> state;
  for (std::size_t t = 0; t <= t_cell; ++t) {
    std::vector<double> emb(N);
    for (std::size_t k = 0; k < N; ++k) emb[k] = wb->params.embedding(seq.ids[t], static_cast<Eigen::Index>(k));
    state = oracle::scalar_lstm_step(emb, h, c, wb->params).back().c;
  }
  const auto& probe = wb->bundle.probes.at(kind);
  std::vector<double> logits(wb->vocab.size());
  double max_logit = -std::numeric_limits<double>::infinity();
  for (std::size_t y = 0; y < logits.size(); ++y) {
    double acc = probe.b(static_cast<Eigen::Index>(y));
    for (std::size_t k = 0; k < N; ++k) acc += probe.W(static_cast<Eigen::Index>(y), static_cast<Eigen::Index>(k)) * state[k];
    logits[y] = acc;
    max_logit = std::max(max_logit, acc);
  }
  double z = 0;
  for (auto& v : logits) z += v = std::exp(v - max_logit);
  for (auto& v : logits) v /= z;
  const auto enc = EncodingConfig::for_vocabulary(wb->vocab.size());
  const auto expected = encode_pse(logits, kind, t_cell, wb->vocab, wb->tags, enc);
  const auto& cell = j["grid"][t_cell][kind.column()];
  out.check(cell["swatch"] == to_hex(expected.swatch), "cell swatch");
  out.check(cell["dominant_tag"] == expected.dominant_tag, "cell dominant tag");
  double worst = std::abs(cell["dominance"].get<double>() - expected.dominance);
  bool tokens = cell["bars"].size() == expected.bars.size();
  for (std::size_t b = 0; tokens && b < expected.bars.size(); ++b) {
    tokens = cell["bars"][b]["token"] == expected.bars[b].token;
    worst = std::max(worst, std::abs(cell["bars"][b]["probability"].get<double>() - expected.bars[b].probability));
  }
  out.check(tokens, "cell bar tokens");
  out.check(worst <= kCellTolerance, "cell probabilities");

  // Through the library path the payload must round-trip bit for bit.
  const auto fwd = forward_sequence(seq, wb->params);
  const auto lib = encode_pse(probe_predict(probe, fwd.records[t_cell].vector(kind)), kind, t_cell, wb->vocab,
                              wb->tags, enc);
  out.check(cell == nlohmann::json::parse(encoding_to_json(lib).dump()), "cell equals library encoding exactly");
  out.note(fmt::format("grid {} x {}; cell ({}, {}) swatch {} tag {}; worst probability gap {:.2e}", T,
                       j["grid"][0].size(), t_cell, kind.name(), to_hex(expected.swatch),
                       expected.dominant_tag, worst));
  return out;
}

int report(const std::string& name, const std::function<Outcome()>& criterion) {
  Outcome out;
  try {
    out = criterion();
  } catch (const std::exception& e) {
    out.pass = false;
    out.note(std::string("exception: ") + e.what());
  }
  std::cout << (out.pass ? "PASS " : "FAIL ") << name << "\n";
  for (const auto& n : out.notes) std::cout << "     " << n << "\n";
  std::cout.flush();
  return out.pass ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  const std::filesystem::path scratch = argc > 1 ? argv[1] : PSEVIS_ACCEPTANCE_DIR;
  int failures = 0;
  failures += report("gradient correctness", gradient_correctness);
  failures += report("lstm algebraic invariants", lstm_invariants);
  failures += report("perplexity unit checks", perplexity_units);
  failures += report("encoding laws", encoding_laws);

  std::optional<PipelineRun> a, b;
  std::string pipeline_error;
  try {
    std::cout << "running the desk pipeline twice into " << scratch.string() << "\n" << std::flush;
    a = run_pipeline(scratch / "run_a");
    b = run_pipeline(scratch / "run_b");
  } catch (const std::exception& e) {
    pipeline_error = e.what();
  }
  const auto needs_runs = [&](auto body) {
    return [&, body]() -> Outcome {
      if (!a || !b) throw std::runtime_error("pipeline failed: " + pipeline_error);
      return body();
    };
  };
  failures += report("specialization identity", needs_runs([&] { return specialization(*a); }));
  failures += report("probe perplexity ordering", needs_runs([&] { return probe_ordering(*a); }));
  failures += report("determinism", needs_runs([&] { return determinism(*a, *b); }));
  failures += report("api contract", needs_runs([&] { return api_contract(*a); }));

  std::cout << fmt::format("{} of 8 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
