#pragma once

// Sentence -> per-timestep, per-kind encoding grid. Shared by the HTTP
// service and the static SVG export so both render the same numbers.

#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "psevis/corpus.hpp"
#include "psevis/encoding.hpp"
#include "psevis/lstm.hpp"
#include "psevis/probes.hpp"
#include "psevis/serialization.hpp"

namespace psevis {

/// Everything needed to analyze sentences. Immutable once built.
struct Workbench {
  Vocabulary vocab;
  LstmParams<double> params;
  ProbeBundle bundle;
  TagMap tags;
  std::string model_hash;

  int num_layers() const { return params.num_layers(); }

  /// Throws FormatError when probes are missing or belong to another model.
  void check_complete() const {
    const auto missing = bundle.missing_kinds(num_layers());
    if (!missing.empty()) {
      std::string names;
      for (const auto& m : missing) names += (names.empty() ? "" : ", ") + m;
      throw FormatError("probe bundle is missing kinds: " + names);
    }
    if (bundle.model_hash != model_hash) {
      throw FormatError("probe bundle was trained for a different model file");
    }
    for (const auto& [kind, probe] : bundle.probes) {
      if (probe.vocab_size() != params.vocab_size() || probe.input_size() != params.hidden_size()) {
        throw ShapeError("probe " + kind.name() + " does not match the model dimensions");
      }
    }
  }

  static Workbench load(const std::filesystem::path& model_path,
                        const std::filesystem::path& probes_path,
                        const std::filesystem::path& lexicon_path,
                        const std::filesystem::path& colormap_path) {
    const std::string model_text = read_file(model_path);
    auto model = deserialize_model(model_text);
    return Workbench{std::move(model.vocab), std::move(model.params), load_probes(probes_path),
                     TagMap::load(lexicon_path, colormap_path), sha256_hex(model_text)};
  }
};

struct AnalysisGrid {
  std::vector<std::string> tokens;  // source spelling, one per row
  std::vector<TokenId> ids;
  std::vector<StateKind> kinds;     // column order
  std::vector<std::vector<PseEncoding>> cells;  // [t][column]
  std::vector<PseEncoding> outputs;             // the model's own y_t
  EncodingConfig config;

  std::size_t rows() const { return tokens.size(); }
};

inline AnalysisGrid analyze_sentence(std::string_view sentence, const Workbench& wb,
                                     const EncodingConfig& config) {
  const TokenSequence seq = encode_sentence(sentence, wb.vocab);
  const auto fwd = forward_sequence(seq, wb.params);

  AnalysisGrid grid;
  grid.config = config;
  grid.kinds = all_state_kinds(wb.num_layers());
  grid.ids.assign(seq.inputs().begin(), seq.inputs().end());
  grid.tokens.assign(seq.source_tokens.begin(), seq.source_tokens.end() - 1);
  for (std::size_t t = 0; t < fwd.records.size(); ++t) {
    const auto& rec = fwd.records[t];
    std::vector<PseEncoding> row;
    row.reserve(grid.kinds.size());
    for (const auto& kind : grid.kinds) {
      const auto dist = probe_predict(wb.bundle.probes.at(kind), rec.vector(kind));
      row.push_back(encode_pse(dist, kind, t, wb.vocab, wb.tags, config));
    }
    grid.cells.push_back(std::move(row));
    const auto y = classify(rec.layers.back().h, wb.params);
    grid.outputs.push_back(encode_pse(y, std::nullopt, t, wb.vocab, wb.tags, config));
  }
  return grid;
}

inline nlohmann::ordered_json encoding_to_json(const PseEncoding& enc) {
  nlohmann::ordered_json bars = nlohmann::ordered_json::array();
  for (const auto& bar : enc.bars) {
    bars.push_back({{"token", bar.token},
                    {"id", bar.id},
                    {"tag", bar.tag},
                    {"probability", bar.probability},
                    {"color", to_hex(bar.color)}});
  }
  return {{"kind", enc.label()},
          {"layer", enc.kind ? enc.kind->layer : -1},
          {"timestep", enc.timestep},
          {"bars", std::move(bars)},
          {"dominant_color", to_hex(enc.dominant_color)},
          {"dominant_tag", enc.dominant_tag},
          {"dominance", enc.dominance},
          {"swatch", to_hex(enc.swatch)}};
}

/// Column of every kind plus the output column "y" on the far right.
inline nlohmann::ordered_json layout_hints(int num_layers) {
  nlohmann::ordered_json hints = nlohmann::ordered_json::object();
  const auto kinds = all_state_kinds(num_layers);
  for (const auto& kind : kinds) {
    hints[kind.name()] = {{"column", kind.column()}, {"layer", kind.layer}, {"type", kind.type_name()}};
  }
  hints["y"] = {{"column", kinds.size()}, {"layer", num_layers}, {"type", "y"}};
  return hints;
}

inline nlohmann::ordered_json grid_to_json(const AnalysisGrid& grid, int num_layers) {
  nlohmann::ordered_json kinds = nlohmann::ordered_json::array();
  for (const auto& kind : grid.kinds) kinds.push_back(kind.name());
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  nlohmann::ordered_json outputs = nlohmann::ordered_json::array();
  for (std::size_t t = 0; t < grid.rows(); ++t) {
    nlohmann::ordered_json row = nlohmann::ordered_json::array();
    for (const auto& cell : grid.cells[t]) row.push_back(encoding_to_json(cell));
    rows.push_back(std::move(row));
    outputs.push_back(encoding_to_json(grid.outputs[t]));
  }
  return {{"tokens", grid.tokens},
          {"ids", grid.ids},
          {"k", grid.config.bar_count},
          {"dominance_k", grid.config.dominance_k},
          {"kinds", std::move(kinds)},
          {"layout_hints", layout_hints(num_layers)},
          {"grid", std::move(rows)},
          {"outputs", std::move(outputs)}};
}

}  // namespace psevis
