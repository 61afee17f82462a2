#pragma once

// Versioned JSON documents for the model and the probe bundle, and the CSV
// perplexity table. Doubles are written in shortest round-trip form, so a
// save/load cycle is bit-exact.

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include "psevis/corpus.hpp"
#include "psevis/errors.hpp"
#include "psevis/lstm.hpp"
#include "psevis/probes.hpp"

namespace psevis {

inline constexpr int kModelFormatVersion = 1;
inline constexpr int kProbeFormatVersion = 1;

using Json = nlohmann::ordered_json;

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IngestionError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::filesystem::path& path, const std::string& contents) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IngestionError("cannot write '" + path.string() + "'");
  out << contents;
  if (!out) throw IngestionError("failed writing '" + path.string() + "'");
}

inline std::string sha256_hex(const std::string& data) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest.data(), &len, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("sha256 failed");
  }
  std::string hex;
  char buf[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(buf, sizeof buf, "%02x", digest[i]);
    hex += buf;
  }
  return hex;
}

namespace detail {

template <class Derived>
Json tensor_to_json(const std::string& name, const Eigen::MatrixBase<Derived>& t) {
  Json data = Json::array();
  for (Eigen::Index r = 0; r < t.rows(); ++r) {
    for (Eigen::Index c = 0; c < t.cols(); ++c) data.push_back(static_cast<double>(t(r, c)));
  }
  return Json{{"name", name}, {"shape", {t.rows(), t.cols()}}, {"data", std::move(data)}};
}

template <class Derived>
void tensor_from_json(const Json& j, const std::string& name, Eigen::MatrixBase<Derived>& t) {
  const auto& shape = j.at("shape");
  const auto& data = j.at("data");
  if (shape.size() != 2 || shape[0].get<Eigen::Index>() != t.rows() ||
      shape[1].get<Eigen::Index>() != t.cols()) {
    throw FormatError("tensor " + name + " has shape " + shape.dump() + ", expected [" +
                      std::to_string(t.rows()) + "," + std::to_string(t.cols()) + "]");
  }
  if (data.size() != static_cast<std::size_t>(t.rows() * t.cols())) {
    throw FormatError("tensor " + name + " has " + std::to_string(data.size()) + " values");
  }
  std::size_t k = 0;
  for (Eigen::Index r = 0; r < t.rows(); ++r) {
    for (Eigen::Index c = 0; c < t.cols(); ++c) {
      t(r, c) = static_cast<typename Derived::Scalar>(data[k++].get<double>());
    }
  }
}

inline Json parse_json(const std::string& text, const std::string& what) {
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(what + ": " + e.what());
  }
}

}  // namespace detail

struct ModelFile {
  Vocabulary vocab;
  LstmParams<double> params;
};

inline std::string serialize_model(const Vocabulary& vocab, const LstmParams<double>& params) {
  params.validate();
  if (static_cast<std::size_t>(params.vocab_size()) != vocab.size()) {
    throw ShapeError("model vocabulary size differs from the vocabulary listing");
  }
  Json doc;
  doc["format"] = "psevis-lstm";
  doc["format_version"] = kModelFormatVersion;
  doc["V"] = params.vocab_size();
  doc["N"] = params.hidden_size();
  doc["U"] = params.num_layers();
  doc["vocabulary"] = {{"tokens", vocab.tokens()}, {"counts", vocab.counts()}};
  Json tensors = Json::array();
  params.for_each_tensor(
      [&](const std::string& name, const auto& t) { tensors.push_back(detail::tensor_to_json(name, t)); });
  doc["tensors"] = std::move(tensors);
  return doc.dump(1) + "\n";
}

inline ModelFile deserialize_model(const std::string& text) {
  const Json doc = detail::parse_json(text, "model file");
  try {
    if (doc.value("format", "") != "psevis-lstm") throw FormatError("not a psevis model file");
    const int version = doc.at("format_version").get<int>();
    if (version != kModelFormatVersion) {
      throw FormatError("unsupported model format_version " + std::to_string(version));
    }
    const auto V = doc.at("V").get<Eigen::Index>();
    const auto N = doc.at("N").get<Eigen::Index>();
    const auto U = doc.at("U").get<int>();
    auto vocab = Vocabulary::from_listing(doc.at("vocabulary").at("tokens").get<std::vector<std::string>>(),
                                          doc.at("vocabulary").at("counts").get<std::vector<std::uint64_t>>());
    if (static_cast<Eigen::Index>(vocab.size()) != V) throw FormatError("vocabulary listing size differs from V");
    auto params = LstmParams<double>::zeros(V, N, U);
    std::map<std::string, const Json*> by_name;
    for (const auto& t : doc.at("tensors")) by_name[t.at("name").get<std::string>()] = &t;
    params.for_each_tensor([&](const std::string& name, auto& t) {
      const auto it = by_name.find(name);
      if (it == by_name.end()) throw FormatError("model file is missing tensor " + name);
      detail::tensor_from_json(*it->second, name, t);
    });
    if (by_name.size() != 2 + 8 * static_cast<std::size_t>(U) + 1) {
      throw FormatError("model file has unexpected extra tensors");
    }
    return {std::move(vocab), std::move(params)};
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("model file: ") + e.what());
  }
}

inline void save_model(const std::filesystem::path& path, const Vocabulary& vocab,
                       const LstmParams<double>& params) {
  write_file(path, serialize_model(vocab, params));
}

inline ModelFile load_model(const std::filesystem::path& path) {
  return deserialize_model(read_file(path));
}

/// Trained probes plus their evaluation, tied to one model file by hash.
struct ProbeBundle {
  std::string model_hash;
  std::map<StateKind, ProbeModel> probes;
  std::vector<ProbeTableRow> table;
  double rnn_train_perplexity = 0;
  double rnn_test_perplexity = 0;

  /// Names of the model's kinds that have no probe.
  std::vector<std::string> missing_kinds(int num_layers) const {
    std::vector<std::string> out;
    for (const auto& kind : all_state_kinds(num_layers)) {
      if (!probes.contains(kind)) out.push_back(kind.name());
    }
    return out;
  }
};

inline std::string serialize_probes(const ProbeBundle& bundle) {
  Json doc;
  doc["format"] = "psevis-probes";
  doc["format_version"] = kProbeFormatVersion;
  doc["model_hash"] = bundle.model_hash;
  doc["rnn_perplexity"] = {{"train", bundle.rnn_train_perplexity}, {"test", bundle.rnn_test_perplexity}};
  Json probes = Json::array();
  for (const auto& [kind, probe] : bundle.probes) {
    Json p;
    p["kind"] = kind.name();
    p["layer"] = kind.layer;
    p["W"] = detail::tensor_to_json("W", probe.W);
    p["b"] = detail::tensor_to_json("b", probe.b);
    probes.push_back(std::move(p));
  }
  doc["probes"] = std::move(probes);
  Json table = Json::array();
  for (const auto& row : bundle.table) {
    table.push_back({{"kind", row.kind.name()},
                     {"train_ppl", row.train_perplexity},
                     {"test_ppl", row.test_perplexity}});
  }
  doc["perplexity"] = std::move(table);
  return doc.dump(1) + "\n";
}

inline ProbeBundle deserialize_probes(const std::string& text) {
  const Json doc = detail::parse_json(text, "probe bundle");
  try {
    if (doc.value("format", "") != "psevis-probes") throw FormatError("not a psevis probe bundle");
    const int version = doc.at("format_version").get<int>();
    if (version != kProbeFormatVersion) {
      throw FormatError("unsupported probe format_version " + std::to_string(version));
    }
    ProbeBundle bundle;
    bundle.model_hash = doc.at("model_hash").get<std::string>();
    bundle.rnn_train_perplexity = doc.at("rnn_perplexity").at("train").get<double>();
    bundle.rnn_test_perplexity = doc.at("rnn_perplexity").at("test").get<double>();
    for (const auto& p : doc.at("probes")) {
      const auto name = p.at("kind").get<std::string>();
      const auto kind = StateKind::parse(name);
      if (!kind || kind->layer != p.at("layer").get<int>()) {
        throw FormatError("probe bundle has unknown kind '" + name + "'");
      }
      const auto& Wj = p.at("W");
      ProbeModel model = ProbeModel::zeros(*kind, Wj.at("shape")[0].get<Eigen::Index>(),
                                           Wj.at("shape")[1].get<Eigen::Index>());
      detail::tensor_from_json(Wj, name + ".W", model.W);
      detail::tensor_from_json(p.at("b"), name + ".b", model.b);
      bundle.probes.emplace(*kind, std::move(model));
    }
    for (const auto& row : doc.at("perplexity")) {
      const auto kind = StateKind::parse(row.at("kind").get<std::string>());
      if (!kind) throw FormatError("perplexity table has unknown kind");
      bundle.table.push_back({*kind, row.at("train_ppl").get<double>(), row.at("test_ppl").get<double>()});
    }
    return bundle;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("probe bundle: ") + e.what());
  }
}

inline void save_probes(const std::filesystem::path& path, const ProbeBundle& bundle) {
  write_file(path, serialize_probes(bundle));
}

inline ProbeBundle load_probes(const std::filesystem::path& path) {
  return deserialize_probes(read_file(path));
}

inline std::string format_double(double v) {
  // nlohmann's serializer gives the shortest representation that round-trips.
  return nlohmann::json(v).dump();
}

/// `kind,layer,train_ppl,test_ppl` CSV, one row per kind.
inline std::string format_perplexity_table(const std::vector<ProbeTableRow>& rows) {
  std::string out = "kind,layer,train_ppl,test_ppl\n";
  for (const auto& row : rows) {
    out += std::string(row.kind.type_name()) + "," + std::to_string(row.kind.layer) + "," +
           format_double(row.train_perplexity) + "," + format_double(row.test_perplexity) + "\n";
  }
  return out;
}

inline std::vector<ProbeTableRow> parse_perplexity_table(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != "kind,layer,train_ppl,test_ppl") {
    throw FormatError("perplexity table has an unexpected header");
  }
  std::vector<ProbeTableRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != 4) throw FormatError("perplexity table row has " + std::to_string(cells.size()) + " cells");
    const std::string name = cells[0] == "embedding" ? cells[0] : cells[0] + "_" + cells[1];
    const auto kind = StateKind::parse(name);
    if (!kind) throw FormatError("perplexity table has unknown kind '" + name + "'");
    rows.push_back({*kind, std::stod(cells[2]), std::stod(cells[3])});
  }
  return rows;
}

}  // namespace psevis
