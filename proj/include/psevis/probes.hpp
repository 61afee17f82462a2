#pragma once

// Predictive semantic encodings: one linear softmax classifier per state
// kind, fit on (state vector, token) pairs extracted from a frozen model.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <future>
#include <map>
#include <numeric>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "psevis/corpus.hpp"
#include "psevis/errors.hpp"
#include "psevis/lstm.hpp"
#include "psevis/perplexity.hpp"
#include "psevis/rng.hpp"

namespace psevis {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// What a probe predicts from the state at timestep t.
enum class ProbeTarget {
  next_token,  // the token at t+1 (the language-model output label)
  input_token  // the token consumed at t
};

struct ProbeDataset {
  StateKind kind;
  RowMatrix inputs;  // one state vector per row
  std::vector<TokenId> targets;

  std::size_t size() const noexcept { return targets.size(); }
};

struct ProbeDatasetPair {
  ProbeDataset train;
  ProbeDataset test;
};

using ProbeDatasets = std::map<StateKind, ProbeDatasetPair>;

namespace detail {

template <class Scalar>
void fill_probe_split(const std::vector<TokenSequence>& corpus, const LstmParams<Scalar>& params,
                      ProbeTarget target, const std::vector<StateKind>& kinds, ProbeDatasets& out,
                      ProbeDataset ProbeDatasetPair::*split) {
  std::size_t total = 0;
  for (const auto& seq : corpus) total += seq.length();
  const Eigen::Index N = params.hidden_size();
  for (const auto& kind : kinds) {
    ProbeDataset& ds = out[kind].*split;
    ds.kind = kind;
    ds.inputs.resize(static_cast<Eigen::Index>(total), N);
    ds.targets.clear();
    ds.targets.reserve(total);
  }
  Eigen::Index row = 0;
  for (const auto& seq : corpus) {
    if (seq.length() == 0) continue;
    const auto fwd = forward_sequence(seq, params);
    const auto labels = target == ProbeTarget::next_token ? seq.targets() : seq.inputs();
    for (std::size_t t = 0; t < fwd.records.size(); ++t, ++row) {
      for (const auto& kind : kinds) {
        ProbeDataset& ds = out[kind].*split;
        ds.inputs.row(row) = fwd.records[t].vector(kind).template cast<double>().transpose();
        ds.targets.push_back(labels[t]);
      }
    }
  }
}

}  // namespace detail

/// One (state, label) pair per timestep per kind, for both splits.
template <class Scalar>
ProbeDatasets extract_probe_datasets(const std::vector<TokenSequence>& train,
                                     const std::vector<TokenSequence>& test,
                                     const LstmParams<Scalar>& params,
                                     ProbeTarget target = ProbeTarget::next_token) {
  const auto kinds = all_state_kinds(params.num_layers());
  ProbeDatasets out;
  detail::fill_probe_split(train, params, target, kinds, out, &ProbeDatasetPair::train);
  detail::fill_probe_split(test, params, target, kinds, out, &ProbeDatasetPair::test);
  return out;
}

struct ProbeModel {
  StateKind kind;
  Matrix<double> W;  // V x d
  Vector<double> b;  // V

  Eigen::Index vocab_size() const { return W.rows(); }
  Eigen::Index input_size() const { return W.cols(); }

  static ProbeModel zeros(StateKind kind, Eigen::Index vocab, Eigen::Index dim) {
    return {kind, Matrix<double>::Zero(vocab, dim), Vector<double>::Zero(vocab)};
  }

  /// The model's own output classifier viewed as a probe on the top-layer h.
  template <class Scalar>
  static ProbeModel from_classifier(const LstmParams<Scalar>& params) {
    return {StateKind::cell(CellVector::h, params.num_layers()), params.W_y.template cast<double>(),
            params.b_y.template cast<double>()};
  }
};

inline Vector<double> probe_predict(const ProbeModel& probe, const Vector<double>& v) {
  if (v.size() != probe.input_size()) {
    throw ShapeError("probe " + probe.kind.name() + " expects length " +
                     std::to_string(probe.input_size()) + ", got " + std::to_string(v.size()));
  }
  return softmax<double>(probe.W * v + probe.b);
}

namespace detail {

// Row-wise softmax in place; returns the summed -ln p(target).
inline double softmax_rows(RowMatrix& logits, std::span<const TokenId> targets) {
  double loss = 0;
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    auto row = logits.row(r);
    const double peak = row.maxCoeff();
    row = (row.array() - peak).exp().matrix();
    const double z = row.sum();
    row /= z;
    const TokenId y = targets[static_cast<std::size_t>(r)];
    loss -= std::log(std::max(row(y), 1e-300));
  }
  return loss;
}

}  // namespace detail

/// Probability assigned to the true label of every pair.
inline std::vector<double> probe_target_probabilities(const ProbeModel& probe,
                                                      const ProbeDataset& data,
                                                      Eigen::Index chunk = 1024) {
  if (data.inputs.cols() != probe.input_size()) {
    throw ShapeError("dataset for " + data.kind.name() + " has width " +
                     std::to_string(data.inputs.cols()) + ", probe expects " +
                     std::to_string(probe.input_size()));
  }
  std::vector<double> out;
  out.reserve(data.size());
  const Eigen::Index rows = data.inputs.rows();
  RowMatrix logits;
  for (Eigen::Index start = 0; start < rows; start += chunk) {
    const Eigen::Index n = std::min(chunk, rows - start);
    logits.noalias() = data.inputs.middleRows(start, n) * probe.W.transpose();
    logits.rowwise() += probe.b.transpose();
    for (Eigen::Index r = 0; r < n; ++r) {
      auto row = logits.row(r);
      const double peak = row.maxCoeff();
      const double log_z = peak + std::log((row.array() - peak).exp().sum());
      out.push_back(std::exp(row(data.targets[static_cast<std::size_t>(start + r)]) - log_z));
    }
  }
  return out;
}

inline PerplexityResult probe_perplexity(const ProbeModel& probe, const ProbeDataset& data) {
  return eval_perplexity(probe_target_probabilities(probe, data));
}

struct ProbeTrainConfig {
  int epochs = 12;
  double learning_rate = 2.0;
  double l2 = 1e-5;
  int batch_size = 256;
  double clip = 5.0;
  std::uint64_t seed = 4321;

  void validate() const {
    if (epochs <= 0 || batch_size <= 0) throw ConfigError("probe epochs and batch size must be positive");
    if (!(learning_rate > 0) || !(clip > 0) || !(l2 >= 0)) {
      throw ConfigError("probe learning rate and clip must be positive, l2 non-negative");
    }
  }
};

struct ProbeTrainResult {
  ProbeModel model;
  std::vector<double> epoch_losses;  // mean cross-entropy seen during each epoch
};

/// Mini-batch SGD on softmax cross-entropy with L2 weight decay on W and
/// gradient-norm clipping. Starts from `init`, or zeros if absent.
inline ProbeTrainResult train_probe(const ProbeDataset& data, std::size_t vocab_size,
                                    const ProbeTrainConfig& config,
                                    const ProbeModel* init = nullptr) {
  config.validate();
  if (data.size() == 0) throw IngestionError("probe training set for " + data.kind.name() + " is empty");
  for (const TokenId y : data.targets) {
    if (y < 0 || static_cast<std::size_t>(y) >= vocab_size) {
      throw ShapeError("probe target id outside vocabulary");
    }
  }
  const Eigen::Index V = static_cast<Eigen::Index>(vocab_size);
  const Eigen::Index d = data.inputs.cols();
  ProbeTrainResult result{init ? *init : ProbeModel::zeros(data.kind, V, d), {}};
  ProbeModel& model = result.model;
  if (model.vocab_size() != V || model.input_size() != d) {
    throw ShapeError("initial probe for " + data.kind.name() + " has the wrong shape");
  }

  Rng rng(config.seed);
  std::vector<Eigen::Index> order(data.size());
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  const auto B = static_cast<std::size_t>(config.batch_size);
  RowMatrix batch, logits;
  std::vector<TokenId> labels;
  Matrix<double> dW(V, d);
  Vector<double> db(V);
  std::size_t step = 0;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    rng.shuffle(order.begin(), order.end());
    double epoch_loss = 0;
    for (std::size_t start = 0; start < order.size(); start += B) {
      const std::size_t n = std::min(B, order.size() - start);
      batch.resize(static_cast<Eigen::Index>(n), d);
      labels.resize(n);
      for (std::size_t r = 0; r < n; ++r) {
        batch.row(static_cast<Eigen::Index>(r)) = data.inputs.row(order[start + r]);
        labels[r] = data.targets[static_cast<std::size_t>(order[start + r])];
      }
      logits.noalias() = batch * model.W.transpose();
      logits.rowwise() += model.b.transpose();
      const double loss = detail::softmax_rows(logits, labels);
      ++step;
      if (!std::isfinite(loss)) {
        throw TrainingError("probe " + data.kind.name() + " loss is not finite", step);
      }
      epoch_loss += loss;
      for (std::size_t r = 0; r < n; ++r) logits(static_cast<Eigen::Index>(r), labels[r]) -= 1.0;
      logits /= static_cast<double>(n);
      dW.noalias() = logits.transpose() * batch;
      dW += config.l2 * model.W;
      db = logits.colwise().sum().transpose();

      const double norm = std::sqrt(dW.squaredNorm() + db.squaredNorm());
      const double rate = config.learning_rate * (norm > config.clip ? config.clip / norm : 1.0);
      model.W -= rate * dW;
      model.b -= rate * db;
    }
    if (!model.W.allFinite() || !model.b.allFinite()) {
      throw TrainingError("probe " + data.kind.name() + " parameters became non-finite", step);
    }
    result.epoch_losses.push_back(epoch_loss / static_cast<double>(data.size()));
  }
  return result;
}

/// Trains every kind independently, `threads` at a time (0 = hardware).
inline std::map<StateKind, ProbeTrainResult> train_all_probes(
    const ProbeDatasets& datasets, std::size_t vocab_size, const ProbeTrainConfig& config,
    unsigned threads = 0,
    const std::function<void(const StateKind&, const ProbeTrainResult&)>& on_done = {}) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  std::vector<StateKind> kinds;
  for (const auto& [kind, _] : datasets) kinds.push_back(kind);

  std::map<StateKind, ProbeTrainResult> out;
  for (std::size_t start = 0; start < kinds.size(); start += threads) {
    const std::size_t end = std::min(kinds.size(), start + threads);
    std::vector<std::future<ProbeTrainResult>> jobs;
    for (std::size_t k = start; k < end; ++k) {
      const ProbeDataset* train = &datasets.at(kinds[k]).train;
      jobs.push_back(std::async(threads == 1 ? std::launch::deferred : std::launch::async,
                                [train, vocab_size, &config] {
                                  return train_probe(*train, vocab_size, config);
                                }));
    }
    for (std::size_t k = start; k < end; ++k) {
      auto result = jobs[k - start].get();
      if (on_done) on_done(kinds[k], result);
      out.emplace(kinds[k], std::move(result));
    }
  }
  return out;
}

struct ProbeTableRow {
  StateKind kind;
  double train_perplexity = 0;
  double test_perplexity = 0;
};

/// Per-kind perplexity on both splits, in column order. Throws when a kind
/// of the model is missing from `probes` or `datasets`.
inline std::vector<ProbeTableRow> evaluate_probe_table(const std::map<StateKind, ProbeModel>& probes,
                                                       const ProbeDatasets& datasets,
                                                       int num_layers) {
  std::string missing;
  for (const auto& kind : all_state_kinds(num_layers)) {
    if (!probes.contains(kind) || !datasets.contains(kind)) {
      missing += (missing.empty() ? "" : ", ") + kind.name();
    }
  }
  if (!missing.empty()) throw FormatError("probe table is missing kinds: " + missing);

  std::vector<ProbeTableRow> rows;
  for (const auto& kind : all_state_kinds(num_layers)) {
    const auto& probe = probes.at(kind);
    const auto& data = datasets.at(kind);
    rows.push_back({kind, probe_perplexity(probe, data.train).perplexity,
                    probe_perplexity(probe, data.test).perplexity});
  }
  return rows;
}

}  // namespace psevis
