#pragma once

// Stacked LSTM language model. Every layer consumes the concatenation
// [h_t^{u-1}, h_{t-1}^u] (length 2N) through N x 2N gate matrices; layer 1's
// input is the embedding row of the current token.

#include <array>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "psevis/corpus.hpp"
#include "psevis/errors.hpp"
#include "psevis/rng.hpp"

namespace psevis {

template <class Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <class Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

// ---------------------------------------------------------------------------
// State kinds
// ---------------------------------------------------------------------------

/// The named vectors of one LSTM layer, in dependence order.
enum class CellVector { f, i, o, c_tilde, l, s, c, h };

inline constexpr std::array<CellVector, 8> kCellVectors = {
    CellVector::f, CellVector::i, CellVector::o, CellVector::c_tilde,
    CellVector::l, CellVector::s, CellVector::c, CellVector::h};

inline std::string_view cell_vector_name(CellVector v) {
  switch (v) {
    case CellVector::f: return "f";
    case CellVector::i: return "i";
    case CellVector::o: return "o";
    case CellVector::c_tilde: return "c_tilde";
    case CellVector::l: return "l";
    case CellVector::s: return "s";
    case CellVector::c: return "c";
    case CellVector::h: return "h";
  }
  return "?";
}

/// Either the word embedding (layer 0) or one cell vector of layer 1..U.
struct StateKind {
  bool embedding = true;
  CellVector vector = CellVector::h;
  int layer = 0;

  static StateKind word_embedding() { return {}; }
  static StateKind cell(CellVector v, int layer) { return {false, v, layer}; }

  /// "embedding" or e.g. "h_2".
  std::string name() const {
    if (embedding) return "embedding";
    return std::string(cell_vector_name(vector)) + "_" + std::to_string(layer);
  }

  /// "embedding" or the bare vector name ("h"), for tabular output.
  std::string_view type_name() const {
    return embedding ? std::string_view("embedding") : cell_vector_name(vector);
  }

  static std::optional<StateKind> parse(std::string_view name) {
    if (name == "embedding") return word_embedding();
    const auto sep = name.rfind('_');
    if (sep == std::string_view::npos || sep + 1 == name.size()) return std::nullopt;
    int layer = 0;
    for (char ch : name.substr(sep + 1)) {
      if (ch < '0' || ch > '9') return std::nullopt;
      layer = layer * 10 + (ch - '0');
    }
    if (layer < 1) return std::nullopt;
    const auto base = name.substr(0, sep);
    for (CellVector v : kCellVectors) {
      if (cell_vector_name(v) == base) return cell(v, layer);
    }
    return std::nullopt;
  }

  /// Display column: embedding leftmost, then each layer's vectors in
  /// dependence order (f, i, o, c_tilde) < (l, s) < c < h.
  std::size_t column() const {
    if (embedding) return 0;
    return 1 + static_cast<std::size_t>(layer - 1) * kCellVectors.size() +
           static_cast<std::size_t>(vector);
  }

  friend bool operator==(const StateKind& a, const StateKind& b) {
    return a.column() == b.column();
  }
  friend auto operator<=>(const StateKind& a, const StateKind& b) {
    return a.column() <=> b.column();
  }
};

/// All 1 + 8U kinds in column order.
inline std::vector<StateKind> all_state_kinds(int num_layers) {
  std::vector<StateKind> kinds{StateKind::word_embedding()};
  for (int u = 1; u <= num_layers; ++u) {
    for (CellVector v : kCellVectors) kinds.push_back(StateKind::cell(v, u));
  }
  return kinds;
}

// ---------------------------------------------------------------------------
// Parameters
// ---------------------------------------------------------------------------

template <class Scalar>
struct LayerParams {
  Matrix<Scalar> W_f, W_i, W_o, W_c;
  Vector<Scalar> b_f, b_i, b_o, b_c;
};

template <class Scalar>
struct LstmParams {
  Matrix<Scalar> embedding;  // V x N
  std::vector<LayerParams<Scalar>> layers;
  Matrix<Scalar> W_y;  // V x N
  Vector<Scalar> b_y;  // V

  Eigen::Index vocab_size() const { return embedding.rows(); }
  Eigen::Index hidden_size() const { return embedding.cols(); }
  int num_layers() const { return static_cast<int>(layers.size()); }

  static LstmParams zeros(Eigen::Index vocab, Eigen::Index hidden, int num_layers) {
    if (vocab <= 0 || hidden <= 0 || num_layers <= 0) {
      throw ConfigError("vocab size, hidden size and layer count must be positive");
    }
    LstmParams p;
    p.embedding = Matrix<Scalar>::Zero(vocab, hidden);
    p.layers.resize(static_cast<std::size_t>(num_layers));
    for (auto& layer : p.layers) {
      for (auto* W : {&layer.W_f, &layer.W_i, &layer.W_o, &layer.W_c}) {
        *W = Matrix<Scalar>::Zero(hidden, 2 * hidden);
      }
      for (auto* b : {&layer.b_f, &layer.b_i, &layer.b_o, &layer.b_c}) {
        *b = Vector<Scalar>::Zero(hidden);
      }
    }
    p.W_y = Matrix<Scalar>::Zero(vocab, hidden);
    p.b_y = Vector<Scalar>::Zero(vocab);
    return p;
  }

  /// Weights uniform in [-1/sqrt(N), 1/sqrt(N)], biases zero except b_f = 1.
  static LstmParams initialize(Eigen::Index vocab, Eigen::Index hidden, int num_layers,
                               std::uint64_t seed) {
    LstmParams p = zeros(vocab, hidden, num_layers);
    Rng rng(seed);
    const double scale = 1.0 / std::sqrt(static_cast<double>(hidden));
    auto fill = [&](Matrix<Scalar>& m) {
      for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
          m(r, c) = static_cast<Scalar>(rng.uniform(-scale, scale));
        }
      }
    };
    fill(p.embedding);
    for (auto& layer : p.layers) {
      fill(layer.W_f);
      fill(layer.W_i);
      fill(layer.W_o);
      fill(layer.W_c);
      layer.b_f.setOnes();
    }
    fill(p.W_y);
    return p;
  }

  /// Visits every tensor as (name, Eigen object). Biases are visited as
  /// column vectors.
  template <class F>
  void for_each_tensor(F&& fn) {
    visit(*this, fn);
  }
  template <class F>
  void for_each_tensor(F&& fn) const {
    visit(*this, fn);
  }

  /// Throws ShapeError naming the first tensor whose shape is inconsistent.
  void validate() const {
    const Eigen::Index V = vocab_size();
    const Eigen::Index N = hidden_size();
    if (V <= 0 || N <= 0 || layers.empty()) throw ShapeError("model has empty dimensions");
    for_each_tensor([&](const std::string& name, const auto& t) {
      const auto [rows, cols] = expected_shape(name, V, N);
      if (t.rows() != rows || t.cols() != cols) {
        throw ShapeError(name + " has shape " + std::to_string(t.rows()) + "x" +
                         std::to_string(t.cols()) + ", expected " + std::to_string(rows) + "x" +
                         std::to_string(cols));
      }
    });
  }

  bool all_finite() const {
    bool ok = true;
    for_each_tensor([&](const std::string&, const auto& t) { ok = ok && t.allFinite(); });
    return ok;
  }

  template <class To>
  LstmParams<To> cast() const {
    LstmParams<To> out;
    out.embedding = embedding.template cast<To>();
    out.layers.resize(layers.size());
    for (std::size_t u = 0; u < layers.size(); ++u) {
      const auto& s = layers[u];
      auto& d = out.layers[u];
      d.W_f = s.W_f.template cast<To>();
      d.W_i = s.W_i.template cast<To>();
      d.W_o = s.W_o.template cast<To>();
      d.W_c = s.W_c.template cast<To>();
      d.b_f = s.b_f.template cast<To>();
      d.b_i = s.b_i.template cast<To>();
      d.b_o = s.b_o.template cast<To>();
      d.b_c = s.b_c.template cast<To>();
    }
    out.W_y = W_y.template cast<To>();
    out.b_y = b_y.template cast<To>();
    return out;
  }

  static std::pair<Eigen::Index, Eigen::Index> expected_shape(const std::string& name,
                                                              Eigen::Index V, Eigen::Index N) {
    if (name == "embedding" || name == "classifier.W_y") return {V, N};
    if (name == "classifier.b_y") return {V, 1};
    if (name.find(".W_") != std::string::npos) return {N, 2 * N};
    return {N, 1};
  }

 private:
  template <class Self, class F>
  static void visit(Self& self, F& fn) {
    fn(std::string("embedding"), self.embedding);
    for (std::size_t u = 0; u < self.layers.size(); ++u) {
      auto& layer = self.layers[u];
      const std::string prefix = "layer" + std::to_string(u + 1) + ".";
      fn(prefix + "W_f", layer.W_f);
      fn(prefix + "W_i", layer.W_i);
      fn(prefix + "W_o", layer.W_o);
      fn(prefix + "W_c", layer.W_c);
      fn(prefix + "b_f", layer.b_f);
      fn(prefix + "b_i", layer.b_i);
      fn(prefix + "b_o", layer.b_o);
      fn(prefix + "b_c", layer.b_c);
    }
    fn(std::string("classifier.W_y"), self.W_y);
    fn(std::string("classifier.b_y"), self.b_y);
  }
};

// ---------------------------------------------------------------------------
// Forward pass
// ---------------------------------------------------------------------------

template <class Scalar>
struct LayerState {
  Vector<Scalar> f, i, o, c_tilde, l, s, c, h;

  const Vector<Scalar>& get(CellVector v) const {
    switch (v) {
      case CellVector::f: return f;
      case CellVector::i: return i;
      case CellVector::o: return o;
      case CellVector::c_tilde: return c_tilde;
      case CellVector::l: return l;
      case CellVector::s: return s;
      case CellVector::c: return c;
      case CellVector::h: return h;
    }
    return h;
  }
};

/// Every named vector for one timestep.
template <class Scalar>
struct StateRecord {
  std::size_t timestep = 0;
  Vector<Scalar> embedding;
  std::vector<LayerState<Scalar>> layers;

  const Vector<Scalar>& vector(const StateKind& kind) const {
    if (kind.embedding) return embedding;
    return layers.at(static_cast<std::size_t>(kind.layer - 1)).get(kind.vector);
  }
};

/// (h, c) per layer carried between timesteps.
template <class Scalar>
struct RecurrentState {
  std::vector<Vector<Scalar>> h;
  std::vector<Vector<Scalar>> c;

  static RecurrentState zeros(int num_layers, Eigen::Index hidden) {
    RecurrentState s;
    s.h.assign(static_cast<std::size_t>(num_layers), Vector<Scalar>::Zero(hidden));
    s.c.assign(static_cast<std::size_t>(num_layers), Vector<Scalar>::Zero(hidden));
    return s;
  }
};

namespace detail {

template <class Derived>
auto sigmoid(const Eigen::MatrixBase<Derived>& x) {
  using S = typename Derived::Scalar;
  return x.unaryExpr([](S v) { return S(1) / (S(1) + std::exp(-v)); });
}

template <class Derived>
auto tanh(const Eigen::MatrixBase<Derived>& x) {
  using S = typename Derived::Scalar;
  return x.unaryExpr([](S v) { return std::tanh(v); });
}

}  // namespace detail

/// Numerically stable softmax.
template <class Scalar>
Vector<Scalar> softmax(const Vector<Scalar>& logits) {
  const Scalar peak = logits.maxCoeff();
  Vector<Scalar> e = (logits.array() - peak).exp().matrix();
  return e / e.sum();
}

/// One timestep through all layers. `prev` is updated to the new (h, c).
template <class Scalar>
StateRecord<Scalar> lstm_step(const Vector<Scalar>& input, RecurrentState<Scalar>& prev,
                              const LstmParams<Scalar>& params) {
  const Eigen::Index N = params.hidden_size();
  const auto U = static_cast<std::size_t>(params.num_layers());
  if (input.size() != N) {
    throw ShapeError("input has length " + std::to_string(input.size()) + ", expected " +
                     std::to_string(N));
  }
  if (prev.h.size() != U || prev.c.size() != U) {
    throw ShapeError("recurrent state has " + std::to_string(prev.h.size()) +
                     " layers, expected " + std::to_string(U));
  }

  StateRecord<Scalar> rec;
  rec.embedding = input;
  rec.layers.resize(U);
  Vector<Scalar> x(2 * N);
  for (std::size_t u = 0; u < U; ++u) {
    if (prev.h[u].size() != N || prev.c[u].size() != N) {
      throw ShapeError("recurrent state of layer " + std::to_string(u + 1) + " has wrong length");
    }
    const auto& p = params.layers[u];
    auto& st = rec.layers[u];
    x.head(N) = u == 0 ? input : rec.layers[u - 1].h;
    x.tail(N) = prev.h[u];
    st.f = detail::sigmoid(p.W_f * x + p.b_f);
    st.i = detail::sigmoid(p.W_i * x + p.b_i);
    st.o = detail::sigmoid(p.W_o * x + p.b_o);
    st.c_tilde = detail::tanh(p.W_c * x + p.b_c);
    st.l = st.f.cwiseProduct(prev.c[u]);
    st.s = st.i.cwiseProduct(st.c_tilde);
    st.c = st.l + st.s;
    st.h = st.o.cwiseProduct(detail::tanh(st.c));
    prev.h[u] = st.h;
    prev.c[u] = st.c;
  }
  return rec;
}

/// The output distribution softmax(W_y h + b_y).
template <class Scalar>
Vector<Scalar> classify(const Vector<Scalar>& h_final, const LstmParams<Scalar>& params) {
  if (h_final.size() != params.hidden_size()) {
    throw ShapeError("classifier input has length " + std::to_string(h_final.size()) +
                     ", expected " + std::to_string(params.hidden_size()));
  }
  return softmax<Scalar>(params.W_y * h_final + params.b_y);
}

template <class Scalar>
struct ForwardResult {
  std::vector<StateRecord<Scalar>> records;
  /// Column t is the next-token distribution after input t.
  Matrix<Scalar> distributions;
  RecurrentState<Scalar> final_state;
};

/// Runs `inputs` from `initial` and records every state.
template <class Scalar>
ForwardResult<Scalar> forward_sequence(std::span<const TokenId> inputs,
                                       const LstmParams<Scalar>& params,
                                       RecurrentState<Scalar> initial) {
  if (inputs.empty()) throw IngestionError("cannot run the model on an empty sequence");
  const Eigen::Index V = params.vocab_size();
  ForwardResult<Scalar> out;
  out.records.reserve(inputs.size());
  Matrix<Scalar> top(params.hidden_size(), static_cast<Eigen::Index>(inputs.size()));
  for (std::size_t t = 0; t < inputs.size(); ++t) {
    const TokenId id = inputs[t];
    if (id < 0 || id >= V) {
      throw ShapeError("token id " + std::to_string(id) + " outside vocabulary of size " +
                       std::to_string(V));
    }
    Vector<Scalar> emb = params.embedding.row(id).transpose();
    out.records.push_back(lstm_step(emb, initial, params));
    out.records.back().timestep = t;
    top.col(static_cast<Eigen::Index>(t)) = out.records.back().layers.back().h;
  }
  Matrix<Scalar> logits = params.W_y * top;
  logits.colwise() += params.b_y;
  for (Eigen::Index t = 0; t < logits.cols(); ++t) {
    const Scalar peak = logits.col(t).maxCoeff();
    logits.col(t) = (logits.col(t).array() - peak).exp().matrix();
    logits.col(t) /= logits.col(t).sum();
  }
  out.distributions = std::move(logits);
  out.final_state = std::move(initial);
  return out;
}

/// Runs `inputs` from the zero state.
template <class Scalar>
ForwardResult<Scalar> forward_sequence(std::span<const TokenId> inputs,
                                       const LstmParams<Scalar>& params) {
  return forward_sequence(inputs, params,
                          RecurrentState<Scalar>::zeros(params.num_layers(), params.hidden_size()));
}

template <class Scalar>
ForwardResult<Scalar> forward_sequence(const TokenSequence& seq, const LstmParams<Scalar>& params) {
  return forward_sequence(seq.inputs(), params);
}

}  // namespace psevis
