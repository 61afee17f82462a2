#pragma once

// Truncated backpropagation through time and plain SGD with gradient-norm
// clipping and step-decay learning rate.

#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <span>
#include <vector>

#include "psevis/corpus.hpp"
#include "psevis/errors.hpp"
#include "psevis/lstm.hpp"
#include "psevis/rng.hpp"

namespace psevis {

/// Sum of -ln p(target) over a window, with gradients accumulated into
/// `grads` (which must have the model's shapes). `state` is advanced to the
/// end of the window; no gradient flows into the incoming state.
template <class Scalar>
Scalar accumulate_window_gradient(std::span<const TokenId> inputs, std::span<const TokenId> targets,
                                  const LstmParams<Scalar>& params, RecurrentState<Scalar>& state,
                                  LstmParams<Scalar>& grads, Scalar loss_scale = Scalar(1)) {
  if (inputs.size() != targets.size()) {
    throw ShapeError("inputs and targets differ in length");
  }
  const Eigen::Index N = params.hidden_size();
  const Eigen::Index V = params.vocab_size();
  const auto U = static_cast<std::size_t>(params.num_layers());
  const std::size_t T = inputs.size();

  const RecurrentState<Scalar> initial = state;
  auto fwd = forward_sequence(inputs, params, state);
  state = fwd.final_state;

  Scalar loss = 0;
  // dlogits = p - onehot(target), scaled.
  Matrix<Scalar> dlogits = fwd.distributions;
  for (std::size_t t = 0; t < T; ++t) {
    const TokenId y = targets[t];
    if (y < 0 || y >= V) throw ShapeError("target id outside vocabulary");
    const auto col = static_cast<Eigen::Index>(t);
    loss -= std::log(fwd.distributions(y, col));
    dlogits(y, col) -= Scalar(1);
  }
  dlogits *= loss_scale;

  Matrix<Scalar> tops(N, static_cast<Eigen::Index>(T));
  for (std::size_t t = 0; t < T; ++t) tops.col(static_cast<Eigen::Index>(t)) = fwd.records[t].layers.back().h;
  grads.W_y.noalias() += dlogits * tops.transpose();
  grads.b_y += dlogits.rowwise().sum();
  const Matrix<Scalar> dtops = params.W_y.transpose() * dlogits;

  std::vector<Vector<Scalar>> dh_next(U, Vector<Scalar>::Zero(N));
  std::vector<Vector<Scalar>> dc_next(U, Vector<Scalar>::Zero(N));
  Vector<Scalar> x(2 * N), dz(N), dx(2 * N);

  for (std::size_t t = T; t-- > 0;) {
    const auto& rec = fwd.records[t];
    Vector<Scalar> dh_below;  // gradient w.r.t. this layer's input, passed down
    for (std::size_t u = U; u-- > 0;) {
      const auto& p = params.layers[u];
      auto& g = grads.layers[u];
      const auto& st = rec.layers[u];
      const Vector<Scalar>& c_prev = t > 0 ? fwd.records[t - 1].layers[u].c : initial.c[u];
      const Vector<Scalar>& h_prev = t > 0 ? fwd.records[t - 1].layers[u].h : initial.h[u];
      x.head(N) = u == 0 ? rec.embedding : rec.layers[u - 1].h;
      x.tail(N) = h_prev;

      Vector<Scalar> dh = dh_next[u];
      if (u + 1 == U) {
        dh += dtops.col(static_cast<Eigen::Index>(t));
      } else {
        dh += dh_below;
      }
      const Vector<Scalar> tanh_c = detail::tanh(st.c);
      const Vector<Scalar> dc =
          dh.cwiseProduct(st.o).cwiseProduct((Scalar(1) - tanh_c.array().square()).matrix()) +
          dc_next[u];

      dx.setZero();
      auto apply = [&](const Vector<Scalar>& dpre, const Matrix<Scalar>& W, Matrix<Scalar>& dW,
                       Vector<Scalar>& db) {
        dW.noalias() += dpre * x.transpose();
        db += dpre;
        dx.noalias() += W.transpose() * dpre;
      };
      // o: h = o * tanh(c)
      dz = dh.cwiseProduct(tanh_c).cwiseProduct(st.o.cwiseProduct((Scalar(1) - st.o.array()).matrix()));
      apply(dz, p.W_o, g.W_o, g.b_o);
      // f: l = f * c_prev
      dz = dc.cwiseProduct(c_prev).cwiseProduct(st.f.cwiseProduct((Scalar(1) - st.f.array()).matrix()));
      apply(dz, p.W_f, g.W_f, g.b_f);
      // i: s = i * c_tilde
      dz = dc.cwiseProduct(st.c_tilde).cwiseProduct(st.i.cwiseProduct((Scalar(1) - st.i.array()).matrix()));
      apply(dz, p.W_i, g.W_i, g.b_i);
      // c_tilde
      dz = dc.cwiseProduct(st.i).cwiseProduct((Scalar(1) - st.c_tilde.array().square()).matrix());
      apply(dz, p.W_c, g.W_c, g.b_c);

      dc_next[u] = dc.cwiseProduct(st.f);
      dh_next[u] = dx.tail(N);
      dh_below = dx.head(N);
    }
    grads.embedding.row(inputs[t]) += dh_below.transpose();
  }
  return loss * loss_scale;
}

/// Total (unscaled) loss of one sequence from the zero state, no gradients.
template <class Scalar>
Scalar sequence_loss(std::span<const TokenId> inputs, std::span<const TokenId> targets,
                     const LstmParams<Scalar>& params) {
  const auto fwd = forward_sequence(inputs, params);
  Scalar loss = 0;
  for (std::size_t t = 0; t < targets.size(); ++t) {
    loss -= std::log(fwd.distributions(targets[t], static_cast<Eigen::Index>(t)));
  }
  return loss;
}

struct LstmTrainConfig {
  int hidden_size = 64;
  int num_layers = 2;
  int epochs = 10;
  double learning_rate = 1.0;
  /// Learning rate is multiplied by `lr_decay` after each epoch from
  /// `decay_start` (1-based) on.
  double lr_decay = 0.5;
  int decay_start = 6;
  double clip = 5.0;
  int bptt = 20;
  std::uint64_t seed = 1234;

  void validate() const {
    if (hidden_size <= 0 || num_layers <= 0 || epochs <= 0 || bptt <= 0 || decay_start <= 0) {
      throw ConfigError("model hyperparameters must be positive");
    }
    if (!(learning_rate > 0) || !(clip > 0) || !(lr_decay > 0)) {
      throw ConfigError("learning rate, clip and decay must be positive");
    }
  }
};

struct EpochReport {
  int epoch = 0;
  double learning_rate = 0;
  double mean_loss = 0;  // per token
};

template <class Scalar>
struct LstmTrainResult {
  LstmParams<Scalar> params;
  std::vector<EpochReport> epochs;
};

template <class Scalar>
Scalar squared_norm(const LstmParams<Scalar>& p) {
  Scalar total = 0;
  p.for_each_tensor([&](const std::string&, const auto& t) { total += t.squaredNorm(); });
  return total;
}

/// SGD over sentences in seeded random order. Each sentence starts from the
/// zero state and is cut into windows of `bptt` steps, carrying state across
/// windows; every window is one update on its mean token loss.
template <class Scalar>
LstmTrainResult<Scalar> train_lstm(const std::vector<TokenSequence>& corpus, std::size_t vocab_size,
                                   const LstmTrainConfig& config,
                                   const std::function<void(const EpochReport&)>& on_epoch = {}) {
  config.validate();
  if (corpus.empty()) throw IngestionError("training corpus is empty");
  LstmTrainResult<Scalar> result;
  auto& params = result.params;
  params = LstmParams<Scalar>::initialize(static_cast<Eigen::Index>(vocab_size), config.hidden_size,
                                          config.num_layers, config.seed);
  LstmParams<Scalar> grads =
      LstmParams<Scalar>::zeros(params.vocab_size(), params.hidden_size(), params.num_layers());

  Rng rng(config.seed ^ 0x9E3779B97F4A7C15ULL);
  std::vector<std::size_t> order(corpus.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  double lr = config.learning_rate;
  std::size_t step = 0;
  const auto window = static_cast<std::size_t>(config.bptt);

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    if (epoch >= config.decay_start && epoch > 1) lr *= config.lr_decay;
    rng.shuffle(order.begin(), order.end());
    double epoch_loss = 0;
    std::size_t epoch_tokens = 0;
    for (const std::size_t idx : order) {
      const auto& seq = corpus[idx];
      const auto inputs = seq.inputs();
      const auto targets = seq.targets();
      auto state = RecurrentState<Scalar>::zeros(params.num_layers(), params.hidden_size());
      for (std::size_t start = 0; start < inputs.size(); start += window) {
        const std::size_t len = std::min(window, inputs.size() - start);
        grads.for_each_tensor([](const std::string&, auto& t) { t.setZero(); });
        const Scalar loss = accumulate_window_gradient<Scalar>(
            inputs.subspan(start, len), targets.subspan(start, len), params, state, grads,
            Scalar(1) / static_cast<Scalar>(len));
        ++step;
        if (!std::isfinite(static_cast<double>(loss))) {
          throw TrainingError("training loss is not finite", step);
        }
        epoch_loss += static_cast<double>(loss) * static_cast<double>(len);
        epoch_tokens += len;

        const Scalar norm = std::sqrt(squared_norm(grads));
        const Scalar scale = norm > Scalar(config.clip) ? Scalar(config.clip) / norm : Scalar(1);
        const Scalar rate = static_cast<Scalar>(lr) * scale;
        params.embedding -= rate * grads.embedding;
        for (std::size_t u = 0; u < params.layers.size(); ++u) {
          auto& p = params.layers[u];
          const auto& g = grads.layers[u];
          p.W_f -= rate * g.W_f;
          p.W_i -= rate * g.W_i;
          p.W_o -= rate * g.W_o;
          p.W_c -= rate * g.W_c;
          p.b_f -= rate * g.b_f;
          p.b_i -= rate * g.b_i;
          p.b_o -= rate * g.b_o;
          p.b_c -= rate * g.b_c;
        }
        params.W_y -= rate * grads.W_y;
        params.b_y -= rate * grads.b_y;
      }
    }
    if (!params.all_finite()) throw TrainingError("parameters became non-finite", step);
    EpochReport report{epoch, lr, epoch_loss / static_cast<double>(epoch_tokens)};
    result.epochs.push_back(report);
    if (on_epoch) on_epoch(report);
  }
  return result;
}

}  // namespace psevis
