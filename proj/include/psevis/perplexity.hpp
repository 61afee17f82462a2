#pragma once

#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include "psevis/corpus.hpp"
#include "psevis/lstm.hpp"

namespace psevis {

struct PerplexityResult {
  double perplexity = 0;
  /// Probabilities that were zero and got raised to the floor.
  std::size_t floored = 0;
};

/// exp(mean(-ln p_t)), computed in log space. Zero probabilities are raised to
/// `floor` and counted.
inline PerplexityResult eval_perplexity(std::span<const double> probabilities,
                                        double floor = 1e-300) {
  if (probabilities.empty()) throw std::invalid_argument("perplexity needs at least one probability");
  PerplexityResult out;
  double nll = 0;
  for (double p : probabilities) {
    if (!(p >= 0.0) || p > 1.0 + 1e-12) {
      throw std::invalid_argument("probability outside [0, 1]: " + std::to_string(p));
    }
    if (p < floor) {
      p = floor;
      ++out.floored;
    }
    nll -= std::log(p);
  }
  out.perplexity = std::exp(nll / static_cast<double>(probabilities.size()));
  return out;
}

/// Probability the model assigned to each true next token, over all sentences.
template <class Scalar>
std::vector<double> target_probabilities(const std::vector<TokenSequence>& corpus,
                                         const LstmParams<Scalar>& params) {
  std::vector<double> probs;
  for (const auto& seq : corpus) {
    const auto fwd = forward_sequence(seq, params);
    const auto targets = seq.targets();
    for (std::size_t t = 0; t < targets.size(); ++t) {
      probs.push_back(static_cast<double>(fwd.distributions(targets[t], static_cast<Eigen::Index>(t))));
    }
  }
  return probs;
}

template <class Scalar>
PerplexityResult model_perplexity(const std::vector<TokenSequence>& corpus,
                                  const LstmParams<Scalar>& params) {
  return eval_perplexity(target_probabilities(corpus, params));
}

}  // namespace psevis
