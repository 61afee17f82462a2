#pragma once

// Visual encoding of a distribution: top-k bars colored by tag, and a swatch
// interpolated between white and the dominant color of the top-k mass.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "psevis/color.hpp"
#include "psevis/corpus.hpp"
#include "psevis/errors.hpp"
#include "psevis/lstm.hpp"

namespace psevis {

struct RankedLabel {
  TokenId id = 0;
  double probability = 0;
};

struct Bar {
  TokenId id = 0;
  std::string token;
  std::string tag;
  double probability = 0;
  Rgb color;
};

/// The k most probable labels, descending, ties by ascending id.
inline std::vector<RankedLabel> top_k(std::span<const double> dist, std::size_t k) {
  if (k == 0) throw ConfigError("top-k needs k >= 1");
  k = std::min(k, dist.size());
  std::vector<TokenId> ids(dist.size());
  std::iota(ids.begin(), ids.end(), TokenId{0});
  auto before = [&](TokenId a, TokenId b) {
    const double pa = dist[static_cast<std::size_t>(a)];
    const double pb = dist[static_cast<std::size_t>(b)];
    return pa != pb ? pa > pb : a < b;
  };
  std::partial_sort(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(k), ids.end(), before);
  std::vector<RankedLabel> out;
  out.reserve(k);
  for (std::size_t j = 0; j < k; ++j) out.push_back({ids[j], dist[static_cast<std::size_t>(ids[j])]});
  return out;
}

inline std::vector<Bar> make_bars(std::span<const RankedLabel> ranked, const Vocabulary& vocab,
                                  const TagMap& tags) {
  std::vector<Bar> bars;
  bars.reserve(ranked.size());
  for (const auto& r : ranked) {
    const std::string& token = vocab.token(r.id);
    const auto [tag, color] = tags.tag_of(token);
    bars.push_back({r.id, token, std::string(tag), r.probability, color});
  }
  return bars;
}

struct Dominance {
  Rgb color;
  double dominance = 1.0;
};

/// Groups bar mass by color; the heaviest group wins, ties going to the color
/// listed first in the colormap. dominance = group mass / total bar mass.
inline Dominance dominant_color(std::span<const Bar> bars, const TagMap& tags) {
  if (bars.empty()) throw ConfigError("dominant color needs at least one bar");
  std::vector<std::pair<Rgb, double>> groups;
  double total = 0;
  for (const auto& bar : bars) {
    total += bar.probability;
    auto it = std::find_if(groups.begin(), groups.end(),
                           [&](const auto& g) { return g.first == bar.color; });
    if (it == groups.end()) {
      groups.emplace_back(bar.color, bar.probability);
    } else {
      it->second += bar.probability;
    }
  }
  const auto* best = &groups.front();
  for (const auto& g : groups) {
    if (g.second > best->second ||
        (g.second == best->second && tags.color_rank(g.first) < tags.color_rank(best->first))) {
      best = &g;
    }
  }
  if (!(total > 0)) return {best->first, 1.0 / static_cast<double>(groups.size())};
  return {best->first, best->second / total};
}

/// Saturation t = clamp((dominance - 1/m) / (1 - 1/m), 0, 1), or t = dominance
/// when m == 1; swatch = white + t * (color - white) per sRGB channel.
inline double swatch_saturation(double dominance, std::size_t num_colors) {
  if (num_colors <= 1) return std::clamp(dominance, 0.0, 1.0);
  const double floor = 1.0 / static_cast<double>(num_colors);
  return std::clamp((dominance - floor) / (1.0 - floor), 0.0, 1.0);
}

inline Rgb interpolate_swatch(const Rgb& color, double dominance, std::size_t num_colors) {
  const double t = swatch_saturation(dominance, num_colors);
  return Rgb{kWhite.r + t * (color.r - kWhite.r), kWhite.g + t * (color.g - kWhite.g),
             kWhite.b + t * (color.b - kWhite.b)};
}

struct EncodingConfig {
  /// Bars kept for display.
  std::size_t bar_count = 3;
  /// Labels whose mass decides the dominant color.
  std::size_t dominance_k = 1;

  /// Display k of 3 and dominance k of 10% of the vocabulary.
  static EncodingConfig for_vocabulary(std::size_t vocab_size, std::size_t bar_count = 3,
                                       double dominance_fraction = 0.1) {
    const auto k = static_cast<std::size_t>(std::lround(dominance_fraction * static_cast<double>(vocab_size)));
    return {bar_count, std::max<std::size_t>(1, k)};
  }
  static EncodingConfig single(std::size_t k) { return {k, k}; }
};

struct PseEncoding {
  /// Absent for the model's own output distribution.
  std::optional<StateKind> kind;
  std::size_t timestep = 0;
  std::vector<Bar> bars;
  Rgb dominant_color;
  std::string dominant_tag;
  double dominance = 1.0;
  Rgb swatch;

  std::string label() const { return kind ? kind->name() : std::string("y"); }
};

inline PseEncoding encode_pse(std::span<const double> dist, std::optional<StateKind> kind,
                              std::size_t timestep, const Vocabulary& vocab, const TagMap& tags,
                              const EncodingConfig& config) {
  if (dist.size() != vocab.size()) {
    throw ShapeError("distribution has " + std::to_string(dist.size()) + " labels, vocabulary has " +
                     std::to_string(vocab.size()));
  }
  if (config.bar_count == 0 || config.dominance_k == 0) throw ConfigError("k must be positive");
  const auto ranked = top_k(dist, std::max(config.bar_count, config.dominance_k));
  const auto all_bars = make_bars(ranked, vocab, tags);
  const std::span<const Bar> dominance_bars(all_bars.data(), std::min(config.dominance_k, all_bars.size()));
  const Dominance dom = dominant_color(dominance_bars, tags);

  PseEncoding enc;
  enc.kind = kind;
  enc.timestep = timestep;
  enc.bars.assign(all_bars.begin(),
                  all_bars.begin() + static_cast<std::ptrdiff_t>(std::min(config.bar_count, all_bars.size())));
  enc.dominant_color = dom.color;
  enc.dominant_tag = std::string(tags.tag_for_color(dom.color));
  enc.dominance = dom.dominance;
  enc.swatch = interpolate_swatch(dom.color, dom.dominance, tags.distinct_colors().size());
  return enc;
}

inline PseEncoding encode_pse(const Vector<double>& dist, std::optional<StateKind> kind,
                              std::size_t timestep, const Vocabulary& vocab, const TagMap& tags,
                              const EncodingConfig& config) {
  return encode_pse(std::span<const double>(dist.data(), static_cast<std::size_t>(dist.size())), kind,
                    timestep, vocab, tags, config);
}

}  // namespace psevis
