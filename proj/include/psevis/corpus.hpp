#pragma once

// Text ingestion: vocabulary with UNK/NUM/EOS folding, sentence encoding, and
// the token -> tag -> color lookup used by the visual encoding.

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "psevis/color.hpp"
#include "psevis/errors.hpp"

namespace psevis {

using TokenId = std::int32_t;

inline constexpr std::string_view kUnkToken = "<unk>";
inline constexpr std::string_view kNumToken = "<num>";
inline constexpr std::string_view kEosToken = "<eos>";

namespace detail {

inline std::string to_lower(std::string_view text) {
  std::string out(text);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
  return out;
}

inline std::vector<std::string> split_whitespace(std::string_view line) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (pos < line.size()) {
    while (pos < line.size() && std::isspace(static_cast<unsigned char>(line[pos]))) ++pos;
    const std::size_t start = pos;
    while (pos < line.size() && !std::isspace(static_cast<unsigned char>(line[pos]))) ++pos;
    if (pos > start) out.emplace_back(line.substr(start, pos - start));
  }
  return out;
}

}  // namespace detail

/// Optional sign, then digit groups separated by at most one '.' or ',' each
/// ("1987", "12.5", "3,000", "-4").
inline bool is_numeral(std::string_view token) {
  std::size_t pos = 0;
  if (pos < token.size() && (token[pos] == '+' || token[pos] == '-')) ++pos;
  if (pos == token.size()) return false;
  bool expect_digit = true;
  for (; pos < token.size(); ++pos) {
    const char ch = token[pos];
    if (std::isdigit(static_cast<unsigned char>(ch))) {
      expect_digit = false;
    } else if ((ch == '.' || ch == ',') && !expect_digit) {
      expect_digit = true;
    } else {
      return false;
    }
  }
  return !expect_digit;
}

/// Token <-> id mapping. Ids 0, 1, 2 are UNK, NUM, EOS; the remaining tokens
/// follow in descending count order with lexicographic tie-breaks.
class Vocabulary {
 public:
  static constexpr TokenId kUnk = 0;
  static constexpr TokenId kNum = 1;
  static constexpr TokenId kEos = 2;

  /// Builds from one-sentence-per-line text. Tokens seen fewer than
  /// `min_count` times fold into UNK; `max_size` (0 = unlimited) caps the total
  /// size including the three specials.
  static Vocabulary build(std::span<const std::string> sentences, std::size_t min_count,
                          std::size_t max_size = 0) {
    if (min_count == 0) throw ConfigError("min_count must be positive");
    if (max_size != 0 && max_size < 3) throw ConfigError("max_size must leave room for specials");

    std::unordered_map<std::string, std::uint64_t> raw;
    std::uint64_t specials[3] = {0, 0, 0};
    std::uint64_t total = 0;
    std::size_t lines = 0;
    for (const auto& sentence : sentences) {
      const auto words = detail::split_whitespace(sentence);
      if (words.empty()) continue;
      ++lines;
      for (const auto& word : words) {
        ++total;
        const std::string token = detail::to_lower(word);
        if (const auto special = special_id(token)) {
          ++specials[*special];
        } else if (is_numeral(token)) {
          ++specials[kNum];
        } else {
          ++raw[token];
        }
      }
    }
    if (total == 0) throw IngestionError("corpus is empty after tokenization");

    std::vector<std::pair<std::string, std::uint64_t>> ranked(raw.begin(), raw.end());
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
      return a.second != b.second ? a.second > b.second : a.first < b.first;
    });

    std::vector<std::string> tokens{std::string(kUnkToken), std::string(kNumToken),
                                    std::string(kEosToken)};
    std::vector<std::uint64_t> counts{specials[kUnk], specials[kNum], specials[kEos] + lines};
    for (const auto& [token, count] : ranked) {
      const bool fits = max_size == 0 || tokens.size() < max_size;
      if (count >= min_count && fits) {
        tokens.push_back(token);
        counts.push_back(count);
      } else {
        counts[kUnk] += count;
      }
    }
    return Vocabulary(std::move(tokens), std::move(counts));
  }

  /// Rebuilds a vocabulary from a stored listing (ids are positions).
  static Vocabulary from_listing(std::vector<std::string> tokens,
                                 std::vector<std::uint64_t> counts) {
    if (tokens.size() != counts.size()) {
      throw FormatError("vocabulary listing has mismatched token and count lengths");
    }
    if (tokens.size() < 3 || tokens[kUnk] != kUnkToken || tokens[kNum] != kNumToken ||
        tokens[kEos] != kEosToken) {
      throw FormatError("vocabulary listing must start with <unk>, <num>, <eos>");
    }
    return Vocabulary(std::move(tokens), std::move(counts));
  }

  std::size_t size() const noexcept { return tokens_.size(); }
  TokenId unk_id() const noexcept { return kUnk; }
  TokenId num_id() const noexcept { return kNum; }
  TokenId eos_id() const noexcept { return kEos; }

  const std::string& token(TokenId id) const { return tokens_.at(static_cast<std::size_t>(id)); }
  std::uint64_t count(TokenId id) const { return counts_.at(static_cast<std::size_t>(id)); }
  const std::vector<std::string>& tokens() const noexcept { return tokens_; }
  const std::vector<std::uint64_t>& counts() const noexcept { return counts_; }

  /// Exact lookup of an already-normalized token.
  std::optional<TokenId> find(std::string_view token) const {
    const auto it = index_.find(std::string(token));
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  /// Maps a raw word to its id: lowercase, numerals to NUM, OOV to UNK.
  TokenId id_of(std::string_view word) const {
    const std::string token = detail::to_lower(word);
    if (const auto id = find(token)) return *id;
    if (is_numeral(token)) return kNum;
    return kUnk;
  }

 private:
  Vocabulary(std::vector<std::string> tokens, std::vector<std::uint64_t> counts)
      : tokens_(std::move(tokens)), counts_(std::move(counts)) {
    for (std::size_t i = 0; i < tokens_.size(); ++i) {
      const auto [it, inserted] = index_.emplace(tokens_[i], static_cast<TokenId>(i));
      if (!inserted) throw FormatError("duplicate vocabulary token '" + tokens_[i] + "'");
    }
  }

  static std::optional<TokenId> special_id(std::string_view token) {
    if (token == kUnkToken) return kUnk;
    if (token == kNumToken) return kNum;
    if (token == kEosToken) return kEos;
    return std::nullopt;
  }

  std::vector<std::string> tokens_;
  std::vector<std::uint64_t> counts_;
  std::unordered_map<std::string, TokenId> index_;
};

/// One encoded sentence. `ids` ends with EOS; `source_tokens` keeps the
/// original spelling and has the same length.
struct TokenSequence {
  std::vector<TokenId> ids;
  std::vector<std::string> source_tokens;

  /// Tokens fed to the network: everything except the trailing EOS.
  std::span<const TokenId> inputs() const {
    return std::span<const TokenId>(ids).first(ids.empty() ? 0 : ids.size() - 1);
  }
  /// Next-token targets aligned with inputs().
  std::span<const TokenId> targets() const {
    return ids.empty() ? std::span<const TokenId>() : std::span<const TokenId>(ids).subspan(1);
  }
  std::size_t length() const noexcept { return ids.empty() ? 0 : ids.size() - 1; }
};

inline TokenSequence encode_sentence(std::string_view sentence, const Vocabulary& vocab) {
  auto words = detail::split_whitespace(sentence);
  if (words.empty()) throw IngestionError("cannot encode an empty sentence");
  TokenSequence seq;
  seq.ids.reserve(words.size() + 1);
  for (const auto& word : words) seq.ids.push_back(vocab.id_of(word));
  seq.ids.push_back(vocab.eos_id());
  seq.source_tokens = std::move(words);
  seq.source_tokens.emplace_back(kEosToken);
  return seq;
}

/// Vocabulary spelling of the sequence, without the trailing EOS.
inline std::string decode(const TokenSequence& seq, const Vocabulary& vocab) {
  std::string out;
  for (const TokenId id : seq.inputs()) {
    if (!out.empty()) out += ' ';
    out += vocab.token(id);
  }
  return out;
}

inline std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IngestionError("cannot open '" + path.string() + "'");
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (detail::split_whitespace(line).empty()) continue;
    lines.push_back(std::move(line));
  }
  return lines;
}

inline std::vector<TokenSequence> encode_corpus(std::span<const std::string> sentences,
                                                const Vocabulary& vocab) {
  std::vector<TokenSequence> out;
  out.reserve(sentences.size());
  for (const auto& s : sentences) out.push_back(encode_sentence(s, vocab));
  return out;
}

/// Token -> tag lexicon plus tag -> color map. The colormap keeps file order,
/// which decides ties between equally dominant colors.
class TagMap {
 public:
  static constexpr std::string_view kDefaultTag = "default";

  struct TagColor {
    std::string tag;
    Rgb color;
  };

  /// `tag_colors` must contain kDefaultTag; every lexicon tag must be colored.
  TagMap(std::map<std::string, std::string> token_tags, std::vector<TagColor> tag_colors)
      : token_tags_(), tag_colors_(std::move(tag_colors)) {
    for (auto& [token, tag] : token_tags) token_tags_.emplace(detail::to_lower(token), tag);
    for (std::size_t i = 0; i < tag_colors_.size(); ++i) {
      if (!color_index_.emplace(tag_colors_[i].tag, i).second) {
        throw FormatError("colormap lists tag '" + tag_colors_[i].tag + "' twice");
      }
      const Rgb& c = tag_colors_[i].color;
      if (std::find(distinct_.begin(), distinct_.end(), c) == distinct_.end()) {
        distinct_.push_back(c);
      }
    }
    if (!color_index_.contains(std::string(kDefaultTag))) {
      throw FormatError("colormap has no 'default' entry");
    }
    for (const auto& [token, tag] : token_tags_) {
      if (!color_index_.contains(tag)) {
        throw FormatError("tag '" + tag + "' (token '" + token + "') has no color in the colormap");
      }
    }
  }

  /// Lexicon: lines of `token<TAB>tag`. Colormap: JSON object `tag -> "#RRGGBB"`.
  static TagMap load(const std::filesystem::path& lexicon_path,
                     const std::filesystem::path& colormap_path) {
    std::map<std::string, std::string> token_tags;
    std::ifstream lex(lexicon_path);
    if (!lex) throw IngestionError("cannot open lexicon '" + lexicon_path.string() + "'");
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(lex, line)) {
      ++line_no;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;
      const auto tab = line.find('\t');
      if (tab == std::string::npos || tab == 0 || tab + 1 == line.size()) {
        throw IngestionError(lexicon_path.string() + ":" + std::to_string(line_no) +
                             ": expected token<TAB>tag");
      }
      token_tags[line.substr(0, tab)] = line.substr(tab + 1);
    }
    return TagMap(std::move(token_tags), load_colormap(colormap_path));
  }

  static std::vector<TagColor> load_colormap(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IngestionError("cannot open colormap '" + path.string() + "'");
    nlohmann::ordered_json doc;
    try {
      doc = nlohmann::ordered_json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      throw FormatError("colormap '" + path.string() + "': " + e.what());
    }
    if (!doc.is_object()) throw FormatError("colormap must be a JSON object");
    std::vector<TagColor> out;
    for (const auto& [tag, value] : doc.items()) {
      if (!value.is_string()) throw FormatError("colormap entry '" + tag + "' is not a string");
      out.push_back({tag, parse_hex_color(value.get<std::string>())});
    }
    return out;
  }

  /// Total lookup: unknown tokens resolve to the default tag.
  std::pair<std::string_view, Rgb> tag_of(std::string_view token) const {
    const auto it = token_tags_.find(detail::to_lower(token));
    const std::string& tag = it == token_tags_.end() ? default_tag() : it->second;
    return {tag, tag_colors_[color_index_.at(tag)].color};
  }

  const std::string& default_tag() const {
    return tag_colors_[color_index_.at(std::string(kDefaultTag))].tag;
  }

  const std::vector<TagColor>& tag_colors() const noexcept { return tag_colors_; }
  const std::map<std::string, std::string>& token_tags() const noexcept { return token_tags_; }

  /// Distinct colors in colormap order of first appearance.
  const std::vector<Rgb>& distinct_colors() const noexcept { return distinct_; }

  /// Position of `color` in distinct_colors(); unmapped colors sort last.
  std::size_t color_rank(const Rgb& color) const {
    const auto it = std::find(distinct_.begin(), distinct_.end(), color);
    return static_cast<std::size_t>(it - distinct_.begin());
  }

  /// First tag in the colormap that uses `color`.
  std::string_view tag_for_color(const Rgb& color) const {
    for (const auto& tc : tag_colors_) {
      if (tc.color == color) return tc.tag;
    }
    return default_tag();
  }

 private:
  std::map<std::string, std::string> token_tags_;
  std::vector<TagColor> tag_colors_;
  std::map<std::string, std::size_t> color_index_;
  std::vector<Rgb> distinct_;
};

}  // namespace psevis
