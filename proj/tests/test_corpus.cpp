#include <gtest/gtest.h>

#include <numeric>

#include "psevis/corpus.hpp"
#include "test_support.hpp"

using namespace psevis;

TEST(Vocabulary, ThresholdFoldsRareTokensIntoUnk) {
  const std::vector<std::string> corpus{"a a b"};
  const auto vocab = Vocabulary::build(corpus, 2);
  ASSERT_EQ(vocab.size(), 4u);
  EXPECT_EQ(vocab.token(0), "<unk>");
  EXPECT_EQ(vocab.token(1), "<num>");
  EXPECT_EQ(vocab.token(2), "<eos>");
  EXPECT_EQ(vocab.token(3), "a");
  EXPECT_EQ(vocab.id_of("b"), vocab.unk_id());
  EXPECT_EQ(vocab.count(vocab.unk_id()), 1u);
}

TEST(Vocabulary, NumeralsMapToNum) {
  const std::vector<std::string> corpus{"in 1987 it rose 12.5 points to 3,000"};
  const auto vocab = Vocabulary::build(corpus, 1);
  EXPECT_EQ(vocab.id_of("1987"), vocab.num_id());
  EXPECT_EQ(vocab.id_of("12.5"), vocab.num_id());
  EXPECT_EQ(vocab.id_of("3,000"), vocab.num_id());
  EXPECT_EQ(vocab.id_of("-4"), vocab.num_id());
  EXPECT_EQ(vocab.count(vocab.num_id()), 3u);
  EXPECT_FALSE(vocab.find("1987"));
}

TEST(Vocabulary, NumeralRule) {
  for (const char* yes : {"0", "1987", "+3", "-4", "12.5", "3,000", "1.000.000", "1,234.5"}) {
    EXPECT_TRUE(is_numeral(yes)) << yes;
  }
  for (const char* no : {"", "-", "1.", ".5", "1..2", "12a", "a12", "1,", "--1", "n"}) {
    EXPECT_FALSE(is_numeral(no)) << no;
  }
}

TEST(Vocabulary, OrderingIsCountThenLexicographic) {
  const std::vector<std::string> corpus{"b b a a c c c d"};
  const auto vocab = Vocabulary::build(corpus, 1);
  ASSERT_EQ(vocab.size(), 7u);
  EXPECT_EQ(vocab.token(3), "c");
  EXPECT_EQ(vocab.token(4), "a");
  EXPECT_EQ(vocab.token(5), "b");
  EXPECT_EQ(vocab.token(6), "d");
}

TEST(Vocabulary, MaxSizeCapsAndFoldsTheRest) {
  const std::vector<std::string> corpus{"x x x y y z"};
  const auto vocab = Vocabulary::build(corpus, 1, 4);
  ASSERT_EQ(vocab.size(), 4u);
  EXPECT_EQ(vocab.token(3), "x");
  EXPECT_EQ(vocab.count(vocab.unk_id()), 3u);
}

TEST(Vocabulary, EmptyCorpusIsAnIngestionError) {
  const std::vector<std::string> empty{"", "   "};
  EXPECT_THROW(Vocabulary::build(empty, 1), IngestionError);
  EXPECT_THROW(Vocabulary::build(std::vector<std::string>{}, 1), IngestionError);
}

TEST(Vocabulary, CountsAccountForEveryToken) {
  const auto lines = oracle::tiny_corpus();
  const auto vocab = Vocabulary::build(lines, 2);
  const auto total = std::accumulate(vocab.counts().begin(), vocab.counts().end(), std::uint64_t{0});
  // EOS counts one per sentence on top of the corpus tokens.
  EXPECT_EQ(total, oracle::count_tokens(lines) + lines.size());
}

TEST(Vocabulary, DeskCorpusSizeMatchesBruteForceCount) {
  const auto lines = read_lines(oracle::source_dir() / "data" / "train.txt");
  ASSERT_GT(lines.size(), 1000u);
  const auto vocab = Vocabulary::build(lines, 2);
  EXPECT_EQ(vocab.size(), oracle::count_retained_types(lines, 2) + 3);
  for (std::size_t id = 3; id < vocab.size(); ++id) {
    EXPECT_GE(vocab.count(static_cast<TokenId>(id)), 2u);
  }
  const auto total = std::accumulate(vocab.counts().begin(), vocab.counts().end(), std::uint64_t{0});
  EXPECT_EQ(total, oracle::count_tokens(lines) + lines.size());
}

TEST(Vocabulary, BuildIsDeterministic) {
  const auto lines = oracle::tiny_corpus();
  const auto a = Vocabulary::build(lines, 1);
  const auto b = Vocabulary::build(lines, 1);
  EXPECT_EQ(a.tokens(), b.tokens());
  EXPECT_EQ(a.counts(), b.counts());
}

TEST(Vocabulary, IdsRoundTrip) {
  const auto vocab = Vocabulary::build(oracle::tiny_corpus(), 1);
  for (std::size_t id = 0; id < vocab.size(); ++id) {
    const auto t = static_cast<TokenId>(id);
    EXPECT_EQ(vocab.find(vocab.token(t)), t);
  }
}

TEST(Vocabulary, ListingRejectsMissingSpecials) {
  EXPECT_THROW(Vocabulary::from_listing({"a", "b", "c"}, {1, 1, 1}), FormatError);
  EXPECT_THROW(Vocabulary::from_listing({"<unk>", "<num>", "<eos>", "x", "x"}, {0, 0, 0, 1, 1}), FormatError);
  EXPECT_THROW(Vocabulary::from_listing({"<unk>", "<num>", "<eos>"}, {0, 0}), FormatError);
}

TEST(EncodeSentence, LowercasesAndAppendsEos) {
  const std::vector<std::string> corpus{"the cat the cat"};
  const auto vocab = Vocabulary::build(corpus, 1);
  const auto seq = encode_sentence("The cat", vocab);
  ASSERT_EQ(seq.ids.size(), 3u);
  EXPECT_EQ(seq.ids[0], vocab.find("the"));
  EXPECT_EQ(seq.ids[1], vocab.find("cat"));
  EXPECT_EQ(seq.ids[2], vocab.eos_id());
  EXPECT_EQ(seq.source_tokens, (std::vector<std::string>{"The", "cat", "<eos>"}));
  EXPECT_EQ(seq.length(), 2u);
  EXPECT_EQ(seq.inputs().size(), 2u);
  EXPECT_EQ(seq.targets()[1], vocab.eos_id());
}

TEST(EncodeSentence, OovAndNumerals) {
  const auto vocab = Vocabulary::build(std::vector<std::string>{"a b"}, 1);
  const auto seq = encode_sentence("zzzz 42", vocab);
  EXPECT_EQ(seq.ids, (std::vector<TokenId>{vocab.unk_id(), vocab.num_id(), vocab.eos_id()}));
}

TEST(EncodeSentence, EmptyInputIsRejected) {
  const auto vocab = Vocabulary::build(std::vector<std::string>{"a b"}, 1);
  EXPECT_THROW(encode_sentence("", vocab), IngestionError);
  EXPECT_THROW(encode_sentence(" \t ", vocab), IngestionError);
}

TEST(EncodeSentence, DecodeThenEncodeIsIdempotent) {
  const auto lines = read_lines(oracle::source_dir() / "data" / "test.txt");
  const auto vocab = Vocabulary::build(read_lines(oracle::source_dir() / "data" / "train.txt"), 2);
  for (std::size_t k = 0; k < 200 && k < lines.size(); ++k) {
    const auto seq = encode_sentence(lines[k], vocab);
    EXPECT_EQ(encode_sentence(decode(seq, vocab), vocab).ids, seq.ids) << lines[k];
    for (const TokenId id : seq.ids) {
      EXPECT_GE(id, 0);
      EXPECT_LT(static_cast<std::size_t>(id), vocab.size());
    }
  }
}

TEST(TagMap, LookupAndDefault) {
  const auto tags = oracle::tiny_tagmap();
  const auto [tag, color] = tags.tag_of("cat");
  EXPECT_EQ(tag, "NOUN");
  EXPECT_EQ(color, parse_hex_color("#00AA00"));
  const auto [utag, ucolor] = tags.tag_of("qwerty");
  EXPECT_EQ(utag, "default");
  EXPECT_EQ(ucolor, parse_hex_color("#CCCCCC"));
  EXPECT_EQ(tags.tag_of("CAT").first, "NOUN");
}

TEST(TagMap, RejectsUncoloredTagsAndMissingDefault) {
  EXPECT_THROW(TagMap({{"cat", "NOUN"}}, {{"default", Rgb{}}}), FormatError);
  EXPECT_THROW(TagMap({}, {{"NOUN", Rgb{}}}), FormatError);
}

TEST(TagMap, BundledFilesColorEveryVocabularyToken) {
  const auto dir = oracle::source_dir() / "data";
  const auto tags = TagMap::load(dir / "lexicon.tsv", dir / "colormap.json");
  const auto vocab = Vocabulary::build(read_lines(dir / "train.txt"), 2);
  std::size_t untagged = 0;
  for (const auto& token : vocab.tokens()) {
    const auto [tag, color] = tags.tag_of(token);
    EXPECT_TRUE(is_hex_color(to_hex(color)));
    if (tag == tags.default_tag()) ++untagged;
  }
  // Only <unk> lacks a lexicon entry.
  EXPECT_EQ(untagged, 1u);
  EXPECT_EQ(tags.distinct_colors().size(), 8u);
}

TEST(TagMap, ColormapOrderDecidesRank) {
  const auto tags = oracle::tiny_tagmap();
  EXPECT_EQ(tags.color_rank(parse_hex_color("#00AA00")), 0u);
  EXPECT_EQ(tags.color_rank(parse_hex_color("#CCCCCC")), 4u);
  EXPECT_EQ(tags.tag_for_color(parse_hex_color("#8800CC")), "VERB");
}

TEST(TagMap, LoadReportsMalformedLexicon) {
  const auto dir = oracle::scratch_dir("lexicon");
  oracle::write_text(dir / "lex.tsv", "cat NOUN\n");
  oracle::write_text(dir / "cmap.json", R"({"NOUN": "#00AA00", "default": "#CCCCCC"})");
  EXPECT_THROW(TagMap::load(dir / "lex.tsv", dir / "cmap.json"), IngestionError);
  oracle::write_text(dir / "lex.tsv", "cat\tNOUN\n");
  oracle::write_text(dir / "bad.json", R"({"NOUN": "green", "default": "#CCCCCC"})");
  EXPECT_THROW(TagMap::load(dir / "lex.tsv", dir / "bad.json"), FormatError);
  EXPECT_NO_THROW(TagMap::load(dir / "lex.tsv", dir / "cmap.json"));
}

TEST(Color, HexRoundTrip) {
  EXPECT_EQ(to_hex(parse_hex_color("#1f77B4")), "#1F77B4");
  EXPECT_THROW(parse_hex_color("1F77B4"), FormatError);
  EXPECT_THROW(parse_hex_color("#1F77G4"), FormatError);
  EXPECT_EQ(to_hex(Rgb{254.5, 0.49, 300}), "#FF00FF");
}
