// Generates the bundled desk corpus from a small seeded English grammar.
// Because every word is emitted by a part-of-speech rule, the tag lexicon is
// exact. Output: train.txt, test.txt, lexicon.tsv, colormap.json.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "psevis/rng.hpp"

namespace {

using psevis::Rng;
using Words = std::vector<std::string>;

const Words kNouns = {
    "company", "market", "year", "government", "price", "share", "stock", "bank", "group", "president",
    "week", "month", "investor", "business", "official", "plan", "rate", "issue", "country", "system",
    "report", "chairman", "board", "trader", "index", "fund", "bond", "firm", "industry", "sale",
    "executive", "analyst", "unit", "program", "pension", "house", "city", "law", "court", "state",
    "worker", "team", "product", "deal", "problem", "student", "school", "teacher", "family", "child",
    "story", "newspaper", "director", "manager", "economy", "budget", "decision", "policy", "union", "agency",
    "client", "office", "partner", "contract", "project", "building", "car", "factory", "farmer", "crop",
    "doctor", "patient", "hospital", "drug", "study", "scientist", "computer", "network", "phone", "letter",
    "reader", "writer", "book", "film", "song", "artist", "museum", "garden", "river", "bridge",
    "road", "village", "island", "mountain", "forest", "storm", "season", "morning", "evening", "night",
    "leader", "voter", "election", "campaign", "senator", "lawyer", "judge", "jury", "witness", "police",
    "officer", "soldier", "army", "border", "neighbor", "friend", "crowd", "audience", "speaker", "reporter",
    "engineer", "pilot", "driver", "passenger", "airline", "airport", "train", "station", "ticket", "journey",
    "kitchen", "dinner", "auction", "bakery", "recipe", "harvest", "hamlet", "festival", "concert", "stadium",
    "player", "coach", "league", "match", "trophy", "record", "fan", "referee", "owner", "landlord",
    "tenant", "mayor", "council", "committee", "panel", "survey", "sample", "theory", "model", "engine",
    "ship", "harbor", "sailor", "captain", "merchant", "cargo", "shipment", "warehouse", "supplier", "customer",
    "violinist", "sculptor", "astronomer", "glacier", "meadow", "lantern", "orchard", "canyon", "volcano", "lagoon",
    "parliament", "monarch", "ambassador", "treaty", "embassy", "consulate", "dynasty", "empire", "colony", "frontier",
    "telescope", "satellite", "comet", "galaxy", "nebula", "asteroid", "orbit", "crater", "eclipse", "horizon",
};

// base, past
const std::vector<std::pair<std::string, std::string>> kTransitive = {
    {"buy", "bought"}, {"sell", "sold"}, {"make", "made"}, {"take", "took"}, {"see", "saw"},
    {"want", "wanted"}, {"need", "needed"}, {"like", "liked"}, {"build", "built"}, {"find", "found"},
    {"give", "gave"}, {"hold", "held"}, {"lose", "lost"}, {"win", "won"}, {"offer", "offered"},
    {"support", "supported"}, {"reject", "rejected"}, {"approve", "approved"}, {"expect", "expected"}, {"raise", "raised"},
    {"cut", "cut"}, {"report", "reported"}, {"acquire", "acquired"}, {"control", "controlled"}, {"own", "owned"},
    {"lead", "led"}, {"join", "joined"}, {"visit", "visited"}, {"watch", "watched"}, {"help", "helped"},
    {"review", "reviewed"}, {"change", "changed"}, {"launch", "launched"}, {"finance", "financed"}, {"attack", "attacked"},
    {"defend", "defended"}, {"protect", "protected"}, {"study", "studied"}, {"paint", "painted"}, {"design", "designed"},
    {"repair", "repaired"}, {"measure", "measured"}, {"observe", "observed"}, {"chart", "charted"}, {"survey", "surveyed"},
    {"admire", "admired"}, {"ignore", "ignored"}, {"question", "questioned"}, {"welcome", "welcomed"}, {"honor", "honored"},
    {"salvage", "salvaged"}, {"annex", "annexed"}, {"ratify", "ratified"}, {"chronicle", "chronicled"}, {"appraise", "appraised"},
};

const std::vector<std::pair<std::string, std::string>> kIntransitive = {
    {"rise", "rose"}, {"fall", "fell"}, {"stand", "stood"}, {"wait", "waited"}, {"arrive", "arrived"},
    {"leave", "left"}, {"work", "worked"}, {"grow", "grew"}, {"decline", "declined"}, {"close", "closed"},
    {"agree", "agreed"}, {"remain", "remained"}, {"move", "moved"}, {"recover", "recovered"}, {"fail", "failed"},
    {"succeed", "succeeded"}, {"travel", "traveled"}, {"sleep", "slept"}, {"smile", "smiled"}, {"react", "reacted"},
    {"vote", "voted"}, {"speak", "spoke"}, {"listen", "listened"}, {"return", "returned"}, {"improve", "improved"},
    {"wander", "wandered"}, {"linger", "lingered"}, {"falter", "faltered"}, {"flourish", "flourished"}, {"dwindle", "dwindled"},
};

const Words kSpeech = {"said", "emphasized", "added", "noted", "argued", "explained", "insisted", "claimed",
                       "warned", "replied", "announced", "conceded", "remarked", "stressed", "recalled"};

const Words kAdjectives = {
    "new", "big", "small", "major", "strong", "weak", "high", "low", "good", "bad",
    "old", "young", "large", "recent", "local", "national", "foreign", "federal", "public", "private",
    "early", "late", "long", "short", "important", "difficult", "easy", "clear", "quiet", "busy",
    "cheap", "expensive", "modern", "ancient", "bright", "dark", "happy", "angry", "careful", "famous",
    "rural", "urban", "northern", "southern", "eastern", "western", "annual", "quarterly", "volatile", "stable",
    "serene", "turbulent", "meticulous", "reluctant", "vigilant", "luminous", "austere", "candid", "frugal", "nimble",
};

const Words kPredicateAdj = {"strong", "weak", "ready", "happy", "angry", "busy", "quiet", "clear",
                             "cheap", "expensive", "stable", "volatile", "careful", "famous", "late", "early"};

const Words kAdverbs = {"quickly", "slowly", "sharply", "again", "today", "yesterday", "also", "still",
                        "recently", "finally", "quietly", "openly", "briefly", "steadily", "suddenly", "abroad",
                        "reluctantly", "gladly", "eventually", "nearly"};

const Words kPrepositions = {"in", "on", "at", "for", "with", "from", "to", "by", "about", "after",
                             "before", "near", "under", "over", "during", "without", "across", "behind"};

const Words kDetSingular = {"the", "a", "this", "that", "every", "each", "its", "their", "our", "his", "her"};
const Words kDetPlural = {"the", "these", "those", "some", "many", "few", "their", "our", "several", "all", "his", "her"};
const Words kModals = {"will", "can", "may", "should", "would", "could", "must", "might"};
const Words kConjunctions = {"and", "but", "so", "while", "because"};

struct Pronoun {
  std::string subject;
  std::string object;
  bool plural;
};
const std::vector<Pronoun> kPronouns = {
    {"he", "him", false}, {"she", "her", false}, {"it", "it", false}, {"they", "them", true}, {"we", "us", true},
};

std::map<std::string, std::string>& lexicon() {
  static std::map<std::string, std::string> lex;
  return lex;
}

const std::string& tagged(const std::string& word, const char* tag) {
  lexicon().emplace(word, tag);
  return word;
}

std::string pluralize(const std::string& noun) {
  if (noun == "child") return "children";
  if (noun == "police") return "police";
  if (noun == "army") return "armies";
  const char last = noun.back();
  if (last == 'y' && noun.size() > 1 && std::string("aeiou").find(noun[noun.size() - 2]) == std::string::npos) {
    return noun.substr(0, noun.size() - 1) + "ies";
  }
  if (last == 's' || last == 'x' || last == 'h' || last == 'o') return noun + "es";
  return noun + "s";
}

std::string third_person(const std::string& verb) {
  const char last = verb.back();
  if (last == 'y' && std::string("aeiou").find(verb[verb.size() - 2]) == std::string::npos) {
    return verb.substr(0, verb.size() - 1) + "ies";
  }
  if (last == 's' || last == 'x' || last == 'h' || last == 'o') return verb + "es";
  return verb + "s";
}

class Generator {
 public:
  explicit Generator(std::uint64_t seed) : rng_(seed) {}

  std::vector<std::string> sentence() {
    out_.clear();
    const double r = rng_.uniform();
    if (r < 0.40) {
      clause();
    } else if (r < 0.52) {
      emit("``", "PUNCT");
      clause();
      emit(",", "PUNCT");
      emit("''", "PUNCT");
      if (rng_.uniform() < 0.6) {
        emit(pick(kPronouns).subject, "PRON");
      } else {
        noun_phrase(rng_.uniform() < 0.2);
      }
      emit(pick(kSpeech), "VERB");
    } else if (r < 0.64) {
      clause();
      emit(",", "PUNCT");
      emit(pick(kConjunctions), "CONJ");
      clause();
    } else if (r < 0.76) {
      prepositional_phrase();
      emit(",", "PUNCT");
      clause();
    } else if (r < 0.88) {
      const bool plural = subject();
      (void)plural;
      emit(pick(kSpeech), "VERB");
      emit("that", "PRT");
      clause();
    } else {
      clause();
      emit(pick(kAdverbs), "ADV");
    }
    emit(".", "PUNCT");
    return out_;
  }

 private:
  template <class T>
  const T& pick(const std::vector<T>& items, double skew = 1.0) {
    // Zipf-like: weight 1 / (rank + 1)^skew
    double total = 0;
    for (std::size_t i = 0; i < items.size(); ++i) total += 1.0 / std::pow(static_cast<double>(i + 1), skew);
    double u = rng_.uniform() * total;
    for (std::size_t i = 0; i < items.size(); ++i) {
      u -= 1.0 / std::pow(static_cast<double>(i + 1), skew);
      if (u <= 0) return items[i];
    }
    return items.back();
  }

  void emit(const std::string& word, const char* tag) { out_.push_back(tagged(word, tag)); }

  std::string numeral() {
    const double r = rng_.uniform();
    if (r < 0.4) return std::to_string(1950 + rng_.below(70));
    if (r < 0.7) return std::to_string(2 + rng_.below(98));
    if (r < 0.85) return std::to_string(1 + rng_.below(99)) + "." + std::to_string(rng_.below(10));
    return std::to_string(1 + rng_.below(9)) + "," + std::to_string(100 + rng_.below(900));
  }

  void noun_phrase(bool plural, bool allow_pp = true) {
    const double r = rng_.uniform();
    if (plural && r < 0.12) {
      emit(numeral(), "NUM");
      emit(pluralize(pick(kNouns, 1.05)), "NOUN");
      return;
    }
    const auto& det = plural ? pick(kDetPlural) : pick(kDetSingular);
    int adjectives = rng_.uniform() < 0.35 ? 1 : 0;
    if (adjectives && rng_.uniform() < 0.2) ++adjectives;
    std::vector<std::string> adjs;
    for (int a = 0; a < adjectives; ++a) adjs.push_back(pick(kAdjectives, 1.0));
    const std::string& first = adjs.empty() ? std::string() : adjs.front();
    const std::string noun = pick(kNouns, 1.05);
    const std::string& lead = first.empty() ? noun : first;
    if (det == "a" && std::string("aeiou").find(lead.front()) != std::string::npos) {
      emit("an", "DET");
    } else {
      emit(det, "DET");
    }
    for (const auto& adj : adjs) emit(adj, "ADJ");
    emit(plural ? pluralize(noun) : noun, "NOUN");
    if (allow_pp && rng_.uniform() < 0.2) prepositional_phrase(false);
  }

  void prepositional_phrase(bool allow_pp = true) {
    const auto& prep = pick(kPrepositions);
    emit(prep, "ADP");
    if ((prep == "in" || prep == "during" || prep == "after" || prep == "before") && rng_.uniform() < 0.25) {
      emit(std::to_string(1950 + rng_.below(70)), "NUM");
      return;
    }
    noun_phrase(rng_.uniform() < 0.35, allow_pp);
  }

  /// Emits a subject and returns whether it is plural.
  bool subject() {
    if (rng_.uniform() < 0.25) {
      const auto& p = pick(kPronouns);
      emit(p.subject, "PRON");
      return p.plural;
    }
    const bool plural = rng_.uniform() < 0.4;
    noun_phrase(plural);
    return plural;
  }

  void object() {
    if (rng_.uniform() < 0.15) {
      emit(pick(kPronouns).object, "PRON");
    } else {
      noun_phrase(rng_.uniform() < 0.4);
    }
  }

  void clause() {
    const bool plural = subject();
    const bool past = rng_.uniform() < 0.5;
    const double r = rng_.uniform();
    if (r < 0.15) {
      const char* be = past ? (plural ? "were" : "was") : (plural ? "are" : "is");
      emit(be, "VERB");
      if (rng_.uniform() < 0.3) emit(pick(kAdverbs), "ADV");
      emit(pick(kPredicateAdj), "ADJ");
      return;
    }
    const bool modal = r < 0.27;
    const bool transitive = rng_.uniform() < 0.6;
    const auto& verb = transitive ? pick(kTransitive, 0.9) : pick(kIntransitive, 0.9);
    if (modal) {
      emit(pick(kModals), "VERB");
      emit(verb.first, "VERB");
    } else if (past) {
      emit(verb.second, "VERB");
    } else {
      emit(plural ? verb.first : third_person(verb.first), "VERB");
    }
    if (transitive) object();
    if (rng_.uniform() < 0.3) prepositional_phrase();
    if (rng_.uniform() < 0.15) emit(pick(kAdverbs), "ADV");
  }

  Rng rng_;
  std::vector<std::string> out_;
};

void write_lines(const std::filesystem::path& path, const std::vector<std::string>& lines) {
  std::ofstream out(path);
  for (const auto& line : lines) out << line << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Generate the bundled desk corpus"};
  std::string out_dir = "data";
  std::size_t train_count = 6000;
  std::size_t test_count = 700;
  std::uint64_t seed = 20190715;
  app.add_option("-o,--out", out_dir, "Output directory");
  app.add_option("--train", train_count, "Training sentences");
  app.add_option("--test", test_count, "Test sentences");
  app.add_option("--seed", seed, "Generator seed");
  CLI11_PARSE(app, argc, argv);

  Generator gen(seed);
  auto make = [&](std::size_t n) {
    std::vector<std::string> lines;
    for (std::size_t i = 0; i < n; ++i) {
      std::string line;
      for (const auto& w : gen.sentence()) line += (line.empty() ? "" : " ") + w;
      lines.push_back(line);
    }
    return lines;
  };
  const auto train = make(train_count);
  const auto test = make(test_count);

  std::filesystem::create_directories(out_dir);
  write_lines(std::filesystem::path(out_dir) / "train.txt", train);
  write_lines(std::filesystem::path(out_dir) / "test.txt", test);

  std::ofstream lex(std::filesystem::path(out_dir) / "lexicon.tsv");
  for (const auto& [word, tag] : lexicon()) {
    if (word.find_first_of("0123456789") != std::string::npos) continue;
    lex << word << '\t' << tag << '\n';
  }
  lex << "<num>\tNUM\n<eos>\tPUNCT\n";

  std::ofstream cmap(std::filesystem::path(out_dir) / "colormap.json");
  cmap << "{\n"
          "  \"NOUN\": \"#2CA02C\",\n"
          "  \"VERB\": \"#9467BD\",\n"
          "  \"ADJ\": \"#1F77B4\",\n"
          "  \"ADV\": \"#17BECF\",\n"
          "  \"DET\": \"#FFBF00\",\n"
          "  \"ADP\": \"#FFBF00\",\n"
          "  \"PRON\": \"#FFBF00\",\n"
          "  \"CONJ\": \"#FFBF00\",\n"
          "  \"PRT\": \"#FFBF00\",\n"
          "  \"NUM\": \"#FF7F0E\",\n"
          "  \"PUNCT\": \"#7F7F7F\",\n"
          "  \"default\": \"#C7C7C7\"\n"
          "}\n";
  std::cout << "wrote " << train.size() << " train and " << test.size() << " test sentences, "
            << lexicon().size() << " lexicon entries to " << out_dir << "\n";
  return 0;
}
