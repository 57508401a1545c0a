#include <gtest/gtest.h>

#include <sstream>

#include "rfmt/text/tokenize.h"
#include "rfmt/text/vocab.h"
#include "rfmt/util/error.h"
#include "rfmt/util/rng.h"

namespace rfmt {
namespace {

TEST(Tokenize, SplitsTerminalPunctuation) {
  EXPECT_EQ(split_words("does it work?"), (std::vector<std::string>{"does", "it", "work", "?"}));
  EXPECT_EQ(split_words("  what  is this ?! "), (std::vector<std::string>{"what", "is", "this", "?", "!"}));
  EXPECT_EQ(split_words("a50s m31"), (std::vector<std::string>{"a50s", "m31"}));
  EXPECT_TRUE(split_words("   ").empty());
  EXPECT_EQ(canonical("does it work?"), "does it work ?");
}

TEST(Tokenize, NormalizeQuestion) {
  EXPECT_EQ(normalize_question("yah kaam karta"), "yah kaam karta ?");
  EXPECT_EQ(normalize_question("yah kaam karta ?"), "yah kaam karta ?");
  EXPECT_EQ(normalize_question("yah kaam karta."), "yah kaam karta ?");
  EXPECT_EQ(normalize_question(""), "?");
  EXPECT_TRUE(ends_with_question_mark("a b ? "));
  EXPECT_FALSE(ends_with_question_mark("a b"));
  EXPECT_FALSE(ends_with_question_mark(""));
}

TEST(Vocab, ReservedIdsAndUnknowns) {
  const Vocab v = Vocab::build({"a b b", "b c ?"}, 1);
  EXPECT_EQ(v.size(), kNumReserved + 4u);
  EXPECT_EQ(v.id("zzz"), kUnk);
  EXPECT_TRUE(v.contains("?"));
  EXPECT_EQ(v.token(v.id("b")), "b");
  // Most frequent first.
  EXPECT_EQ(v.id("b"), kNumReserved);
}

TEST(Vocab, MinCountDropsRareTokens) {
  const Vocab v = Vocab::build({"a a a b"}, 2);
  EXPECT_TRUE(v.contains("a"));
  EXPECT_FALSE(v.contains("b"));
}

TEST(Vocab, SaveLoadRoundTrip) {
  const Vocab v = Vocab::build({"x y z ?", "y z"}, 1);
  std::stringstream ss;
  v.save(ss);
  const Vocab w = Vocab::load(ss);
  EXPECT_TRUE(v == w);
  std::stringstream bad("not a vocab\n");
  EXPECT_THROW(Vocab::load(bad), DataError);
}

TEST(Tokenize, TokenizeAndBack) {
  const Vocab v = Vocab::build({"does it work ?"}, 1);
  const TokenSeq s = tokenize("does it fly?", v);
  EXPECT_EQ(s.size(), 4u);
  EXPECT_EQ(s.ids[2], kUnk);
  EXPECT_EQ(s.text(), "does it fly ?");
  EXPECT_EQ(from_ids(s.ids, v).text(), "does it <unk> ?");
}

TEST(Tokenize, NormalizeQuestionExamples) {
  EXPECT_EQ(normalize_question("It works in samsung a50s"), "It works in samsung a50s ?");
  EXPECT_EQ(normalize_question("Does it fit ?"), "Does it fit ?");
  EXPECT_EQ(normalize_question("ok.."), "ok ?");
}

TEST(Tokenize, NormalizeQuestionIsIdempotent) {
  Rng rng(11);
  const std::string alphabet = "ab ?.!,xyz ";
  for (int trial = 0; trial < 2000; ++trial) {
    std::string s;
    const std::size_t n = rng.below(12);
    for (std::size_t i = 0; i < n; ++i) s += alphabet[rng.below(alphabet.size())];
    const std::string once = normalize_question(s);
    EXPECT_EQ(normalize_question(once), once) << "'" << s << "'";
    EXPECT_TRUE(ends_with_question_mark(once)) << "'" << s << "'";
  }
}

TEST(Tokenize, OutOfVocabularyKeepsTheSurface) {
  const Vocab v = Vocab::build({"does it work ?"}, 1);
  const TokenSeq s = tokenize("does it levitate ?", v);
  EXPECT_EQ(s.ids[2], kUnk);
  EXPECT_EQ(detokenize(s), "does it levitate ?");
}

TEST(Vocab, MinCountExamples) {
  const Vocab one = Vocab::build({"a a b"}, 1);
  EXPECT_TRUE(one.contains("a"));
  EXPECT_TRUE(one.contains("b"));
  const Vocab two = Vocab::build({"a a b"}, 2);
  EXPECT_TRUE(two.contains("a"));
  EXPECT_FALSE(two.contains("b"));
}

TEST(Vocab, LineOrderDoesNotMatter) {
  std::vector<std::string> lines = {"a b c", "c c d ?", "b e", "a a", "e d c b a", "f"};
  const Vocab ref = Vocab::build(lines, 1);
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    for (std::size_t i = lines.size(); i > 1; --i) std::swap(lines[i - 1], lines[rng.below(i)]);
    EXPECT_TRUE(Vocab::build(lines, 1) == ref);
  }
}
}  // namespace
}  // namespace rfmt
