#include <sstream>

#include <gtest/gtest.h>

#include "medsim/core/csv.hpp"
#include "medsim/core/hash.hpp"
#include "medsim/core/text.hpp"
#include "medsim/core/time.hpp"

using namespace medsim;

TEST(Text, CodePointsNotBytes) {
  EXPECT_EQ(text::code_points("abc"), 3u);
  EXPECT_EQ(text::code_points("caf\xC3\xA9"), 4u);          // café
  EXPECT_EQ(text::code_points("\xE6\x97\xA5\xE6\x9C\xAC"), 2u);  // 日本
  EXPECT_EQ(text::code_points("\xF0\x9F\x98\x80"), 1u);      // emoji
  EXPECT_EQ(text::truncate_code_points("caf\xC3\xA9!", 4), "caf\xC3\xA9");
}

TEST(Text, Normalization) {
  EXPECT_EQ(text::normalize_for_match("  Chest   PAIN\n started "), "chest pain started");
  EXPECT_TRUE(text::contains_word("do you take any medications?", "medications"));
  EXPECT_FALSE(text::contains_word("premedication", "medication"));
  EXPECT_TRUE(text::contains_word("any chest pain", "chest pain"));
}

TEST(Time, Rfc3339RoundTrip) {
  const auto tp = parse_rfc3339("2025-03-01T09:30:15.250Z");
  EXPECT_EQ(format_rfc3339(tp), "2025-03-01T09:30:15.250Z");
  EXPECT_EQ(parse_rfc3339("2025-03-01T10:30:15.250+01:00"), tp);
  EXPECT_EQ(format_rfc3339(parse_rfc3339("2024-02-29T00:00:00Z")), "2024-02-29T00:00:00.000Z");
  EXPECT_THROW(parse_rfc3339("2025-02-30T00:00:00Z"), Error);
  EXPECT_THROW(parse_rfc3339("yesterday"), Error);
  EXPECT_DOUBLE_EQ(minutes_between(tp, tp + std::chrono::seconds(90)), 1.5);
}

TEST(Csv, QuotedFieldsAndLineNumbers) {
  std::istringstream in("a,b\n1,\"x, \"\"y\"\"\"\n\n2,\"multi\nline\"\n3,z\n");
  const auto t = csv::read(in);
  ASSERT_EQ(t.rows.size(), 3u);
  EXPECT_EQ(t.rows[0][1], "x, \"y\"");
  EXPECT_EQ(t.rows[1][1], "multi\nline");
  EXPECT_EQ(t.line_numbers[0], 2u);
  EXPECT_EQ(t.line_numbers[1], 4u);
  EXPECT_EQ(t.line_numbers[2], 6u);
  std::ostringstream out;
  csv::write(out, t);
  std::istringstream again(out.str());
  EXPECT_EQ(csv::read(again).rows, t.rows);
}

TEST(Hash, StableFnv) {
  EXPECT_EQ(fnv1a(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(Fnv1a{}.update("a").hex(), "af63dc4c8601ec8c");
}
