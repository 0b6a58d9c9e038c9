/* Copyright 2026 The TimeMoE Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <sstream>

#include "common/test_util.h"
#include "timemoe/data/csv.h"
#include "timemoe/error.h"

namespace timemoe::data {
namespace {

std::string ett_shaped(std::size_t rows) {
  std::ostringstream os;
  os << "date,HUFL,HULL,MUFL,MULL,LUFL,LULL,OT\n";
  for (std::size_t r = 0; r < rows; ++r) {
    os << "2016-07-01 " << r % 24 << ":00:00";
    for (int c = 0; c < 7; ++c) os << "," << (r * 7 + c) * 0.25;
    os << "\n";
  }
  return os.str();
}

TEST(CsvTest, ToyRoundTripIsExact) {
  const std::string text = "a,b\n0.1,-2.5e-3\n1e300,3\n7.25,0.3333333333333333\n";
  const auto t = parse_csv(text);
  ASSERT_EQ(t.rows, 3u);
  ASSERT_EQ(t.columns, (std::vector<std::string>{"a", "b"}));
  EXPECT_EQ(t.at(0, 0), 0.1);
  EXPECT_EQ(t.at(1, 0), 1e300);
  const auto again = parse_csv(format_csv(t));
  EXPECT_EQ(again.values, t.values);
  EXPECT_EQ(again.columns, t.columns);
}

TEST(CsvTest, TimestampDetectionAndChannelSelection) {
  const auto t = parse_csv(ett_shaped(5));
  EXPECT_EQ(t.channels(), 7u);
  EXPECT_EQ(t.at(1, 0), 7 * 0.25);
  CsvSchema s;
  s.channels = {"OT", "HUFL"};
  const auto u = parse_csv(ett_shaped(5), s);
  ASSERT_EQ(u.columns, (std::vector<std::string>{"OT", "HUFL"}));
  EXPECT_EQ(u.at(2, 0), (2 * 7 + 6) * 0.25);
  EXPECT_EQ(u.column(1), t.column(0));
}

TEST(CsvTest, MissingColumnIsFormatError) {
  CsvSchema s;
  s.channels = {"OT", "missing"};
  EXPECT_THROW(parse_csv(ett_shaped(3), s), FormatError);
  EXPECT_THROW(parse_csv("a,b\n1,2\n3\n"), FormatError);
}

TEST(CsvTest, NonNumericCellNamesLineAndColumn) {
  try {
    parse_csv("a,b\n1,2\n3,oops\n");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    const std::string what = e.what();
    EXPECT_NE(what.find("line 3"), std::string::npos) << what;
    EXPECT_NE(what.find("column 2"), std::string::npos) << what;
  }
  EXPECT_THROW(parse_csv("a,b\n1,\n"), ParseError);
  CsvSchema s;
  s.empty_as_nan = true;
  const auto t = parse_csv("a,b\n1,\n", s);
  EXPECT_TRUE(std::isnan(t.at(0, 1)));
}

TEST(CsvTest, LoadFromFile) {
  testing::TempDir dir("csv");
  const auto path = dir.path() / "x.csv";
  {
    std::ofstream os(path);
    os << ett_shaped(4);
  }
  EXPECT_EQ(load_csv(path).rows, 4u);
  EXPECT_ANY_THROW(load_csv(dir.path() / "absent.csv"));
}

TEST(SplitTest, Etth1Sizes) {
  const auto t = parse_csv(ett_shaped(14307));
  ASSERT_EQ(t.rows, 14307u);
  const auto p = split_preset("ETTh1");
  ASSERT_TRUE(p.has_value());
  EXPECT_EQ(p->train, 8545u);
  EXPECT_EQ(p->val, 2881u);
  EXPECT_EQ(p->test, 2881u);
  const auto s = apply_split(t.rows, *p);
  EXPECT_EQ(s.train_end - s.train_begin, 8545u);
  EXPECT_EQ(s.val_begin, s.train_end);
  EXPECT_EQ(s.val_end - s.val_begin, 2881u);
  EXPECT_EQ(s.test_begin, s.val_end);
  EXPECT_EQ(s.test_end, 14307u);
  EXPECT_THROW(apply_split(14306, *p), DataError);
  EXPECT_FALSE(split_preset("unknown").has_value());
}

TEST(SplitTest, RatioSplit) {
  const auto p = ratio_split(1000);
  EXPECT_EQ(p.train, 700u);
  EXPECT_EQ(p.val, 100u);
  EXPECT_EQ(p.test, 200u);
  EXPECT_EQ(ratio_split(1001).total(), 1001u);
}

TEST(StandardizerTest, FitsOnTrainRowsOnly) {
  CsvTable t;
  t.columns = {"x", "c"};
  t.rows = 4;
  t.values = {1, 5, 3, 5, 100, 5, -100, 5};
  const auto s = Standardizer::fit(t, 0, 2);
  EXPECT_DOUBLE_EQ(s.mean[0], 2.0);
  EXPECT_DOUBLE_EQ(s.scale[0], 1.0);
  EXPECT_DOUBLE_EQ(s.scale[1], 1.0);  // constant channel
  const auto z = s.apply(t);
  EXPECT_DOUBLE_EQ(z.at(0, 0), -1.0);
  EXPECT_DOUBLE_EQ(z.at(2, 0), 98.0);
  EXPECT_DOUBLE_EQ(z.at(3, 1), 0.0);
  EXPECT_DOUBLE_EQ(s.inverse(0, s.forward(0, 42.0)), 42.0);
}

}  // namespace
}  // namespace timemoe::data
