#include <gtest/gtest.h>

#include <algorithm>
#include <set>

#include "brainnet/split.hpp"
#include "support.hpp"

using namespace brainnet;
using brainnet::testing::error_code_of;

namespace {

std::vector<std::string> ids(std::size_t n) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back("UPENN-GBM-" + std::to_string(10000 + i));
  return out;
}

}  // namespace

TEST(Split, SixtyTwentyTwentyPartition) {
  const auto s = split_subjects(ids(611), 42);
  EXPECT_EQ(s.train.size(), 367u);  // round(366.6)
  EXPECT_EQ(s.validation.size(), 122u);
  EXPECT_EQ(s.test.size(), 122u);
  std::set<std::string> all;
  for (const auto* part : {&s.train, &s.validation, &s.test}) all.insert(part->begin(), part->end());
  EXPECT_EQ(all.size(), 611u);
}

TEST(Split, DeterministicAndInputOrderIndependent) {
  auto a = ids(50);
  auto b = a;
  std::reverse(b.begin(), b.end());
  const auto sa = split_subjects(a, 7);
  const auto sb = split_subjects(b, 7);
  EXPECT_EQ(sa.train, sb.train);
  EXPECT_EQ(sa.test, sb.test);
  EXPECT_NE(split_subjects(a, 8).train, sa.train);
}

TEST(Split, Errors) {
  EXPECT_EQ(error_code_of([] { split_subjects({"a", "a"}, 1); }), ErrorCode::InvalidArgument);
  EXPECT_EQ(error_code_of([] { split_subjects(ids(3), 1, {-1, 1, 1}); }), ErrorCode::InvalidArgument);
  EXPECT_EQ(error_code_of([] { split_subjects(ids(3), 1, {0, 0, 0}); }), ErrorCode::InvalidArgument);
}

TEST(Split, TinyInputs) {
  EXPECT_TRUE(split_subjects({}, 1).train.empty());
  const auto one = split_subjects({"x"}, 1);
  EXPECT_EQ(one.train.size() + one.validation.size() + one.test.size(), 1u);
}
