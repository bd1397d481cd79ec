#include <gtest/gtest.h>

#include <cmath>
#include <set>
#include <string>

#include "chatgnn/autodiff.hpp"
#include "chatgnn/gradcheck.hpp"

using namespace chatgnn;

TEST(GradCheckSuite, EveryCasePassesAcrossSeeds) {
  for (std::uint64_t seed : {0u, 1u, 2u}) {
    const auto results = run_gradcheck_suite(20, seed);
    std::set<std::string> names;
    for (const auto& r : results) {
      names.insert(r.name);
      EXPECT_TRUE(r.passed()) << r.name << " seed " << seed << " worst " << r.worst_error;
      EXPECT_EQ(r.instances, 20u);
      EXPECT_TRUE(std::isfinite(r.worst_error));
    }
    EXPECT_EQ(names.size(), results.size());
    for (const char* expected : {"matmul", "layer_norm", "chat_layer_forward", "dir_chat_forward",
                                 "model_chat", "model_gcn"})
      EXPECT_EQ(names.count(expected), 1u) << expected;
  }
}

TEST(GradCheckSuite, SameSeedSameReport) {
  const auto a = run_gradcheck_suite(5, 11);
  const auto b = run_gradcheck_suite(5, 11);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].worst_error, b[i].worst_error);
    EXPECT_EQ(a[i].redraws, b[i].redraws);
  }
}
