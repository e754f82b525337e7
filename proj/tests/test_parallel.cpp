#include <gtest/gtest.h>

#include <atomic>
#include <stdexcept>
#include <vector>

#include "frbm/parallel.hpp"

using namespace frbm;

TEST(Parallel, VisitsEveryIndexOnce) {
  for (int threads : {1, 2, 7, 0}) {
    std::vector<std::atomic<int>> hits(1000);
    parallel_for(hits.size(), threads, [&](std::size_t i) { hits[i].fetch_add(1); });
    for (const auto& h : hits) EXPECT_EQ(h.load(), 1);
  }
}

TEST(Parallel, EmptyRangeIsFine) {
  int calls = 0;
  parallel_for(0, 4, [&](std::size_t) { ++calls; });
  EXPECT_EQ(calls, 0);
}

TEST(Parallel, ResultsIndependentOfThreadCount) {
  auto run = [](int threads) {
    std::vector<double> out(513);
    parallel_for(out.size(), threads, [&](std::size_t i) {
      double acc = 0.0;
      for (std::size_t k = 1; k <= i + 1; ++k) acc += 1.0 / static_cast<double>(k * k);
      out[i] = acc;
    });
    return out;
  };
  EXPECT_EQ(run(1), run(3));
  EXPECT_EQ(run(1), run(8));
}

TEST(Parallel, ExceptionPropagates) {
  for (int threads : {1, 4}) {
    EXPECT_THROW(parallel_for(100, threads,
                              [](std::size_t i) {
                                if (i == 37) throw std::runtime_error("boom");
                              }),
                 std::runtime_error);
  }
}

TEST(Parallel, ResolveThreads) {
  EXPECT_EQ(resolve_threads(3), 3);
  EXPECT_GE(resolve_threads(0), 1);
}
