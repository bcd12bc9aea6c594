#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdint>
#include <map>
#include <vector>

#include "subcorr/rng.hpp"

using subcorr::RngStream;

TEST_CASE("identical seed pairs reproduce the draw sequence") {
  RngStream a(42, 7);
  RngStream b(42, 7);
  for (int i = 0; i < 100; ++i) {
    REQUIRE(a.next_u64() == b.next_u64());
  }
}

TEST_CASE("distinct streams from one master seed differ") {
  RngStream a(42, 0);
  RngStream b(42, 1);
  bool any_difference = false;
  for (int i = 0; i < 16; ++i) {
    if (a.next_u64() != b.next_u64()) any_difference = true;
  }
  REQUIRE(any_difference);
}

TEST_CASE("uniform_below covers {0..J-1} without bias") {
  const int j = 8;
  const long draws = 100000;
  std::vector<long> counts(j, 0);
  RngStream rng(1, 0);
  for (long i = 0; i < draws; ++i) {
    const auto v = rng.uniform_below(j);
    REQUIRE(v < static_cast<std::uint64_t>(j));
    ++counts[static_cast<std::size_t>(v)];
  }
  const double p = 1.0 / j;
  const double bound = 5.0 * std::sqrt(p * (1.0 - p) / draws);
  for (long c : counts) {
    REQUIRE(std::abs(static_cast<double>(c) / draws - p) < bound);
  }
}

TEST_CASE("uniform_below rejects zero") {
  RngStream rng(0, 0);
  REQUIRE_THROWS_AS(rng.uniform_below(0), subcorr::ParameterError);
}

TEST_CASE("uniform_double stays in the half-open unit interval") {
  RngStream rng(3, 3);
  for (int i = 0; i < 10000; ++i) {
    const double u = rng.uniform_double();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
  }
}

TEST_CASE("bernoulli at zero never fires") {
  RngStream rng(5, 0);
  for (int i = 0; i < 1000; ++i) REQUIRE_FALSE(rng.bernoulli(0.0));
}

TEST_CASE("permutations of three elements are uniform over all six") {
  const long draws = 60000;
  std::map<std::vector<int>, long> counts;
  RngStream rng(11, 0);
  for (long i = 0; i < draws; ++i) ++counts[rng.permutation(3)];
  REQUIRE(counts.size() == 6);
  const double p = 1.0 / 6.0;
  const double bound = 5.0 * std::sqrt(p * (1.0 - p) / draws);
  for (const auto& [perm, count] : counts) {
    REQUIRE(std::abs(static_cast<double>(count) / draws - p) < bound);
  }
}

TEST_CASE("single-element permutation is the identity") {
  RngStream rng(1, 1);
  REQUIRE(rng.permutation(1) == std::vector<int>{0});
}
