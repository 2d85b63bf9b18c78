#include <doctest.h>

#include <cmath>
#include <vector>

#include "budgetalloc/rng.hpp"

using namespace budgetalloc;

TEST_CASE("streams are deterministic and purpose-separated") {
  RngStream a = RngStream::derive(1, "alpha");
  RngStream a2 = RngStream::derive(1, "alpha");
  RngStream b = RngStream::derive(1, "beta");
  RngStream a_idx = RngStream::derive(1, "alpha", 1);
  CHECK(a.next_u64() == a2.next_u64());
  CHECK(RngStream::derive(1, "alpha").next_u64() != b.next_u64());
  CHECK(RngStream::derive(1, "alpha").next_u64() != a_idx.next_u64());
}

TEST_CASE("uniform01 stays in range with the right mean") {
  RngStream rng(123);
  double sum = 0.0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform01();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    sum += u;
  }
  CHECK(sum / n == doctest::Approx(0.5).epsilon(0.01));
}

TEST_CASE("gaussian moments") {
  RngStream rng(7);
  const int n = 200000;
  double sum = 0.0, sum_sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double g = rng.gaussian();
    sum += g;
    sum_sq += g * g;
  }
  CHECK(sum / n == doctest::Approx(0.0).epsilon(1.0).scale(0.01));
  CHECK(std::abs(sum / n) < 0.01);
  CHECK(sum_sq / n == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("uniform_int covers all values") {
  RngStream rng(55);
  std::vector<int> counts(5, 0);
  for (int i = 0; i < 50000; ++i) counts[rng.uniform_int(5)]++;
  for (int c : counts) CHECK(std::abs(c - 10000) < 500);
}

TEST_CASE("sample_without_replacement yields distinct indices") {
  RngStream rng(9);
  const auto picks = rng.sample_without_replacement(100, 40);
  CHECK(picks.size() == 40);
  std::vector<bool> seen(100, false);
  for (std::size_t i : picks) {
    CHECK(i < 100);
    CHECK(!seen[i]);
    seen[i] = true;
  }
  RngStream rng2(9);
  CHECK(rng2.sample_without_replacement(100, 40) == picks);
}
