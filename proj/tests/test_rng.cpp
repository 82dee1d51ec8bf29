#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <set>

#include "nash_arena/rng.hpp"

using nash_arena::Rng;

TEST_CASE("same seed reproduces the stream", "[rng]") {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) REQUIRE(a.next_u64() == b.next_u64());
}

TEST_CASE("different seeds diverge", "[rng]") {
  Rng a(1), b(2);
  int same = 0;
  for (int i = 0; i < 64; ++i) same += a.next_u64() == b.next_u64();
  REQUIRE(same == 0);
}

TEST_CASE("child streams are independent and deterministic", "[rng]") {
  Rng root(7);
  Rng c0 = root.child(0);
  Rng c1 = root.child(1);
  Rng c0_again = Rng(7).child(0);
  REQUIRE(c0.next_u64() == c0_again.next_u64());
  REQUIRE(c0.next_u64() != c1.next_u64());
}

TEST_CASE("uniform lands in [0,1) and uniform_pos in (0,1]", "[rng]") {
  Rng rng(123);
  for (int i = 0; i < 10000; ++i) {
    const double u = rng.uniform();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    const double v = rng.uniform_pos();
    REQUIRE(v > 0.0);
    REQUIRE(v <= 1.0);
  }
}

TEST_CASE("normal draws look standard", "[rng]") {
  Rng rng(5);
  const int n = 20000;
  double sum = 0.0, sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = rng.normal();
    REQUIRE(std::isfinite(x));
    sum += x;
    sq += x * x;
  }
  const double mean = sum / n;
  const double var = sq / n - mean * mean;
  REQUIRE(std::abs(mean) < 0.05);
  REQUIRE(std::abs(var - 1.0) < 0.1);
}

TEST_CASE("dirichlet_uniform is a strictly positive distribution", "[rng]") {
  Rng rng(9);
  const std::vector<double> w = rng.dirichlet_uniform(6);
  REQUIRE(w.size() == 6);
  double total = 0.0;
  for (const double x : w) {
    REQUIRE(x > 0.0);
    total += x;
  }
  REQUIRE(std::abs(total - 1.0) < 1e-12);
  Rng rng2(9);
  REQUIRE(rng2.dirichlet_uniform(6) == w);
}
