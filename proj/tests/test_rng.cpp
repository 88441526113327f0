#include "alpr/rng.hpp"
#include "doctest.h"

#include <cmath>

using alpr::Rng;

TEST_CASE("rng streams are reproducible and distinct") {
  Rng a(42), b(42), c(43);
  for (int i = 0; i < 100; ++i) {
    const auto x = a.bits();
    CHECK(x == b.bits());
    CHECK(x != c.bits());
  }
  CHECK(Rng::stream(1, 0).bits() == Rng::stream(1, 0).bits());
  CHECK(Rng::stream(1, 0).bits() != Rng::stream(1, 1).bits());
}

TEST_CASE("rng distributions stay in range") {
  Rng r(7);
  double sum = 0;
  for (int i = 0; i < 20000; ++i) {
    const double u = r.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    sum += u;
    CHECK(r.index(5) < 5u);
    const double b = r.beta(0.5, 0.5);
    CHECK(b >= 0.0);
    CHECK(b <= 1.0);
  }
  CHECK(sum / 20000 == doctest::Approx(0.5).epsilon(0.02));
  CHECK_FALSE(r.bernoulli(0.0));
  CHECK(r.bernoulli(1.0));
  CHECK(r.symmetric(0.0) == 0.0);
}
