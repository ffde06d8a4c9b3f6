#include "oracles.h"

#include "ivc/distance_transform.h"
#include "ivc/error.h"

#include <doctest.h>

#include <random>

using namespace ivc;

TEST_CASE("isolated lumen voxel has distance one") {
  LumenMask m;
  m.grid.dims = {3, 3, 3};
  m.bits.assign(27, 0);
  m.bits[m.grid.linear(1, 1, 1)] = 1;
  const DistanceField d = distance_transform(m);
  CHECK(d.at({1, 1, 1}) == 1.0);
  CHECK(d.at({0, 0, 0}) == 0.0);
}

TEST_CASE("center of a 3x3x3 block is two voxels from background") {
  LumenMask m;
  m.grid.dims = {5, 5, 5};
  m.bits.assign(125, 0);
  for (int k = 1; k <= 3; ++k)
    for (int j = 1; j <= 3; ++j)
      for (int i = 1; i <= 3; ++i) m.bits[m.grid.linear(i, j, k)] = 1;
  const DistanceField d = distance_transform(m);
  CHECK(d.at({2, 2, 2}) == 2.0);
  CHECK(d.at({1, 2, 2}) == 1.0);
  CHECK(d.max() == 2.0);
}

TEST_CASE("empty and full masks are rejected") {
  LumenMask m;
  m.grid.dims = {2, 2, 2};
  m.bits.assign(8, 0);
  CHECK_THROWS_AS(distance_transform(m), Error);
  try {
    distance_transform(m);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::EmptyMask);
  }
  m.bits.assign(8, 1);
  try {
    distance_transform(m);
    FAIL("expected AllForeground");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::AllForeground);
  }
}

TEST_CASE("random masks equal the exhaustive nearest-background scan") {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> fill(0.5, 0.98);
  std::uniform_real_distribution<double> sp(0.4, 2.5);
  for (int trial = 0; trial < 12; ++trial) {
    const LumenMask m = oracle::random_mask(12, fill(rng), rng);
    const Vec3 spacing = trial % 2 ? Vec3(sp(rng), sp(rng), sp(rng)) : Vec3::Ones();
    const DistanceField d = distance_transform(m, spacing);
    const auto ref = oracle::brute_force_edt(m, spacing);
    double worst = 0.0;
    for (std::size_t i = 0; i < ref.size(); ++i) worst = std::max(worst, std::abs(d.values[i] - ref[i]));
    CHECK(worst <= 1e-9);
  }
}

TEST_CASE("distance field is nonnegative, zero off the lumen and 1-Lipschitz") {
  std::mt19937_64 rng(5);
  const LumenMask m = oracle::random_mask(14, 0.9, rng);
  const DistanceField d = distance_transform(m);
  const Grid& g = m.grid;
  for (std::size_t i = 0; i < g.voxel_count(); ++i) {
    CHECK(d.values[i] >= 0.0);
    CHECK((d.values[i] == 0.0) == (m.bits[i] == 0));
    const Vec3i v = g.unlinear(i);
    for (int a = 0; a < 3; ++a) {
      Vec3i n = v;
      n[a] += 1;
      if (g.contains(n)) CHECK(std::abs(d.values[i] - d.at(n)) <= 1.0 + 1e-12);
    }
  }
}
