#include <doctest.h>

#include <cmath>

#include <nlohmann/json.hpp>

#include "oracles.hpp"
#include "tomornn/geometry.hpp"

using namespace tomornn;

TEST_CASE("steering matrix entries are unit-modulus complex exponentials") {
  const auto geom = AcquisitionGeometry::reference();
  const auto grid = ElevationGrid::reference();
  REQUIRE(grid.size() == 321);
  const CMatrix r = build_steering_matrix(geom, grid);
  REQUIRE(r.rows() == 25);
  REQUIRE(r.cols() == 321);
  for (Eigen::Index n = 0; n < r.rows(); n += 7)
    for (Eigen::Index l = 0; l < r.cols(); l += 13)
      CHECK(std::abs(std::abs(r(n, l)) - 1.0) < 1e-12);
  // direct formula spot check
  const auto xi = geom.frequencies();
  const Complex expected =
      std::exp(Complex(0, -2.0 * kPi * xi[3] * grid.position(17)));
  CHECK(std::abs(r(3, 17) - expected) < 1e-12);
}

TEST_CASE("zero-frequency row is all ones") {
  AcquisitionGeometry geom;
  geom.baselines = {0.0, 10.0, 20.0};
  geom.freq_scale = 1e-4;
  const ElevationGrid grid{0.0, 4.0, 1.0};
  const CMatrix r = build_steering_matrix(geom, grid);
  for (Eigen::Index l = 0; l < r.cols(); ++l)
    CHECK(std::abs(r(0, l) - Complex(1.0, 0.0)) < 1e-15);
}

TEST_CASE("rayleigh resolution of the reference array is 42 m") {
  const auto geom = AcquisitionGeometry::reference();
  CHECK(rayleigh_resolution(geom) == doctest::Approx(42.0).epsilon(1e-12));
}

TEST_CASE("doubling baselines halves the resolution") {
  auto geom = AcquisitionGeometry::reference();
  const double rho = rayleigh_resolution(geom);
  for (auto& b : geom.baselines) b *= 2.0;
  CHECK(rayleigh_resolution(geom) == doctest::Approx(rho / 2.0));
}

TEST_CASE("resolution is invariant under a constant baseline offset") {
  auto geom = AcquisitionGeometry::reference();
  const double rho = rayleigh_resolution(geom);
  for (auto& b : geom.baselines) b += 57.0;
  CHECK(rayleigh_resolution(geom) == doctest::Approx(rho).epsilon(1e-12));
}

TEST_CASE("degenerate geometry is rejected") {
  AcquisitionGeometry geom;
  geom.baselines = {5.0, 5.0, 5.0};
  geom.freq_scale = 1e-4;
  CHECK_THROWS_AS(rayleigh_resolution(geom), ConfigError);
}

TEST_CASE("crlb scales as 1/sqrt(linear SNR)") {
  const auto geom = AcquisitionGeometry::reference();
  const double c6 = crlb_elevation(geom, 6.0, 30.0);
  const double c12 = crlb_elevation(geom, 12.0, 30.0);
  CHECK(c6 / c12 == doctest::Approx(std::sqrt(std::pow(10.0, 0.6))).epsilon(1e-10));
}

TEST_CASE("crlb matches the finite-difference Fisher oracle") {
  const auto geom = AcquisitionGeometry::reference();
  for (double snr : {0.0, 6.0, 10.0}) {
    const double analytic = crlb_elevation(geom, snr, 12.0);
    const double fd = oracle::crlb_fd(geom, snr, 12.0);
    CHECK(analytic == doctest::Approx(fd).epsilon(1e-6));
  }
}

TEST_CASE("crlb is translation invariant") {
  const auto geom = AcquisitionGeometry::reference();
  const double a = oracle::crlb_fd(geom, 6.0, 0.0);
  const double b = oracle::crlb_fd(geom, 6.0, 10.0);
  CHECK(a == doctest::Approx(b).epsilon(1e-9));
  CHECK(crlb_elevation(geom, 6.0, 0.0) ==
        doctest::Approx(crlb_elevation(geom, 6.0, 10.0)).epsilon(1e-12));
}

TEST_CASE("crlb decreases with SNR and with more acquisitions") {
  const auto geom = AcquisitionGeometry::reference();
  double prev = crlb_elevation(geom, -2.0, 0.0);
  for (double snr : {0.0, 3.0, 6.0, 9.0}) {
    const double c = crlb_elevation(geom, snr, 0.0);
    CHECK(c < prev);
    prev = c;
  }
  // nested subsets of acquisitions
  AcquisitionGeometry sub = geom;
  sub.baselines.resize(8);
  const double c8 = crlb_elevation(sub, 6.0, 0.0);
  sub = geom;
  sub.baselines.resize(16);
  const double c16 = crlb_elevation(sub, 6.0, 0.0);
  const double c25 = crlb_elevation(geom, 6.0, 0.0);
  CHECK(c16 < c8);
  CHECK(c25 < c16);
}

TEST_CASE("perturb_baselines stays in range and is the identity at zero") {
  const auto geom = AcquisitionGeometry::reference();
  Rng rng(7);
  const auto same = perturb_baselines(geom, 0.0, 0.0, rng);
  for (int i = 0; i < geom.count(); ++i)
    CHECK(same.baselines[static_cast<std::size_t>(i)] ==
          geom.baselines[static_cast<std::size_t>(i)]);
  const auto shifted = perturb_baselines(geom, 5.0, 10.0, rng);
  for (int i = 0; i < geom.count(); ++i) {
    const double d = std::abs(shifted.baselines[static_cast<std::size_t>(i)] -
                              geom.baselines[static_cast<std::size_t>(i)]);
    CHECK(d >= 5.0);
    CHECK(d <= 10.0);
  }
  CHECK_THROWS_AS(perturb_baselines(geom, 5.0, 1.0, rng), ConfigError);
}

TEST_CASE("geometry loads from both JSON forms") {
  const nlohmann::json a = {{"baselines", {-135.0, 0.0, 135.0}},
                            {"freq_scale", 8.818342151675485e-05}};
  const auto ga = AcquisitionGeometry::from_json(a);
  CHECK(rayleigh_resolution(ga) == doctest::Approx(42.0));

  const nlohmann::json b = {{"baselines", {-135.0, 0.0, 135.0}},
                            {"rayleigh_resolution", 42.0}};
  const auto gb = AcquisitionGeometry::from_json(b);
  CHECK(gb.freq_scale == doctest::Approx(ga.freq_scale));

  const nlohmann::json c = {{"count", 25},
                            {"span", {-135.0, 135.0}},
                            {"rayleigh_resolution", 42.0}};
  const auto gc = AcquisitionGeometry::from_json(c);
  CHECK(gc.fingerprint() == AcquisitionGeometry::reference().fingerprint());

  CHECK_THROWS_AS(AcquisitionGeometry::from_json(nlohmann::json{{"baselines", {1.0, 2.0}}}),
                  ConfigError);
}

TEST_CASE("grid geometry and bins") {
  const auto grid = ElevationGrid::reference();
  CHECK(grid.position(0) == -20.0);
  CHECK(grid.position(320) == 300.0);
  CHECK(grid.nearest_bin(-20.4) == 0);
  CHECK(grid.nearest_bin(0.49) == 20);
  CHECK(grid.nearest_bin(1000.0) == 320);
}
