#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "oracles.hpp"
#include "spincat/state_factory.hpp"

using namespace spincat;

TEST_CASE("scs is normalized and matches the direct binomial construction") {
  for (const int n : {4, 8, 20}) {
    const SpinLength spin(n);
    for (const double theta : {0.1, 0.7, kHalfPi, 2.5}) {
      const DickeVector state = scs(spin, theta);
      CHECK(state.norm() == Catch::Approx(1.0).epsilon(1e-14));
      const Eigen::VectorXd reference = oracles::scs_direct(n, theta);
      for (int i = 0; i <= n; ++i)
        CHECK(state[i].real() == Catch::Approx(reference[i]).margin(1e-13));
    }
  }
}

TEST_CASE("scs poles") {
  const SpinLength spin(10);
  const DickeVector north = scs(spin, 0.0);
  CHECK(std::abs(north[10]) == Catch::Approx(1.0));
  const DickeVector south = scs(spin, kPi);
  CHECK(std::abs(south[0]) == Catch::Approx(1.0));
}

TEST_CASE("scs stays finite at large N") {
  const DickeVector state = scs(SpinLength(1000), 0.9);
  CHECK(state.allFinite());
  CHECK(state.norm() == Catch::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("scs azimuth applies the ladder phase") {
  const SpinLength spin(8);
  const double az = 0.37;
  const DickeVector plain = scs(spin, 0.8);
  const DickeVector rotated = scs(spin, 0.8, az);
  for (int i = 0; i <= 8; ++i) {
    const Complex expected = plain[i] * std::exp(Complex(0.0, -i * az));
    CHECK(std::abs(rotated[i] - expected) < 1e-14);
  }
}

TEST_CASE("scs rejects theta outside [0, pi]") {
  CHECK_THROWS_AS(scs(SpinLength(4), -0.1), std::invalid_argument);
  CHECK_THROWS_AS(scs(SpinLength(4), kPi + 0.1), std::invalid_argument);
}

TEST_CASE("msscs is normalized, mirror-symmetric, and rejects theta >= pi/2") {
  for (const int n : {8, 40, 100}) {
    const SpinLength spin(n);
    for (const double theta : {0.0, kPi / 8.0, 7.0 * kPi / 20.0}) {
      const DickeVector cat = msscs(spin, theta);
      CHECK(cat.norm() == Catch::Approx(1.0).epsilon(1e-13));
      for (int i = 0; i <= n; ++i) CHECK(std::abs(cat[i] - cat[n - i]) < 1e-14);
    }
  }
  CHECK_THROWS_AS(msscs(SpinLength(8), kHalfPi), std::invalid_argument);
  CHECK_THROWS_AS(msscs(SpinLength(8), 1.8), std::invalid_argument);
}

TEST_CASE("msscs at theta 0 is the maximal superposition") {
  const DickeVector ghz = msscs(SpinLength(4), 0.0);
  CHECK(std::abs(ghz[0]) == Catch::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-14));
  CHECK(std::abs(ghz[4]) == Catch::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-14));
  for (int i = 1; i < 4; ++i) CHECK(std::abs(ghz[i]) < 1e-15);
}

TEST_CASE("msscs normalization approaches 1/sqrt(2)") {
  const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
  for (const int n : {100, 400}) {
    const SpinLength spin(n);
    for (const double theta : {0.0, kPi / 8.0, kPi / 4.0, 7.0 * kPi / 20.0}) {
      CHECK(std::abs(msscs_normalization(spin, theta) - inv_sqrt2) < 1e-3);
    }
  }
  // widest angle at the smallest N has the largest residual branch overlap
  CHECK(std::abs(msscs_normalization(SpinLength(40), 7.0 * kPi / 20.0) - inv_sqrt2) < 4e-3);
  // exact relation against the branch overlap
  const SpinLength spin(40);
  const double theta = kPi / 4.0;
  const double expected = 1.0 / std::sqrt(2.0 * (1.0 + scs_overlap(spin, theta)));
  CHECK(msscs_normalization(spin, theta) == Catch::Approx(expected).epsilon(1e-10));
}

TEST_CASE("scs_overlap equals the direct inner product of the two branches") {
  for (const int n : {8, 20, 40}) {
    const SpinLength spin(n);
    for (const double theta : {0.3, kPi / 4.0, 1.2}) {
      const DickeVector a = scs(spin, theta);
      const DickeVector b = scs(spin, kPi - theta);
      const double direct = (a.adjoint() * b).value().real();
      CHECK(scs_overlap(spin, theta) == Catch::Approx(direct).margin(1e-13));
    }
  }
  CHECK(scs_overlap(SpinLength(8), 0.0) == 0.0);
}

TEST_CASE("cat_state applies the azimuth to the symmetric superposition") {
  const CatSpec spec{8, kPi / 8.0, 0.4};
  const DickeVector with_azimuth = cat_state(spec);
  const DickeVector base = msscs(SpinLength(8), kPi / 8.0);
  for (int i = 0; i <= 8; ++i) {
    const Complex expected = base[i] * std::exp(Complex(0.0, -i * 0.4));
    CHECK(std::abs(with_azimuth[i] - expected) < 1e-14);
  }
}

TEST_CASE("cat_threshold frozen values and defining identity") {
  CHECK(cat_threshold(SpinLength(40)) == Catch::Approx(1.099950626214812).epsilon(1e-12));
  CHECK(cat_threshold(SpinLength(100)) == Catch::Approx(1.2282230961635476).epsilon(1e-12));
  CHECK(cat_threshold(SpinLength(400)) == Catch::Approx(1.3706271429271035).epsilon(1e-12));
  CHECK(cat_threshold(SpinLength(1000)) == Catch::Approx(1.4335901905694894).epsilon(1e-12));
  CHECK_THROWS_AS(cat_threshold(SpinLength(2)), std::invalid_argument);

  // at the threshold angle the central amplitude obeys 2 |c_0|^2 J^2 = 1
  for (const int n : {40, 100, 400}) {
    const SpinLength spin(n);
    const double thc = cat_threshold(spin);
    const Eigen::VectorXd c = detail::scs_coefficients(spin, thc);
    const double j = spin.j();
    const double central = c[n / 2];
    CHECK(2.0 * central * central * j * j == Catch::Approx(1.0).epsilon(1e-10));
  }

  // monotone in N: larger spins tolerate wider angles
  CHECK(cat_threshold(SpinLength(40)) < cat_threshold(SpinLength(100)));
  CHECK(cat_threshold(SpinLength(100)) < cat_threshold(SpinLength(1000)));
}

TEST_CASE("mbar both modes") {
  const SpinLength spin(100);
  for (const double theta : {0.0, kPi / 8.0, kPi / 4.0, 7.0 * kPi / 20.0}) {
    CHECK(mbar(spin, theta, MbarMode::approx) == Catch::Approx(50.0 * std::cos(theta)).epsilon(1e-13));
  }
  CHECK(mbar(spin, 0.0, MbarMode::exact) == Catch::Approx(51.0).epsilon(1e-13));
  // the exact lobe location exceeds the leading-order one by at most one unit
  for (const double theta : {kPi / 8.0, kPi / 4.0, 7.0 * kPi / 20.0}) {
    const double gap = mbar(spin, theta, MbarMode::exact) - mbar(spin, theta, MbarMode::approx);
    CHECK(gap > 0.0);
    CHECK(gap <= 1.0 + 1e-12);
  }
  CHECK_THROWS_AS(mbar(spin, kHalfPi, MbarMode::exact), std::invalid_argument);
}

TEST_CASE("c_coefficient closed form") {
  const SpinLength spin(100);
  CHECK(c_coefficient(spin, 0.0) == Catch::Approx(1.0));
  CHECK(c_coefficient(spin, kPi / 4.0) == Catch::Approx(std::sqrt(2.0)).epsilon(1e-13));
  for (const double theta : {kPi / 8.0, kPi / 4.0, 7.0 * kPi / 20.0}) {
    CHECK(c_coefficient(spin, theta) == Catch::Approx(1.0 / std::cos(theta)).epsilon(1e-13));
  }
  CHECK_THROWS_AS(c_coefficient(spin, kHalfPi), std::invalid_argument);
}
