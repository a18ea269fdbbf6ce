#include <doctest.h>

#include <cmath>
#include <random>

#include "avgctl/fields.hpp"
#include "support/oracles.hpp"

using namespace avgctl;

namespace {

DomainBox box1(double lo, double hi, int samples = 0) {
  return DomainBox{{lo}, {hi}, {-1.0}, {1.0}, samples};
}

VectorField constant_field(double c) {
  return VectorField("const", 1, 1,
                     [c](auto, auto, std::span<double> out) { out[0] = c; });
}

VectorField linear_field(double k) {
  return VectorField("linear", 1, 1, [k](auto x, auto, std::span<double> out) {
    out[0] = k * x[0];
  });
}

}  // namespace

TEST_SUITE("fields") {

TEST_CASE("box validation and default sample counts") {
  CHECK_NOTHROW(box1(-1, 1).validate());
  CHECK_THROWS(box1(1, 1).validate());
  CHECK_THROWS(box1(-1, 1, 1).validate());
  CHECK(default_samples_per_dim(2) == 201);
  CHECK(default_samples_per_dim(3) == 41);
  CHECK(default_samples_per_dim(5) == 21);
  CHECK(box1(-1, 1).resolved_samples() == 201);
}

TEST_CASE("sample grid hits corners exactly") {
  DomainBox b{{-1.0, 2.0}, {3.0, 5.0}, {0.0}, {1.0}, 7};
  int corners = 0, total = 0;
  for_each_box_sample(b, [&](auto x, auto u) {
    ++total;
    const bool cx0 = (x[0] == -1.0 || x[0] == 3.0);
    const bool cx1 = (x[1] == 2.0 || x[1] == 5.0);
    const bool cu = (u[0] == 0.0 || u[0] == 1.0);
    if (cx0 && cx1 && cu) ++corners;
  });
  CHECK(total == 7 * 7 * 7);
  CHECK(corners == 8);
}

TEST_CASE("sup_distance closed forms for the scalar family") {
  const auto f1 = scalar_lambda_sin_field(0.0);
  const auto f2 = scalar_lambda_sin_field(1.0);
  const auto f4 = scalar_lambda_sin_field(0.5);
  const auto b = box1(-1, 1);
  CHECK(sup_distance(f1, f1, b) == 0.0);
  // |f2 - f1| = |x|, |f4 - f1| = |x| / 2
  CHECK(sup_distance(f2, f1, b) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(sup_distance(f4, f1, b) == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("sup_distance is a pseudometric on a fixed grid") {
  std::mt19937_64 rng(7);
  const DomainBox b{{-1.0, -1.0}, {1.0, 1.0}, {-1.0}, {1.0}, 9};
  for (int trial = 0; trial < 20; ++trial) {
    const auto f = oracle::random_affine(rng, 2, 1);
    const auto g = oracle::random_affine(rng, 2, 1);
    const auto h = oracle::random_affine(rng, 2, 1);
    const double fg = sup_distance(f, g, b);
    CHECK(fg == sup_distance(g, f, b));
    CHECK(sup_distance(f, f, b) == 0.0);
    CHECK(fg <= sup_distance(f, h, b) + sup_distance(h, g, b) + 1e-14);
  }
}

TEST_CASE("affine sup_distance equals the corner maximum") {
  std::mt19937_64 rng(11);
  const DomainBox b{{-2.0, -1.0}, {1.0, 3.0}, {-1.0}, {0.5}, 13};
  for (int trial = 0; trial < 10; ++trial) {
    const auto f = oracle::random_affine(rng, 2, 1);
    const auto g = oracle::random_affine(rng, 2, 1);
    double corner = 0.0;
    for (double x0 : {-2.0, 1.0})
      for (double x1 : {-1.0, 3.0})
        for (double u : {-1.0, 0.5}) {
          const double x[2] = {x0, x1};
          const double uu[1] = {u};
          const auto a = f(x, uu);
          const auto c = g(x, uu);
          const double d0 = a[0] - c[0], d1 = a[1] - c[1];
          corner = std::max(corner, std::sqrt(d0 * d0 + d1 * d1));
        }
    CHECK(sup_distance(f, g, b) == corner);
  }
}

TEST_CASE("sup_distance is monotone under nested refinement") {
  const auto f = scalar_lambda_sin_field(0.3);
  const VectorField g("g", 1, 1, [](auto x, auto u, std::span<double> out) {
    out[0] = std::cos(3.0 * x[0]) + u[0] * u[0];
  });
  double prev = 0.0;
  for (int s : {3, 5, 9, 17, 33}) {
    const double d = sup_distance(f, g, box1(-2, 2, s));
    CHECK(d >= prev);
    prev = d;
  }
}

TEST_CASE("dimension mismatch and non-finite values are errors") {
  const auto f = scalar_lambda_sin_field(0.0);
  const auto g = affine_polar_field("A", {1, 0, 0, 1});
  CHECK_THROWS_AS(sup_distance(f, g, box1(-1, 1)), DimensionError);
  const VectorField bad("bad", 1, 1, [](auto x, auto, std::span<double> out) {
    out[0] = 1.0 / x[0];
  });
  CHECK_THROWS_AS(sup_distance(bad, f, box1(-1, 1, 5)), NonFiniteError);
}

TEST_CASE("estimate_lipschitz examples") {
  CHECK(estimate_lipschitz(constant_field(3.0), box1(-1, 1)) == 0.0);
  CHECK(estimate_lipschitz(linear_field(2.0), box1(-1, 1)) ==
        doctest::Approx(2.0).epsilon(1e-12));
  const double l = estimate_lipschitz(scalar_lambda_sin_field(1.0), box1(-1, 1));
  CHECK(l <= 2.0);
  CHECK(l >= 2.0 * (1.0 - 1e-4));
}

TEST_CASE("estimates never exceed declarations") {
  std::mt19937_64 rng(3);
  const DomainBox b{{-2.0, -2.0}, {2.0, 2.0}, {0.0}, {6.283185307179586}, 15};
  for (int trial = 0; trial < 10; ++trial) {
    const auto f = oracle::random_affine(rng, 2, 1, 2.0);
    REQUIRE(f.lipschitz_x());
    CHECK(estimate_lipschitz(f, b) <= *f.lipschitz_x() * (1.0 + 1e-9));
    CHECK_NOTHROW(validate_field(f, b));
  }
  for (double lambda : {0.0, 1.0, -1.0, 0.5, -0.5}) {
    const auto f = scalar_lambda_sin_field(lambda);
    CHECK(*f.lipschitz_x() == std::abs(lambda) + 1.0);
    CHECK_NOTHROW(validate_field(f, box1(-6, 6)));
  }
  const VectorField liar("liar", 1, 1,
                         [](auto x, auto, std::span<double> out) {
                           out[0] = 3.0 * x[0];
                         },
                         1.0);
  CHECK_THROWS(validate_field(liar, box1(-1, 1)));
}

TEST_CASE("spectral norm of the test matrices") {
  const double i2[4] = {1, 0, 0, 1};
  const double d2[4] = {0.5, 0, 0, 2};
  const double rot[4] = {0.5, -0.5, 0.5, 0.5};
  CHECK(spectral_norm(i2, 2) == doctest::Approx(1.0));
  CHECK(spectral_norm(d2, 2) == doctest::Approx(2.0));
  CHECK(spectral_norm(rot, 2) == doctest::Approx(std::sqrt(0.5)));
}

TEST_CASE("analytic Jacobians agree with finite differences") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<VectorField> fields{scalar_lambda_sin_field(-0.5),
                                  affine_polar_field("A3", {0.5, -0.5, 0.5, 0.5}),
                                  oracle::random_affine(rng, 3, 2)};
  for (const auto& f : fields) {
    const int n = f.state_dim(), m = f.control_dim();
    std::vector<double> x(n), uu(m);
    for (auto& v : x) v = u(rng);
    for (auto& v : uu) v = u(rng);
    std::vector<double> ax(n * n), au(n * m), fx(n * n), fu(n * m);
    f.jacobian(x, uu, ax, au);
    f.without_jacobian().jacobian(x, uu, fx, fu);
    CHECK(oracle::relative_error(ax, fx) < 1e-7);
    CHECK(oracle::relative_error(au, fu) < 1e-7);
  }
}

}  // TEST_SUITE
