#include <doctest.h>

#include "mmsched/projection.hpp"
#include "mmsched/random.hpp"
#include "oracles.hpp"

using namespace mmsched;

namespace {

RVector vec(std::initializer_list<double> values) {
  RVector v(static_cast<Eigen::Index>(values.size()));
  Eigen::Index i = 0;
  for (double x : values) v(i++) = x;
  return v;
}

RVector random_vector(Rng& rng, Eigen::Index m, double lo, double hi) {
  RVector v(m);
  for (Eigen::Index i = 0; i < m; ++i) v(i) = rng.uniform(lo, hi);
  return v;
}

BoxSimplexSpec random_spec(Rng& rng, Eigen::Index m) {
  const double a = rng.uniform(0.0, static_cast<double>(m));
  const double b = rng.uniform(0.0, static_cast<double>(m));
  return {std::min(a, b), std::max(a, b)};
}

}  // namespace

TEST_CASE("project_box_simplex examples") {
  CHECK(project_box_simplex(vec({0.5, 0.5}), {0.0, 2.0}) == vec({0.5, 0.5}));
  CHECK(project_box_simplex(vec({2.0, -1.0}), {0.0, 2.0}) == vec({1.0, 0.0}));
  CHECK((project_box_simplex(vec({0.9, 0.5, 0.1}), {1.0, 1.0}) - vec({0.7, 0.3, 0.0}))
            .cwiseAbs()
            .maxCoeff() < 1e-15);
  CHECK((project_box_simplex(vec({1.0, 1.0, 1.0}), {1.0, 1.0}) - RVector::Constant(3, 1.0 / 3.0))
            .cwiseAbs()
            .maxCoeff() < 1e-15);
  // Lower bound active.
  CHECK((project_box_simplex(vec({-0.5, 0.1}), {1.0, 2.0}) - vec({0.2, 0.8})).norm() < 1e-15);
  // Sum bound 0 forces everything to zero.
  CHECK(project_box_simplex(vec({0.3, 0.9}), {0.0, 0.0}) == vec({0.0, 0.0}));
}

TEST_CASE("project_box_simplex errors") {
  CHECK_THROWS_AS(project_box_simplex(vec({0.5, 0.5}), {1.5, 1.0}), InvalidArgument);
  CHECK_THROWS_AS(project_box_simplex(vec({0.5, 0.5}), {3.0, 3.0}), InvalidArgument);
  CHECK_THROWS_AS(project_box_simplex(vec({0.5, NAN}), {0.0, 1.0}), InvalidArgument);
}

TEST_CASE("project_box_simplex properties") {
  Rng rng(2024);
  for (int trial = 0; trial < 1000; ++trial) {
    const Eigen::Index m = 2 + static_cast<Eigen::Index>(rng.below(7));
    const BoxSimplexSpec spec = random_spec(rng, m);
    const RVector q = random_vector(rng, m, -1.5, 2.5);
    const RVector p = project_box_simplex(q, spec);

    CHECK((p.array() >= 0.0).all());
    CHECK((p.array() <= 1.0).all());
    CHECK(p.sum() >= spec.l_min - 1e-12);
    CHECK(p.sum() <= spec.l_max + 1e-12);

    CHECK((project_box_simplex(p, spec) - p).cwiseAbs().maxCoeff() < 1e-12);

    const RVector q2 = random_vector(rng, m, -1.5, 2.5);
    CHECK((project_box_simplex(q2, spec) - p).norm() <= (q2 - q).norm() + 1e-12);

    CHECK((oracle::box_simplex_naive(q, spec.l_min, spec.l_max) - p).cwiseAbs().maxCoeff() <
          1e-12);
    if (m <= 5) {
      CHECK((oracle::box_simplex_qp(q, spec.l_min, spec.l_max) - p).cwiseAbs().maxCoeff() < 1e-9);
    }
  }
}

TEST_CASE("prox_psi and prox_xi") {
  const SchedulingConstraints k{3, 1, 1, 1, 0, 1};
  RMatrix z(3, 1);
  z << 0.9, 0.5, 0.1;
  SUBCASE("blend projected column-wise") {
    const RMatrix out = prox_psi(z, z, 1.0, k);
    CHECK((out.col(0) - vec({0.7, 0.3, 0.0})).cwiseAbs().maxCoeff() < 1e-15);
  }
  SUBCASE("beta zero projects G alone") {
    const RMatrix g = RMatrix::Constant(3, 1, 1.0);
    const RMatrix out = prox_psi(g, z, 0.0, k);
    CHECK((out.array() - 1.0 / 3.0).abs().maxCoeff() < 1e-15);
  }
  SUBCASE("feasible point is a fixed point") {
    RMatrix f(3, 1);
    f << 0.2, 0.3, 0.5;
    for (double beta : {0.0, 0.5, 2.0}) CHECK((prox_psi(f, f, beta, k) - f).norm() < 1e-15);
  }
  SUBCASE("prox_xi works on rows") {
    const SchedulingConstraints rows{2, 3, 0, 2, 1, 1};
    RMatrix x(2, 3);
    x << 0.9, 0.5, 0.1, 1.0, 1.0, 1.0;
    const RMatrix out = prox_xi(x, x, 1.0, rows);
    CHECK((out.row(0).transpose() - vec({0.7, 0.3, 0.0})).cwiseAbs().maxCoeff() < 1e-15);
    CHECK((out.row(1).array() - 1.0 / 3.0).abs().maxCoeff() < 1e-15);
  }
  SUBCASE("negative beta") {
    CHECK_THROWS_AS(prox_psi(z, z, -1.0, k), InvalidArgument);
    CHECK_THROWS_AS(prox_xi(z, z, -1.0, k), InvalidArgument);
  }
}

TEST_CASE("drs_project") {
  SUBCASE("feasible input is returned") {
    RMatrix z(4, 2);
    z << 1, 0, 0, 1, 0.5, 0.5, 0.5, 0.5;
    const auto r = drs_project(z, SchedulingConstraints::exact(4, 2, 2, 1));
    CHECK((r.v - z).norm() < 1e-6);
    CHECK(r.converged);
  }
  SUBCASE("symmetric split") {
    RMatrix z(2, 1);
    z << 2.0, 2.0;
    const auto r = drs_project(z, SchedulingConstraints{2, 1, 1, 1, 0, 1});
    CHECK((r.v - RMatrix::Constant(2, 1, 0.5)).norm() < 1e-9);
    CHECK((oracle::schedule_projection_qp(z, 1, 1, 0, 1) - r.v).norm() < 1e-9);
  }
  SUBCASE("matches the enumeration QP on U=3, T=2") {
    Rng rng(77);
    for (int trial = 0; trial < 30; ++trial) {
      RMatrix z(3, 2);
      for (Eigen::Index i = 0; i < z.size(); ++i) z.data()[i] = rng.uniform(-0.5, 1.5);
      const SchedulingConstraints k{3, 2, 1, 2, 0, 1};
      const auto r = drs_project(z, k, DrsConfig{1.0, 5000, 1e-12});
      CHECK((r.v - oracle::schedule_projection_qp(z, 1, 2, 0, 1)).norm() < 1e-4);
      CHECK(r.ct_residual <= 1e-4);
    }
  }
  SUBCASE("output always satisfies the column bounds") {
    Rng rng(5);
    for (int trial = 0; trial < 50; ++trial) {
      RMatrix z(4, 3);
      for (Eigen::Index i = 0; i < z.size(); ++i) z.data()[i] = rng.uniform(-1.0, 2.0);
      const auto r = drs_project(z, SchedulingConstraints{4, 3, 1, 3, 1, 2});
      const RVector cols = r.v.colwise().sum().transpose();
      CHECK((cols.array() >= 1.0 - 1e-12).all());
      CHECK((cols.array() <= 3.0 + 1e-12).all());
      CHECK((r.v.array() >= 0.0).all());
      CHECK((r.v.array() <= 1.0).all());
      CHECK(r.iterations >= 1);
      CHECK(r.iterations <= 50);
    }
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(drs_project(RMatrix::Zero(3, 2), SchedulingConstraints::exact(4, 2, 2, 1)),
                    InvalidArgument);
    CHECK_THROWS_AS(drs_project(RMatrix::Zero(4, 2), SchedulingConstraints::exact(4, 2, 2, 1),
                                DrsConfig{1.0, 0, 1e-6}),
                    InvalidArgument);
    CHECK_THROWS_AS(drs_project(RMatrix::Zero(4, 2), SchedulingConstraints::exact(4, 2, 3, 1)),
                    InvalidArgument);
  }
}
