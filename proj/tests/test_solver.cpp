#include <cmath>

#include "doctest.h"
#include "losvm/solver.hpp"
#include "oracles.hpp"

using namespace losvm;

namespace {

DataMatrix points_1d(std::initializer_list<double> xs) {
  DataMatrix m;
  m.points.resize(static_cast<Eigen::Index>(xs.size()), 1);
  Eigen::Index r = 0;
  for (double x : xs) m.points(r++, 0) = x;
  m.ids.resize(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) m.ids[i] = static_cast<std::int64_t>(i);
  return m;
}

// Oracle gradient of the half-scaled dual: K a - p / 2.
Eigen::VectorXd oracle_gradient(const Eigen::MatrixXd& K, const Eigen::VectorXd& alpha, Variant v) {
  Eigen::VectorXd g = K * alpha;
  if (v == Variant::svdd) g -= 0.5 * K.diagonal();
  return g;
}

double oracle_objective(const Eigen::MatrixXd& K, const Eigen::VectorXd& alpha, Variant v) {
  const double quad = alpha.dot(K * alpha);
  return v == Variant::ocsvm ? 0.5 * quad : quad - K.diagonal().dot(alpha);
}

}  // namespace

TEST_SUITE("solver") {
  TEST_CASE("single point takes all the mass") {
    const auto m = points_1d({3.0});
    for (auto v : {Variant::ocsvm, Variant::svdd}) {
      KernelContext ctx(m, Kernel::rbf(1.0));
      const auto model = train(ctx, v, 1.0);
      CHECK(model.alpha[0] == 1.0);
      CHECK(model.converged);
    }
  }

  TEST_CASE("two exchangeable points split evenly") {
    const auto m = points_1d({-0.4, 0.4});
    for (auto v : {Variant::ocsvm, Variant::svdd}) {
      for (double C : {1.0, 2.0}) {
        KernelContext ctx(m, Kernel::rbf(2.0));
        const auto model = train(ctx, v, C);
        CHECK(model.alpha[0] == doctest::Approx(0.5).epsilon(1e-12));
        CHECK(model.alpha[1] == doctest::Approx(0.5).epsilon(1e-12));
      }
    }
  }

  TEST_CASE("svdd with a linear kernel on {0, 1}") {
    // minimise a2^2 - a2 with a1 + a2 = 1: a2 = 1/2, centre 0.5
    const auto m = points_1d({0.0, 1.0});
    KernelContext ctx(m, Kernel::linear());
    SolverOptions opts;
    opts.eps = 1e-12;
    const auto model = train(ctx, Variant::svdd, 1.0, opts);
    CHECK(model.alpha[0] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(model.alpha[1] == doctest::Approx(0.5).epsilon(1e-12));
    const double centre = model.alpha[0] * 0.0 + model.alpha[1] * 1.0;
    CHECK(centre == doctest::Approx(0.5));
    // R^2 = 0.25 in input space; both points on the sphere
    CHECK(model.radius_sq == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(decision_score(model, ctx, ctx.point(0)) == doctest::Approx(0.0).epsilon(1e-12));
    Eigen::RowVectorXd far(1);
    far << 3.0;
    CHECK(decision_score(model, ctx, far) == doctest::Approx(6.25 - 0.25).epsilon(1e-12));
  }

  TEST_CASE("select_violating_pair") {
    SvmModel m;
    m.C = 1.0;
    m.active_size = 3;
    m.alpha = Eigen::Vector3d(0.5, 0.5, 0.0);
    m.gradient = Eigen::Vector3d(3.0, 1.0, 0.0);
    const auto pair = select_violating_pair(m, 1e-4);
    REQUIRE(pair);
    CHECK(pair->first == 0);
    CHECK(pair->second == 2);
    CHECK(kkt_gap(m) == 3.0);

    m.gradient.setConstant(0.7);
    CHECK_FALSE(select_violating_pair(m, 1e-4));
    CHECK_FALSE(select_violating_pair(m, 1e-4));

    // ties go to the lowest position
    m.alpha = Eigen::Vector3d(0.4, 0.3, 0.3);
    m.gradient = Eigen::Vector3d(2.0, 2.0, 1.0);
    const auto tie = select_violating_pair(m, 1e-4);
    REQUIRE(tie);
    CHECK(tie->first == 0);
    m.gradient = Eigen::Vector3d(2.0, 1.0, 1.0);
    CHECK(select_violating_pair(m, 1e-4)->second == 1);
  }

  TEST_CASE("smo_step clipped to zero leaves the state alone") {
    const auto data = oracle::random_instance(4, 5, 2);
    KernelContext ctx(data, Kernel::rbf(1.0));
    SvmModel m;
    m.variant = Variant::svdd;
    m.C = 1.0;
    m.active_size = 5;
    m.alpha = Eigen::VectorXd::Zero(5);
    m.alpha[1] = 1.0;
    m.gradient = full_gradient(m, ctx);
    const SvmModel before = m;
    // alpha_0 = 0 has nothing to give; alpha_1 = C cannot take more
    CHECK_FALSE(smo_step(m, ctx, 0, 1));
    CHECK(m.alpha == before.alpha);
    CHECK(m.gradient == before.gradient);
  }

  TEST_CASE("smo steps conserve the sum, stay feasible and never increase the objective") {
    for (std::uint64_t seed = 1; seed <= 15; ++seed) {
      const auto data = oracle::random_instance(seed, 20, 3);
      const double gamma = 0.8;
      const Eigen::MatrixXd K = oracle::rbf_matrix(data.points, gamma);
      for (auto v : {Variant::ocsvm, Variant::svdd}) {
        KernelContext ctx(data, Kernel::rbf(gamma));
        SvmModel m;
        m.variant = v;
        m.C = seed % 2 ? 1.0 : 0.09;
        m.active_size = 20;
        m.alpha = Eigen::VectorXd::Constant(20, 0.05);
        m.gradient = full_gradient(m, ctx);
        double prev = oracle_objective(K, m.alpha, v);
        for (int step = 0; step < 200; ++step) {
          const auto pair = select_violating_pair(m, 1e-9);
          if (!pair) break;
          const double sum_before = m.alpha.sum();
          smo_step(m, ctx, pair->first, pair->second);
          CHECK(std::abs(m.alpha.sum() - sum_before) <= 4e-16);
          CHECK(m.alpha.minCoeff() >= 0.0);
          CHECK(m.alpha.maxCoeff() <= m.C);
          const double obj = oracle_objective(K, m.alpha, v);
          CHECK(obj <= prev + 1e-15);
          prev = obj;
          CHECK((m.gradient - oracle_gradient(K, m.alpha, v)).cwiseAbs().maxCoeff() <= 1e-10);
        }
      }
    }
  }

  TEST_CASE("update_gradient matches recomputation") {
    const auto data = oracle::random_instance(21, 20, 2);
    const Eigen::MatrixXd K = oracle::rbf_matrix(data.points, 1.1);
    KernelContext ctx(data, Kernel::rbf(1.1));
    SvmModel m;
    m.variant = Variant::svdd;
    m.C = 1.0;
    m.active_size = 20;
    m.alpha = Eigen::VectorXd::Constant(20, 0.05);
    m.gradient = full_gradient(m, ctx);

    const Eigen::VectorXd g0 = m.gradient;
    update_gradient(m, ctx, 3, 7, 0.05, 0.05, 0.05, 0.05);
    CHECK(m.gradient == g0);

    SplitMix64 rng(5);
    for (int trial = 0; trial < 50; ++trial) {
      const auto i = static_cast<std::size_t>(rng.next() % 20);
      auto k = static_cast<std::size_t>(rng.next() % 20);
      if (k == i) k = (k + 1) % 20;
      const double oi = m.alpha[static_cast<Eigen::Index>(i)];
      const double ok = m.alpha[static_cast<Eigen::Index>(k)];
      const double d = rng.uniform() * oi;
      m.alpha[static_cast<Eigen::Index>(i)] = oi - d;
      m.alpha[static_cast<Eigen::Index>(k)] = ok + d;
      update_gradient(m, ctx, i, k, oi, oi - d, ok, ok + d);
      CHECK((m.gradient - oracle_gradient(K, m.alpha, Variant::svdd)).cwiseAbs().maxCoeff() <= 1e-10);
    }

    // two successive updates equal one combined recomputation
    SvmModel a = m;
    const auto set = [&](SvmModel& s, std::size_t i, std::size_t k, double d) {
      const double oi = s.alpha[static_cast<Eigen::Index>(i)];
      const double ok = s.alpha[static_cast<Eigen::Index>(k)];
      s.alpha[static_cast<Eigen::Index>(i)] -= d;
      s.alpha[static_cast<Eigen::Index>(k)] += d;
      update_gradient(s, ctx, i, k, oi, oi - d, ok, ok + d);
    };
    set(a, 2, 9, 0.01);
    set(a, 9, 14, 0.02);
    CHECK((a.gradient - full_gradient(a, ctx)).cwiseAbs().maxCoeff() <= 1e-12);
  }

  TEST_CASE("converged model satisfies the KKT and feasibility invariants") {
    for (std::uint64_t seed = 30; seed < 40; ++seed) {
      const auto data = oracle::random_instance(seed, 35, 2);
      KernelContext ctx(data, Kernel::rbf(gamma_silverman(35, 2, 1.0)));
      for (auto v : {Variant::ocsvm, Variant::svdd}) {
        const double C = seed % 2 ? 1.0 : 1.0 / (0.2 * 35);
        const auto m = train(ctx, v, C);
        CHECK(std::abs(m.alpha_sum() - 1.0) <= 1e-9);
        CHECK(m.alpha.minCoeff() >= 0.0);
        CHECK(m.alpha.maxCoeff() <= C);
        CHECK(kkt_gap(m) <= 1e-4);
        CHECK((m.gradient - full_gradient(m, ctx)).cwiseAbs().maxCoeff() <= 1e-10);
      }
    }
  }

  TEST_CASE("free support vectors lie on the boundary") {
    const auto data = oracle::random_instance(77, 30, 2);
    KernelContext ctx(data, Kernel::rbf(1.5));
    SolverOptions tight;
    tight.eps = 1e-12;
    for (auto v : {Variant::ocsvm, Variant::svdd}) {
      const auto m = train(ctx, v, 1.0 / (0.3 * 30), tight);
      int free_svs = 0;
      for (std::size_t i = 0; i < 30; ++i) {
        const double a = m.alpha[static_cast<Eigen::Index>(i)];
        if (a > 0.0 && a < m.C) {
          ++free_svs;
          CHECK(std::abs(decision_score(m, ctx, ctx.point(i))) <= 1e-8);
        } else if (a == 0.0) {
          CHECK(decision_score(m, ctx, ctx.point(i)) <= 1e-8);
        } else {
          CHECK(decision_score(m, ctx, ctx.point(i)) >= -1e-8);
        }
      }
      CHECK(free_svs > 0);
    }
  }

  TEST_CASE("ocsvm symmetric two-point model") {
    const auto data = points_1d({-0.5, 0.5});
    KernelContext ctx(data, Kernel::rbf(1.0));
    const auto m = train(ctx, Variant::ocsvm, 1.0);
    const double k12 = std::exp(-1.0);
    CHECK(m.bias == doctest::Approx(0.5 * (1.0 + k12)).epsilon(1e-12));
    CHECK(std::abs(decision_score(m, ctx, ctx.point(0))) <= 1e-12);
    CHECK(std::abs(decision_score(m, ctx, ctx.point(1))) <= 1e-12);
    Eigen::RowVectorXd far(1);
    far << 40.0;
    const double s = decision_score(m, ctx, far);
    CHECK(s > 0.0);
    CHECK(s == doctest::Approx(m.bias).epsilon(1e-12));
  }

  TEST_CASE("converged objective matches the brute-force QP") {
    int checked = 0;
    for (std::uint64_t seed = 100; seed < 130; ++seed) {
      const std::size_t n = 2 + seed % 7;
      const auto data = oracle::random_instance(seed, n, 2);
      const double gamma = 0.3 + 0.1 * static_cast<double>(seed % 10);
      const Eigen::MatrixXd K = oracle::rbf_matrix(data.points, gamma);
      for (auto v : {Variant::ocsvm, Variant::svdd}) {
        const double C = seed % 3 == 0 ? 1.0 / (0.5 * static_cast<double>(n)) : 1.0;
        const Eigen::VectorXd p = v == Variant::svdd ? Eigen::VectorXd(K.diagonal()) : Eigen::VectorXd::Zero(K.rows());
        const Eigen::VectorXd best = oracle::brute_force_qp(K, p, C);
        KernelContext ctx(data, Kernel::rbf(gamma));
        SolverOptions opts;
        opts.eps = 1e-8;
        const auto m = train(ctx, v, C, opts);
        CHECK(std::abs(dual_objective(m, ctx) - oracle_objective(K, best, v)) <= 1e-5);
        ++checked;
      }
    }
    CHECK(checked == 60);
  }

  TEST_CASE("ocsvm and svdd rank points identically under rbf") {
    for (std::uint64_t seed = 200; seed < 205; ++seed) {
      const auto data = oracle::random_instance(seed, 40, 2);
      KernelContext ctx(data, Kernel::rbf(2.0));
      SolverOptions opts;
      opts.eps = 1e-10;
      const auto oc = train(ctx, Variant::ocsvm, 1.0 / (0.1 * 40), opts);
      const auto sd = train(ctx, Variant::svdd, 1.0 / (0.1 * 40), opts);
      std::vector<double> s_oc, s_sd;
      for (std::size_t i = 0; i < 40; ++i) {
        s_oc.push_back(decision_score(oc, ctx, ctx.point(i)));
        s_sd.push_back(decision_score(sd, ctx, ctx.point(i)));
      }
      for (std::size_t i = 0; i < 40; ++i)
        for (std::size_t j = 0; j < 40; ++j)
          if (s_oc[i] < s_oc[j] - 1e-9) CHECK(s_sd[i] < s_sd[j]);
    }
  }

  TEST_CASE("error paths") {
    const auto data = oracle::random_instance(1, 10, 2);
    KernelContext ctx(data, Kernel::rbf(1.0));
    CHECK_THROWS_AS(train(ctx, Variant::svdd, 0.05), std::invalid_argument);
    SolverOptions zero;
    zero.eps = 0.0;
    CHECK_THROWS_AS(train(ctx, Variant::svdd, 1.0, zero), std::invalid_argument);
    SolverOptions starved;
    starved.max_iter = 1;
    try {
      train(ctx, Variant::svdd, 1.0, starved);
      FAIL("expected ConvergenceError");
    } catch (const ConvergenceError& e) {
      CHECK(e.gap() > 1e-4);
      CHECK(e.iterations() == 1);
    }
    SvmModel unconverged;
    CHECK_THROWS_AS(decision_score(unconverged, ctx, ctx.point(0)), std::logic_error);
    CHECK_THROWS_AS(parse_variant("svm"), std::invalid_argument);
  }
}
