#include <cmath>
#include <complex>

#include <Eigen/Dense>
#include <doctest.h>

#include "optodtc/error.hpp"
#include "optodtc/integrator.hpp"

using namespace optodtc;
using Vec = Eigen::VectorXd;
using CVec = Eigen::VectorXcd;

TEST_CASE("exponential decay within tolerance") {
  for (double tol : {1e-6, 1e-9, 1e-12}) {
    DormandPrince5<Vec> dp([](double, const Vec& y, Vec& f) { f = -y; }, StepControl{tol, tol});
    dp.reset(0.0, Vec::Ones(1));
    dp.advance(5.0);
    CHECK(dp.time() == 5.0);
    CHECK(std::abs(dp.state()(0) - std::exp(-5.0)) < 50.0 * tol);
  }
}

TEST_CASE("fifth order at fixed steps") {
  const auto error_at = [](double h) {
    StepControl c{1.0, 1.0};
    c.max_step = h;
    c.initial_step = h;
    DormandPrince5<CVec> dp([](double, const CVec& y, CVec& f) { f = std::complex<double>(0, 1) * y; },
                            c);
    dp.reset(0.0, CVec::Ones(1));
    dp.advance(4.0);
    return std::abs(dp.state()(0) - std::exp(std::complex<double>(0.0, 4.0)));
  };
  const double ratio = error_at(0.2) / error_at(0.1);
  CHECK(ratio > 24.0);
  CHECK(ratio < 40.0);
}

TEST_CASE("dense output inside accepted steps") {
  StepControl c{1e-10, 1e-10};
  DormandPrince5<Vec> dp([](double t, const Vec&, Vec& f) { f.resize(1); f(0) = std::cos(t); }, c);
  dp.reset(0.0, Vec::Zero(1));
  double worst = 0.0;
  dp.advance(10.0, [&](const DormandPrince5<Vec>& s) {
    const double tm = 0.5 * (s.step_start() + s.time());
    worst = std::max(worst, std::abs(s.dense(tm)(0) - std::sin(tm)));
  });
  CHECK(worst < 1e-8);
  CHECK(dp.accepted_steps() > 0);
}

TEST_CASE("deterministic for fixed inputs") {
  const auto run = [] {
    DormandPrince5<Vec> dp([](double, const Vec& y, Vec& f) { f = Vec(2); f << y(1), -y(0); },
                           StepControl{1e-9, 1e-9});
    Vec y0(2);
    y0 << 1.0, 0.0;
    dp.reset(0.0, y0);
    dp.advance(30.0);
    return dp.state();
  };
  CHECK((run() - run()).norm() == 0.0);
}

TEST_CASE("non-finite state reports the last good time") {
  DormandPrince5<Vec> dp(
      [](double t, const Vec& y, Vec& f) {
        f = y;
        if (t > 1.0) f(0) = std::nan("");
      },
      StepControl{1e-8, 1e-8});
  dp.reset(0.0, Vec::Ones(1));
  try {
    dp.advance(3.0);
    FAIL("expected a numerical failure");
  } catch (const NumericalFailure& e) {
    CHECK(e.last_good_time() <= 1.0 + 1e-12);
    CHECK(e.last_good_time() > 0.5);
  }
}

TEST_CASE("finite-time blow-up is reported") {
  DormandPrince5<Vec> dp([](double, const Vec& y, Vec& f) { f = y.cwiseAbs2(); },
                         StepControl{1e-10, 1e-10});
  dp.reset(0.0, Vec::Ones(1));
  CHECK_THROWS_AS(dp.advance(2.0), NumericalFailure);
}

TEST_CASE("invalid controls are rejected") {
  CHECK_THROWS_AS(StepControl({0.0, 1e-6}).validate(), InvalidArgument);
  StepControl c;
  c.max_step = 0.0;
  CHECK_THROWS_AS(c.validate(), InvalidArgument);
}
