#pragma once

// Adaptive Dormand-Prince 5(4) integrator with the 4th-order continuous
// extension of Hairer, Norsett & Wanner. The state is any Eigen dense type
// (fixed-size vectors for mean-field models, dynamic matrices for density
// matrices); the error norm is the scaled RMS over all coefficients.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <sstream>
#include <type_traits>

#include <Eigen/Dense>

#include "optodtc/error.hpp"

namespace optodtc {

struct StepControl {
  double abs_tol = 1e-10;
  double rel_tol = 1e-10;
  double max_step = std::numeric_limits<double>::infinity();
  double initial_step = 0.0;  ///< 0 selects the step automatically
  double min_step = 1e-14;    ///< relative to max(1, |t|)
  long max_steps = 1'000'000'000L;

  void validate() const {
    require(abs_tol > 0.0 && rel_tol > 0.0, "integrator tolerances must be positive");
    require(max_step > 0.0, "max_step must be positive");
    require(initial_step >= 0.0, "initial_step must be non-negative");
  }
};

template <class State>
class DormandPrince5 {
 public:
  using Rhs = std::function<void(double t, const State& y, State& dydt)>;

  DormandPrince5(Rhs rhs, StepControl control) : rhs_(std::move(rhs)), ctl_(control) {
    ctl_.validate();
  }

  /// Start (or restart) at (t0, y0); the step-size history is discarded.
  void reset(double t0, const State& y0) {
    t_ = t0;
    t_old_ = t0;
    y_ = y0;
    y_old_ = y0;
    resize_like(y0);
    rhs_(t_, y_, k1_);
    ++n_rhs_;
    h_ = ctl_.initial_step > 0.0 ? ctl_.initial_step : 0.0;
    fac_old_ = 1e-4;
    last_rejected_ = false;
    check_finite(y_, t_);
  }

  /// Integrate to exactly t_end, invoking on_step(*this) after every accepted
  /// step (dense output is then valid on [step_start(), time()]). A callback
  /// returning bool stops the integration early by returning false.
  template <class OnStep>
  void advance(double t_end, OnStep&& on_step) {
    if (!(t_end > t_)) return;
    if (h_ <= 0.0) h_ = initial_step_guess(t_end - t_);
    long steps = 0;
    while (t_ < t_end) {
      if (++steps > ctl_.max_steps) {
        throw NumericalFailure("integrator exceeded max_steps", t_);
      }
      double h = std::min({h_, ctl_.max_step, t_end - t_});
      const bool hits_end = (t_ + h >= t_end) || (t_end - (t_ + h) < 1e-12 * h);
      if (hits_end) h = t_end - t_;
      if (h < ctl_.min_step * std::max(1.0, std::abs(t_))) {
        std::ostringstream msg;
        msg << "step size underflow (h = " << h << ") at t = " << t_;
        throw NumericalFailure(msg.str(), t_);
      }
      const double err = attempt(h);
      if (!std::isfinite(err)) {
        // treat as a failed step; shrink aggressively
        h_ = 0.1 * h;
        last_rejected_ = true;
        ++n_rejected_;
        continue;
      }
      const double fac11 = std::pow(err, kExpo1);
      if (err <= 1.0) {
        double fac = fac11 / std::pow(fac_old_, kBeta) / kSafety;
        fac = std::clamp(fac, 1.0 / kFacMax, 1.0 / kFacMin);
        double h_new = h / fac;
        fac_old_ = std::max(err, 1e-4);
        if (last_rejected_) h_new = std::min(h_new, h);
        last_rejected_ = false;
        t_old_ = t_;
        t_ = hits_end ? t_end : t_ + h;
        h_last_ = h;
        y_old_.swap(y_);
        y_.swap(y_new_);
        k1_old_.swap(k1_);
        k1_.swap(k7_);  // FSAL
        check_finite(y_, t_old_);
        ++n_accepted_;
        h_ = h_new;
        if constexpr (std::is_same_v<std::invoke_result_t<OnStep&, const DormandPrince5&>, bool>) {
          if (!on_step(*this)) return;
        } else {
          on_step(*this);
        }
      } else {
        h_ = h / std::min(1.0 / kFacMin, fac11 / kSafety);
        last_rejected_ = true;
        ++n_rejected_;
      }
    }
  }

  void advance(double t_end) {
    advance(t_end, [](const DormandPrince5&) {});
  }

  double time() const { return t_; }
  double step_start() const { return t_old_; }
  const State& state() const { return y_; }
  long accepted_steps() const { return n_accepted_; }
  long rejected_steps() const { return n_rejected_; }
  long rhs_evaluations() const { return n_rhs_; }

  /// Continuous extension inside the last accepted step.
  State dense(double t) const {
    const double h = h_last_;
    const double theta = (t - t_old_) / h;
    const double theta1 = 1.0 - theta;
    // k1_old_ is f(t_old), k1_ is f(t) (= k7 of the last step)
    State ydiff = y_ - y_old_;
    State bspl = h * k1_old_ - ydiff;
    State rc4 = ydiff - h * k1_ - bspl;
    State rc5 = h * (kD1 * k1_old_ + kD3 * k3_ + kD4 * k4_ + kD5 * k5_ + kD6 * k6_ +
                     kD7 * k1_);
    return y_old_ + theta * (ydiff + theta1 * (bspl + theta * (rc4 + theta1 * rc5)));
  }

 private:
  static constexpr double kSafety = 0.9;
  static constexpr double kFacMin = 0.2;   // largest step increase factor is 1/kFacMin
  static constexpr double kFacMax = 10.0;  // largest step decrease factor
  static constexpr double kBeta = 0.04;
  static constexpr double kExpo1 = 0.2 - kBeta * 0.75;

  static constexpr double c2 = 1.0 / 5.0, c3 = 3.0 / 10.0, c4 = 4.0 / 5.0, c5 = 8.0 / 9.0;
  static constexpr double a21 = 1.0 / 5.0;
  static constexpr double a31 = 3.0 / 40.0, a32 = 9.0 / 40.0;
  static constexpr double a41 = 44.0 / 45.0, a42 = -56.0 / 15.0, a43 = 32.0 / 9.0;
  static constexpr double a51 = 19372.0 / 6561.0, a52 = -25360.0 / 2187.0,
                          a53 = 64448.0 / 6561.0, a54 = -212.0 / 729.0;
  static constexpr double a61 = 9017.0 / 3168.0, a62 = -355.0 / 33.0,
                          a63 = 46732.0 / 5247.0, a64 = 49.0 / 176.0,
                          a65 = -5103.0 / 18656.0;
  static constexpr double a71 = 35.0 / 384.0, a73 = 500.0 / 1113.0, a74 = 125.0 / 192.0,
                          a75 = -2187.0 / 6784.0, a76 = 11.0 / 84.0;
  static constexpr double e1 = 71.0 / 57600.0, e3 = -71.0 / 16695.0, e4 = 71.0 / 1920.0,
                          e5 = -17253.0 / 339200.0, e6 = 22.0 / 525.0, e7 = -1.0 / 40.0;
  static constexpr double kD1 = -12715105075.0 / 11282082432.0,
                          kD3 = 87487479700.0 / 32700410799.0,
                          kD4 = -10690763975.0 / 1880347072.0,
                          kD5 = 701980252875.0 / 199316789632.0,
                          kD6 = -1453857185.0 / 822651844.0,
                          kD7 = 69997945.0 / 29380423.0;

  void resize_like(const State& y) {
    for (State* s : {&k1_, &k2_, &k3_, &k4_, &k5_, &k6_, &k7_, &k1_old_, &y_tmp_, &y_new_}) {
      s->resizeLike(y);
    }
  }

  // One trial step of size h from (t_, y_); fills y_new_, k7_ and returns the
  // scaled error norm.
  double attempt(double h) {
    const double t = t_;
    y_tmp_ = y_ + (h * a21) * k1_;
    rhs_(t + c2 * h, y_tmp_, k2_);
    y_tmp_ = y_ + h * (a31 * k1_ + a32 * k2_);
    rhs_(t + c3 * h, y_tmp_, k3_);
    y_tmp_ = y_ + h * (a41 * k1_ + a42 * k2_ + a43 * k3_);
    rhs_(t + c4 * h, y_tmp_, k4_);
    y_tmp_ = y_ + h * (a51 * k1_ + a52 * k2_ + a53 * k3_ + a54 * k4_);
    rhs_(t + c5 * h, y_tmp_, k5_);
    y_tmp_ = y_ + h * (a61 * k1_ + a62 * k2_ + a63 * k3_ + a64 * k4_ + a65 * k5_);
    rhs_(t + h, y_tmp_, k6_);
    y_new_ = y_ + h * (a71 * k1_ + a73 * k3_ + a74 * k4_ + a75 * k5_ + a76 * k6_);
    rhs_(t + h, y_new_, k7_);
    n_rhs_ += 6;
    // squared magnitudes avoid hypot and vectorise for complex states
    const auto scale =
        ctl_.abs_tol + ctl_.rel_tol * y_.cwiseAbs2().cwiseMax(y_new_.cwiseAbs2()).array().sqrt();
    const auto err = h * (e1 * k1_ + e3 * k3_ + e4 * k4_ + e5 * k5_ + e6 * k6_ + e7 * k7_);
    const double sum = (err.cwiseAbs2().array() / scale.square()).sum();
    return std::sqrt(sum / static_cast<double>(y_.size()));
  }

  double scaled_norm(const State& v) const {
    const auto scale = ctl_.abs_tol + ctl_.rel_tol * y_.cwiseAbs2().array().sqrt();
    return std::sqrt((v.cwiseAbs2().array() / scale.square()).sum() /
                     static_cast<double>(v.size()));
  }

  // Initial step heuristic (Hairer, Norsett & Wanner, II.4).
  double initial_step_guess(double span) {
    const double d0 = scaled_norm(y_);
    const double d1 = scaled_norm(k1_);
    double h0 = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
    h0 = std::min({h0, span, ctl_.max_step});
    y_tmp_ = y_ + h0 * k1_;
    rhs_(t_ + h0, y_tmp_, k2_);
    ++n_rhs_;
    const double d2 = scaled_norm(k2_ - k1_) / h0;
    const double dmax = std::max(d1, d2);
    const double h1 = dmax <= 1e-15 ? std::max(1e-6, h0 * 1e-3) : std::pow(0.01 / dmax, 0.2);
    return std::min({100.0 * h0, h1, span, ctl_.max_step});
  }

  static void check_finite(const State& y, double t) {
    if (!y.allFinite()) throw NumericalFailure("non-finite state encountered", t);
  }

  Rhs rhs_;
  StepControl ctl_;
  double t_ = 0.0, t_old_ = 0.0, h_ = 0.0, h_last_ = 0.0, fac_old_ = 1e-4;
  bool last_rejected_ = false;
  long n_accepted_ = 0, n_rejected_ = 0, n_rhs_ = 0;
  State y_, y_old_, y_new_, y_tmp_;
  State k1_, k2_, k3_, k4_, k5_, k6_, k7_, k1_old_;
};

}  // namespace optodtc
