#include "optodtc/spectrum.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include <Eigen/Dense>

#include "optodtc/error.hpp"
#include "optodtc/sweep.hpp"

namespace optodtc {

namespace {

constexpr double kPi = std::numbers::pi;

// Sign-change bracket [a, b] -> root with |f| < tol where reachable.
double refine_root(const SpectrumProblem& prob, double a, double b, double fa, double fb,
                   double tol) {
  auto f = [&](double k) { return spectrum_residual(k, prob); };
  // bisection down to a narrow bracket
  for (int it = 0; it < 200 && b - a > 1e-10 * std::max(1.0, std::abs(a)); ++it) {
    const double m = 0.5 * (a + b);
    const double fm = f(m);
    if (fm == 0.0) return m;
    if ((fm < 0.0) == (fa < 0.0)) {
      a = m;
      fa = fm;
    } else {
      b = m;
      fb = fm;
    }
  }
  // secant polish, kept inside the bracket
  double x = std::abs(fa) < std::abs(fb) ? a : b;
  double fx = f(x);
  for (int it = 0; it < 60; ++it) {
    if (std::abs(fx) < tol) break;
    double next = (fb != fa) ? b - fb * (b - a) / (fb - fa) : 0.5 * (a + b);
    if (!(next > a && next < b)) next = 0.5 * (a + b);
    const double fn = f(next);
    if ((fn < 0.0) == (fa < 0.0)) {
      a = next;
      fa = fn;
    } else {
      b = next;
      fb = fn;
    }
    x = next;
    fx = fn;
    if (b - a <= 4.0 * std::numeric_limits<double>::epsilon() * std::abs(x)) break;
  }
  if (std::abs(fa) < std::abs(fx)) {
    x = a;
    fx = fa;
  }
  if (std::abs(fb) < std::abs(fx)) x = b;
  return x;
}

double default_step(const SpectrumProblem& prob, double step) {
  return step > 0.0 ? step : kPi / (40.0 * prob.half_length);
}

}  // namespace

double SpectrumProblem::phi() const { return std::acos(std::sqrt(transmission)); }

void SpectrumProblem::validate() const {
  require(std::isfinite(half_length) && half_length > 0.0, "half_length must be positive");
  require(transmission > 0.0 && transmission <= 1.0, "transmission must lie in (0, 1]");
  require(std::isfinite(x1) && std::isfinite(x2), "membrane positions must be finite");
  std::ostringstream msg;
  msg << "membrane positions must satisfy -L < x1 < x2 < L (x1 = " << x1 << ", x2 = " << x2
      << ", L = " << half_length << ")";
  require(-half_length < x1 && x1 < x2 && x2 < half_length, msg.str());
}

SpectrumProblem SpectrumProblem::displaced(double dx1, double dx2) const {
  SpectrumProblem p = *this;
  p.x1 += dx1;
  p.x2 += dx2;
  return p;
}

double spectrum_residual(double k, const SpectrumProblem& prob) {
  const double phi = prob.phi();
  const double s = std::sin(phi);
  const double l = prob.half_length;
  const double diff = prob.x1 - prob.x2;
  return std::sin(2.0 * k * l + 2.0 * phi) + std::sin(2.0 * k * l + 2.0 * k * diff) * s * s -
         2.0 * s * std::cos(k * diff - phi) * std::cos(k * (prob.x1 + prob.x2));
}

RootScan solve_k(const SpectrumProblem& prob, double k_lo, double k_hi,
                 const RootControls& controls) {
  prob.validate();
  require(k_lo > 0.0 && k_hi > k_lo, "bracket must satisfy 0 < k_lo < k_hi");
  const double step = default_step(prob, controls.grid_step);
  const auto n = static_cast<long>(std::ceil((k_hi - k_lo) / step));
  std::vector<double> ks(static_cast<std::size_t>(n + 1)), fs(ks.size());
  for (long i = 0; i <= n; ++i) {
    const std::size_t u = static_cast<std::size_t>(i);
    ks[u] = i == n ? k_hi : k_lo + static_cast<double>(i) * step;
    fs[u] = spectrum_residual(ks[u], prob);
  }
  RootScan out;
  for (std::size_t i = 0; i + 1 < ks.size(); ++i) {
    if (fs[i] == 0.0) {
      out.roots.push_back(ks[i]);
    } else if ((fs[i] < 0.0) != (fs[i + 1] < 0.0) && fs[i + 1] != 0.0) {
      out.roots.push_back(refine_root(prob, ks[i], ks[i + 1], fs[i], fs[i + 1], controls.tolerance));
    }
  }
  if (fs.back() == 0.0) out.roots.push_back(ks.back());
  // touching zeros: local minimum of |f| without a sign change
  for (std::size_t i = 1; i + 1 < ks.size(); ++i) {
    const double a = std::abs(fs[i - 1]), b = std::abs(fs[i]), c = std::abs(fs[i + 1]);
    if (!(b < a && b <= c)) continue;
    if ((fs[i - 1] < 0.0) != (fs[i] < 0.0) || (fs[i] < 0.0) != (fs[i + 1] < 0.0)) continue;
    // golden-section minimisation of |f| on [k_{i-1}, k_{i+1}]
    double lo = ks[i - 1], hi = ks[i + 1];
    const double r = 0.5 * (std::sqrt(5.0) - 1.0);
    for (int it = 0; it < 100 && hi - lo > 1e-14 * hi; ++it) {
      const double m1 = hi - r * (hi - lo), m2 = lo + r * (hi - lo);
      if (std::abs(spectrum_residual(m1, prob)) < std::abs(spectrum_residual(m2, prob)))
        hi = m2;
      else
        lo = m1;
    }
    const double km = 0.5 * (lo + hi);
    if (std::abs(spectrum_residual(km, prob)) < controls.tangential_tolerance)
      out.tangential.push_back(km);
  }
  std::sort(out.roots.begin(), out.roots.end());
  return out;
}

double track_root(const SpectrumProblem& prob, double k_guess, double max_shift,
                  const RootControls& controls) {
  const double shift = max_shift > 0.0 ? max_shift : kPi / (4.0 * prob.half_length);
  const double lo = std::max(k_guess - shift, 1e-12);
  const double hi = k_guess + shift;
  // a fine local grid keeps neighbouring branches apart
  RootControls local = controls;
  local.grid_step = default_step(prob, controls.grid_step) / 10.0;
  const RootScan scan = solve_k(prob, lo, hi, local);
  if (scan.roots.empty()) {
    std::ostringstream msg;
    msg << "branch lost: no root within " << shift << " of k = " << k_guess
        << "; use a smaller displacement step";
    throw NumericalFailure(msg.str());
  }
  return *std::min_element(scan.roots.begin(), scan.roots.end(), [&](double a, double b) {
    return std::abs(a - k_guess) < std::abs(b - k_guess);
  });
}

Equilibrium equilibrium_positions(int m0, int m1, int m2, double transmission,
                                  double half_length) {
  require(half_length > 0.0, "half_length must be positive");
  require(transmission > 0.0 && transmission <= 1.0, "transmission must lie in (0, 1]");
  const double phi = std::acos(std::sqrt(transmission));
  Equilibrium e{};
  e.k = ((2.0 * m0 + 1.0) * kPi / 2.0 - phi) / half_length;
  require(e.k > 0.0, "m0 gives a non-positive wave number");
  e.x1 = m1 * kPi / e.k;
  e.x2 = (m2 * kPi + kPi / 2.0 - phi) / e.k;
  std::ostringstream msg;
  msg << "(m0, m1, m2) = (" << m0 << ", " << m1 << ", " << m2
      << ") puts a membrane outside the cavity or out of order (x1 / L = " << e.x1 / half_length
      << ", x2 / L = " << e.x2 / half_length << ")";
  require(-half_length < e.x1 && e.x1 < e.x2 && e.x2 < half_length, msg.str());
  return e;
}

CouplingDerivatives coupling_derivatives(const SpectrumProblem& prob, double k0, double h) {
  prob.validate();
  const double step = h > 0.0 ? h : 5e-5 * prob.half_length;
  const double jump = kPi / (4.0 * prob.half_length);
  const double k_ref = track_root(prob, k0);
  auto k_at = [&](double dx1, double dx2) {
    const double k = track_root(prob.displaced(dx1, dx2), k_ref);
    if (std::abs(k - k_ref) > jump) {
      std::ostringstream msg;
      msg << "branch jump at displacement (" << dx1 << ", " << dx2 << "); retry with h < " << step;
      throw NumericalFailure(msg.str());
    }
    return k;
  };
  struct Raw {
    double d1, d2, d11, d22, d12;
  };
  auto raw = [&](double s) {
    const double p1 = k_at(s, 0.0), m1 = k_at(-s, 0.0);
    const double p2 = k_at(0.0, s), m2 = k_at(0.0, -s);
    const double pp = k_at(s, s), pm = k_at(s, -s), mp = k_at(-s, s), mm = k_at(-s, -s);
    return Raw{(p1 - m1) / (2.0 * s), (p2 - m2) / (2.0 * s), (p1 - 2.0 * k_ref + m1) / (s * s),
               (p2 - 2.0 * k_ref + m2) / (s * s), (pp - pm - mp + mm) / (4.0 * s * s)};
  };
  const Raw coarse = raw(step), fine = raw(0.5 * step);
  auto rich = [](double c, double f) { return (4.0 * f - c) / 3.0; };
  return {k_ref,
          rich(coarse.d1, fine.d1),
          rich(coarse.d2, fine.d2),
          rich(coarse.d11, fine.d11),
          rich(coarse.d22, fine.d22),
          rich(coarse.d12, fine.d12)};
}

namespace {

std::size_t nearest_zero(const std::vector<double>& v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (std::abs(v[i]) < std::abs(v[best])) best = i;
  return best;
}

// Outward visiting order from index c: c, c+1, ..., then c-1, c-2, ...; each
// entry paired with the neighbour it continues from.
std::vector<std::pair<std::size_t, std::size_t>> outward(std::size_t c, std::size_t n) {
  std::vector<std::pair<std::size_t, std::size_t>> order;
  for (std::size_t i = c + 1; i < n; ++i) order.emplace_back(i, i - 1);
  for (std::size_t i = c; i-- > 0;) order.emplace_back(i, i + 1);
  return order;
}

}  // namespace

SpectrumSurface spectrum_scan(const SpectrumProblem& base, const std::vector<double>& dx1,
                              const std::vector<double>& dx2, double branch_seed, int workers) {
  base.validate();
  require(!dx1.empty() && !dx2.empty(), "scan grids must be nonempty");
  const double jump = kPi / (4.0 * base.half_length);
  SpectrumSurface s;
  s.dx1 = dx1;
  s.dx2 = dx2;
  s.k0 = track_root(base, branch_seed);
  const std::size_t n1 = dx1.size(), n2 = dx2.size();
  s.dk.assign(n1 * n2, std::numeric_limits<double>::quiet_NaN());
  s.valid.assign(n1 * n2, false);

  // follow from k_prev to the cell; nullopt-like NaN on failure
  auto follow = [&](double d1, double d2, double k_prev, std::string& why) {
    try {
      const SpectrumProblem p = base.displaced(d1, d2);
      p.validate();
      const double k = track_root(p, k_prev);
      if (std::abs(k - k_prev) > jump) {
        why = "branch jump";
        return std::numeric_limits<double>::quiet_NaN();
      }
      return k;
    } catch (const std::exception& e) {
      why = e.what();
      return std::numeric_limits<double>::quiet_NaN();
    }
  };

  // spine: column nearest dx2 = 0, rows outward from dx1 = 0
  const std::size_t c2 = nearest_zero(dx2), c1 = nearest_zero(dx1);
  std::vector<double> spine(n1, std::numeric_limits<double>::quiet_NaN());
  std::vector<std::string> spine_msg(n1);
  spine[c1] = follow(dx1[c1], dx2[c2], s.k0, spine_msg[c1]);
  for (auto [i, from] : outward(c1, n1)) {
    const double prev = std::isnan(spine[from]) ? s.k0 : spine[from];
    spine[i] = follow(dx1[i], dx2[c2], prev, spine_msg[i]);
  }

  struct Row {
    std::vector<double> k;
    std::vector<std::string> msg;
  };
  std::vector<std::size_t> rows(n1);
  for (std::size_t i = 0; i < n1; ++i) rows[i] = i;
  auto results = sweep(
      rows,
      [&](std::size_t i) {
        Row row{std::vector<double>(n2, std::numeric_limits<double>::quiet_NaN()),
                std::vector<std::string>(n2)};
        row.k[c2] = spine[i];
        row.msg[c2] = spine_msg[i];
        double last_good = std::isnan(spine[i]) ? s.k0 : spine[i];
        double anchor = last_good;
        for (auto [j, from] : outward(c2, n2)) {
          if (from == c2) last_good = anchor;
          const double prev = std::isnan(row.k[from]) ? last_good : row.k[from];
          row.k[j] = follow(dx1[i], dx2[j], prev, row.msg[j]);
          if (!std::isnan(row.k[j])) last_good = row.k[j];
        }
        return row;
      },
      workers);
  for (std::size_t i = 0; i < n1; ++i) {
    const auto& r = results[i];
    for (std::size_t j = 0; j < n2; ++j) {
      const std::size_t idx = i * n2 + j;
      const double k = r.ok() ? r.value->k[j] : std::numeric_limits<double>::quiet_NaN();
      if (!std::isnan(k)) {
        s.dk[idx] = k - s.k0;
        s.valid[idx] = true;
      } else {
        std::ostringstream msg;
        msg << "cell (" << i << ", " << j << "): " << (r.ok() ? r.value->msg[j] : r.error);
        s.messages.push_back(msg.str());
      }
    }
  }
  return s;
}

SurfaceFit fit_quadratic_surface(const SpectrumSurface& surface) {
  const std::size_t n1 = surface.dx1.size(), n2 = surface.dx2.size();
  std::vector<std::size_t> cells;
  for (std::size_t i = 0; i < n1; ++i)
    for (std::size_t j = 0; j < n2; ++j)
      if (surface.ok(i, j)) cells.push_back(i * n2 + j);
  require(cells.size() >= 5, "surface fit needs at least five valid cells");
  Eigen::MatrixXd a(static_cast<Eigen::Index>(cells.size()), 5);
  Eigen::VectorXd b(a.rows());
  // scale columns so the normal problem is well conditioned
  double scale = 0.0;
  for (double v : surface.dx1) scale = std::max(scale, std::abs(v));
  for (double v : surface.dx2) scale = std::max(scale, std::abs(v));
  if (scale == 0.0) scale = 1.0;
  for (std::size_t r = 0; r < cells.size(); ++r) {
    const double u = surface.dx1[cells[r] / n2] / scale, v = surface.dx2[cells[r] % n2] / scale;
    const auto row = static_cast<Eigen::Index>(r);
    a.row(row) << u, v, u * u, v * v, u * v;
    b(row) = surface.dk[cells[r]];
  }
  const Eigen::VectorXd x = a.colPivHouseholderQr().solve(b);
  SurfaceFit fit;
  fit.b1 = x(0) / scale;
  fit.b2 = x(1) / scale;
  fit.a11 = x(2) / (scale * scale);
  fit.a22 = x(3) / (scale * scale);
  fit.a12 = x(4) / (scale * scale);
  fit.rms_residual = std::sqrt((a * x - b).squaredNorm() / static_cast<double>(cells.size()));
  fit.points = cells.size();
  return fit;
}

}  // namespace optodtc
