#include "fermikac/uu.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "fermikac/errors.hpp"

namespace fermikac {

DensityField::DensityField(int n, double half_width, double alpha)
    : n_(n), half_width_(half_width), alpha_(alpha) {
  if (n < 2) throw ConfigError("uu.grid_n must be at least 2");
  if (!(half_width > 0.0)) throw ConfigError("uu.grid_l must be positive");
  if (!(alpha >= 0.0 && alpha < 1.0)) throw ConfigError("alpha must lie in [0,1)");
  h_ = 2.0 * half_width / (n - 1);
  values_.assign(static_cast<std::size_t>(n) * n * n, 0.0);
}

DensityField DensityField::from_function(int n, double half_width, double alpha,
                                         const std::function<double(const Vec3&)>& fn) {
  DensityField f(n, half_width, alpha);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) f(i, j, k) = fn(f.node(i, j, k));
  return f;
}

Vec3 DensityField::node(std::size_t flat) const {
  const int k = static_cast<int>(flat % n_);
  const int j = static_cast<int>((flat / n_) % n_);
  const int i = static_cast<int>(flat / (static_cast<std::size_t>(n_) * n_));
  return node(i, j, k);
}

double DensityField::interpolate(const Vec3& v) const {
  double x[3];
  int base[3];
  for (int a = 0; a < 3; ++a) {
    const double s = (v(a) + half_width_) / h_;
    if (!(s > -1.0 && s < n_)) return 0.0;
    const double fl = std::floor(s);
    base[a] = static_cast<int>(fl);
    x[a] = s - fl;
  }
  double out = 0.0;
  for (int c = 0; c < 8; ++c) {
    const int i = base[0] + (c >> 2 & 1), j = base[1] + (c >> 1 & 1), k = base[2] + (c & 1);
    if (i < 0 || j < 0 || k < 0 || i >= n_ || j >= n_ || k >= n_) continue;
    const double w = ((c >> 2 & 1) ? x[0] : 1.0 - x[0]) * ((c >> 1 & 1) ? x[1] : 1.0 - x[1]) *
                     ((c & 1) ? x[2] : 1.0 - x[2]);
    out += w * (*this)(i, j, k);
  }
  return out;
}

double DensityField::max_value() const {
  return values_.empty() ? 0.0 : *std::max_element(values_.begin(), values_.end());
}

double DensityField::min_value() const {
  return values_.empty() ? 0.0 : *std::min_element(values_.begin(), values_.end());
}

Moments moments(const DensityField& f) {
  Moments m;
  const int n = f.n();
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) {
        const double wf = f.weight(i, j, k) * f(i, j, k);
        const Vec3 v = f.node(i, j, k);
        m.mass += wf;
        m.momentum += wf * v;
        m.energy += 0.5 * wf * v.squaredNorm();
      }
  return m;
}

double fermionic_entropy(const DensityField& f) {
  const double a = f.alpha();
  double s = 0.0;
  const int n = f.n();
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) {
        const double x = f(i, j, k);
        double term = 0.0;
        if (x > 0.0) term += x * std::log(x);
        if (a > 0.0) {
          const double y = 1.0 - a * x;
          if (y > 0.0) term += y * std::log(y) / a;
        } else {
          term -= x;  // alpha -> 0 limit of (1 - a x) ln(1 - a x) / a
        }
        s -= f.weight(i, j, k) * term;
      }
  return s;
}

CollisionOperator::CollisionOperator(int n, double half_width, const CrossSectionSpec& kernel,
                                     const SphereQuadrature& quad)
    : n_(n), half_width_(half_width) {
  kernel.validate();
  const double h = 2.0 * half_width / (n - 1);
  const int reach = static_cast<int>(std::ceil(kernel.m_cut / h));
  pad_ = reach + 2;
  const auto& nodes = quad.nodes();
  const auto& weights = quad.weights();
  const auto& anti = quad.antipode();
  for (int gx = -reach; gx <= reach; ++gx)
    for (int gy = -reach; gy <= reach; ++gy)
      for (int gz = -reach; gz <= reach; ++gz) {
        // one representative per unordered pair: G > 0 lexicographically
        if (gx < 0 || (gx == 0 && (gy < 0 || (gy == 0 && gz <= 0)))) continue;
        const Vec3 g = h * Vec3(gx, gy, gz);
        if (g.norm() > kernel.m_cut) continue;
        for (std::size_t q = 0; q < nodes.size(); ++q) {
          const auto qa = static_cast<std::size_t>(anti[q]);
          if (qa < q) continue;
          double coef = weights[q] * eval_kernel(kernel, g, nodes[q]);
          if (qa != q) coef += weights[qa] * eval_kernel(kernel, g, nodes[qa]);
          if (coef == 0.0) continue;
          const Vec3 d = nodes[q] * nodes[q].dot(g);
          Entry e;
          e.g = {gx, gy, gz};
          e.coef = coef;
          for (int a = 0; a < 3; ++a) {
            const double o1 = -d(a) / h;
            const double o2 = -e.g[a] + d(a) / h;
            const double f1 = std::floor(o1), f2 = std::floor(o2);
            e.base1[a] = static_cast<int>(f1);
            e.base2[a] = static_cast<int>(f2);
            e.frac1[a] = o1 - f1;
            e.frac2[a] = o2 - f2;
          }
          entries_.push_back(e);
        }
      }
}

namespace {
struct Trilinear {
  std::ptrdiff_t base;
  double w[8];
};

Trilinear trilinear(const std::array<int, 3>& b, const std::array<double, 3>& t, std::ptrdiff_t P) {
  Trilinear tl;
  tl.base = (b[0] * P + b[1]) * P + b[2];
  for (int c = 0; c < 8; ++c) {
    tl.w[c] = ((c >> 2 & 1) ? t[0] : 1.0 - t[0]) * ((c >> 1 & 1) ? t[1] : 1.0 - t[1]) *
              ((c & 1) ? t[2] : 1.0 - t[2]);
  }
  return tl;
}
}  // namespace

DensityField CollisionOperator::apply(const DensityField& f) const {
  if (f.n() != n_ || f.half_width() != half_width_) {
    throw ConfigError("collision operator built for a different grid");
  }
  const double alpha = f.alpha();
  const int n = n_;
  const std::ptrdiff_t P = n + 2 * pad_;
  const std::size_t total = static_cast<std::size_t>(P) * P * P;
  std::vector<double> F(total, 0.0), W(total, 0.0), Q(total, 0.0);
  auto pidx = [&](int i, int j, int k) {
    return ((static_cast<std::ptrdiff_t>(i) + pad_) * P + (j + pad_)) * P + (k + pad_);
  };
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) {
        F[pidx(i, j, k)] = f(i, j, k);
        W[pidx(i, j, k)] = f.weight(i, j, k);
      }
  const std::ptrdiff_t corner[8] = {0, 1, P, P + 1, P * P, P * P + 1, P * P + P, P * P + P + 1};

  for (const Entry& e : entries_) {
    const std::ptrdiff_t off_g = (e.g[0] * P + e.g[1]) * P + e.g[2];
    const Trilinear t1 = trilinear(e.base1, e.frac1, P);
    const Trilinear t2 = trilinear(e.base2, e.frac2, P);
    const int i_lo = std::max(0, e.g[0]), i_hi = std::min(n - 1, n - 1 + e.g[0]);
    const int j_lo = std::max(0, e.g[1]), j_hi = std::min(n - 1, n - 1 + e.g[1]);
    const int k_lo = std::max(0, e.g[2]), k_hi = std::min(n - 1, n - 1 + e.g[2]);
    const double c = e.coef;
    for (int i = i_lo; i <= i_hi; ++i) {
      for (int j = j_lo; j <= j_hi; ++j) {
        const std::ptrdiff_t row = pidx(i, j, 0);
        const double* f1p = F.data() + row + t1.base;
        const double* f2p = F.data() + row + t2.base;
        const double* fr = F.data() + row;
        const double* fg = F.data() + row - off_g;
        const double* wr = W.data() + row;
        const double* wg = W.data() + row - off_g;
        double* qr = Q.data() + row;
        double* qg = Q.data() + row - off_g;
        for (int k = k_lo; k <= k_hi; ++k) {
          double a = 0.0, b = 0.0;
          for (int cc = 0; cc < 8; ++cc) {
            a += t1.w[cc] * f1p[k + corner[cc]];
            b += t2.w[cc] * f2p[k + corner[cc]];
          }
          const double x1 = fr[k], x2 = fg[k];
          const double bracket = a * b * (1.0 - alpha * x1) * (1.0 - alpha * x2) -
                                 x1 * x2 * (1.0 - alpha * a) * (1.0 - alpha * b);
          const double val = c * bracket;
          qr[k] += wg[k] * val;
          qg[k] += wr[k] * val;
        }
      }
    }
  }

  DensityField out(n, half_width_, alpha);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) out(i, j, k) = Q[pidx(i, j, k)];
  return out;
}

DensityField collision_operator(const DensityField& f, const CrossSectionSpec& kernel,
                                const SphereQuadrature& quad) {
  return CollisionOperator(f.n(), f.half_width(), kernel, quad).apply(f);
}

DensityField conservative_projection(const DensityField& q, const DensityField& f) {
  using Mat5 = Eigen::Matrix<double, 5, 5>;
  using Vec5 = Eigen::Matrix<double, 5, 1>;
  const double alpha = f.alpha();
  const int n = q.n();
  Mat5 A = Mat5::Zero();
  Vec5 b = Vec5::Zero();
  std::vector<double> d(q.size());
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) {
        const std::size_t idx = q.index(i, j, k);
        const double x = f.values()[idx];
        d[idx] = std::max(0.0, x * (1.0 - alpha * x));
        const Vec3 v = q.node(i, j, k);
        const Vec5 phi(1.0, v.x(), v.y(), v.z(), v.squaredNorm());
        const double w = q.weight(i, j, k);
        A.noalias() += (w * d[idx]) * phi * phi.transpose();
        b += (w * q.values()[idx]) * phi;
      }
  if (!(A.trace() > 0.0)) return q;
  const Eigen::LDLT<Mat5> ldlt(A);
  if (ldlt.info() != Eigen::Success) return q;
  const Vec5 lambda = ldlt.solve(b);
  DensityField out = q;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) {
        const std::size_t idx = q.index(i, j, k);
        const Vec3 v = q.node(i, j, k);
        const Vec5 phi(1.0, v.x(), v.y(), v.z(), v.squaredNorm());
        out.values()[idx] -= d[idx] * phi.dot(lambda);
      }
  return out;
}

BoundReport bound_report(const DensityField& f) {
  BoundReport r;
  const double cap = f.alpha() > 0.0 ? 1.0 / f.alpha() : std::numeric_limits<double>::infinity();
  r.max_value = f.max_value();
  r.min_value = f.min_value();
  for (double x : f.values()) {
    if (x < 0.0) ++r.below_zero;
    if (x > cap) ++r.above_bound;
  }
  return r;
}

double dt_max(const DensityField& f, const CrossSectionSpec& kernel) {
  const double ball = 4.0 / 3.0 * std::numbers::pi * std::pow(kernel.m_cut, 3);
  const double reach = std::min(std::max(f.max_value(), 0.0) * ball, std::abs(moments(f).mass));
  if (!(reach > 0.0)) return std::numeric_limits<double>::infinity();
  return 0.1 / (kernel.b0 * 4.0 * std::numbers::pi * reach);
}

namespace {
DensityField rate(const DensityField& f, const CollisionOperator& op, const StepOptions& opt) {
  DensityField q = op.apply(f);
  return opt.conservative ? conservative_projection(q, f) : q;
}

void axpy(DensityField& y, double a, const DensityField& x) {
  auto& yv = y.values();
  const auto& xv = x.values();
  for (std::size_t i = 0; i < yv.size(); ++i) yv[i] += a * xv[i];
}
}  // namespace

DensityField step(const DensityField& f, double dt, const CollisionOperator& op,
                  const StepOptions& options) {
  if (dt == 0.0) return f;
  DensityField half = f;
  axpy(half, 0.5 * dt, rate(f, op, options));
  DensityField out = f;
  axpy(out, dt, rate(half, op, options));
  return out;
}

DensityField step(const DensityField& f, double dt, const CrossSectionSpec& kernel,
                  const SphereQuadrature& quad, const StepOptions& options) {
  return step(f, dt, CollisionOperator(f.n(), f.half_width(), kernel, quad), options);
}

SolveResult solve(const DensityField& f0, double t_final, double dt,
                  const CrossSectionSpec& kernel, const SphereQuadrature& quad,
                  const std::vector<double>& snapshot_times, const StepOptions& options) {
  if (!(t_final >= 0.0)) throw ConfigError("uu: t_final must be non-negative");
  if (!(dt > 0.0)) throw ConfigError("uu.dt must be positive");
  if (f0.alpha() > 0.0 && f0.max_value() > 1.0 / f0.alpha()) {
    throw ConfigError("uu: initial field exceeds 1/alpha");
  }
  SolveResult res;
  auto diag = [&](int s, double t, const DensityField& f) {
    SolveDiagnostics d;
    d.step = s;
    d.time = t;
    d.moments = moments(f);
    d.bounds = bound_report(f);
    d.dt_exceeds_heuristic = dt > dt_max(f, kernel);
    res.diagnostics.push_back(d);
  };
  res.times.push_back(0.0);
  res.snapshots.push_back(f0);
  diag(0, 0.0, f0);
  if (t_final == 0.0) return res;

  const int n_steps = std::max(1, static_cast<int>(std::ceil(t_final / dt - 1e-9)));
  const double h = t_final / n_steps;
  std::vector<int> snap_steps;
  for (double t : snapshot_times) {
    const int s = static_cast<int>(std::lround(t / h));
    if (s > 0 && s < n_steps) snap_steps.push_back(s);
  }
  snap_steps.push_back(n_steps);
  std::sort(snap_steps.begin(), snap_steps.end());
  snap_steps.erase(std::unique(snap_steps.begin(), snap_steps.end()), snap_steps.end());

  const CollisionOperator op(f0.n(), f0.half_width(), kernel, quad);
  DensityField f = f0;
  std::size_t next_snap = 0;
  for (int s = 1; s <= n_steps; ++s) {
    f = step(f, h, op, options);
    for (double x : f.values()) {
      if (!std::isfinite(x)) {
        throw NumericalError("uu solve: non-finite value at step " + std::to_string(s));
      }
    }
    diag(s, s * h, f);
    if (next_snap < snap_steps.size() && snap_steps[next_snap] == s) {
      res.times.push_back(s * h);
      res.snapshots.push_back(f);
      ++next_snap;
    }
  }
  return res;
}

DensityField fermi_dirac(double alpha, double beta, double mu, int n, double half_width) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("fermi_dirac: alpha must lie in (0,1)");
  return DensityField::from_function(n, half_width, alpha, [&](const Vec3& v) {
    return (1.0 / alpha) / (1.0 + std::exp(beta * (0.5 * v.squaredNorm() - mu)));
  });
}

double fermi_dirac_mu(double alpha, double beta, int n, double half_width, double mass) {
  auto mass_at = [&](double mu) { return moments(fermi_dirac(alpha, beta, mu, n, half_width)).mass; };
  double lo = -1.0, hi = 1.0;
  for (int it = 0; mass_at(lo) > mass; ++it) {
    if (it > 200) throw NumericalError("fermi_dirac_mu: cannot bracket from below");
    lo = 2.0 * lo - 1.0;
  }
  for (int it = 0; mass_at(hi) < mass; ++it) {
    if (it > 60) throw NumericalError("fermi_dirac_mu: requested mass exceeds saturation");
    hi = 2.0 * hi + 1.0;
  }
  for (int it = 0; it < 200 && hi - lo > 1e-15 * std::max(1.0, std::abs(lo)); ++it) {
    const double mid = 0.5 * (lo + hi);
    (mass_at(mid) < mass ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace fermikac
