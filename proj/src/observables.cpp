#include "fermikac/observables.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <ostream>
#include <set>

#include "fermikac/errors.hpp"
#include "fermikac/rng.hpp"

namespace fermikac {

void CompactBox::validate() const {
  if (!(lower.array() < upper.array()).all()) throw ConfigError("box: lower must be < upper");
}

std::pair<CellIndex, CellIndex> CompactBox::cell_range(double side) const {
  CellIndex lo, hi;
  auto first = [&](double x) { return static_cast<std::int32_t>(std::floor(x / side)); };
  auto last = [&](double x) { return static_cast<std::int32_t>(std::ceil(x / side)) - 1; };
  lo = {first(lower.x()), first(lower.y()), first(lower.z())};
  hi = {last(upper.x()), last(upper.y()), last(upper.z())};
  return {lo, hi};
}

namespace {
template <typename Fn>
void for_each_cell(const std::pair<CellIndex, CellIndex>& r, Fn&& fn) {
  for (std::int32_t x = r.first.ix; x <= r.second.ix; ++x)
    for (std::int32_t y = r.first.iy; y <= r.second.iy; ++y)
      for (std::int32_t z = r.first.iz; z <= r.second.iz; ++z) fn(CellIndex{x, y, z});
}

bool in_range(const std::pair<CellIndex, CellIndex>& r, const CellIndex& c) {
  return c.ix >= r.first.ix && c.ix <= r.second.ix && c.iy >= r.first.iy &&
         c.iy <= r.second.iy && c.iz >= r.first.iz && c.iz <= r.second.iz;
}

double falling2(std::int64_t n) { return static_cast<double>(n) * static_cast<double>(n - 1); }
}  // namespace

MarginalEstimate MarginalEstimate::from_samples(
    int k, std::int64_t n_particles, double delta, double side, double alpha,
    std::vector<std::vector<std::pair<CellIndex, std::uint32_t>>> samples) {
  if (k != 1 && k != 2) throw ConfigError("marginal order must be 1 or 2");
  MarginalEstimate est;
  est.k_ = k;
  est.n_particles_ = n_particles;
  est.delta_ = delta;
  est.side_ = side;
  est.alpha_ = alpha;
  est.samples_ = std::move(samples);
  for (auto& s : est.samples_) std::sort(s.begin(), s.end());
  est.rebuild_index();
  return est;
}

void MarginalEstimate::rebuild_index() {
  cells_.clear();
  for (std::size_t r = 0; r < samples_.size(); ++r) {
    for (const auto& [cell, count] : samples_[r]) {
      cells_[cell].push_back({static_cast<std::uint32_t>(r), count});
    }
  }
}

std::uint64_t MarginalEstimate::total_count(const CellIndex& a) const {
  auto it = cells_.find(a);
  if (it == cells_.end()) return 0;
  std::uint64_t t = 0;
  for (const auto& e : it->second) t += e.count;
  return t;
}

std::uint64_t MarginalEstimate::joint_count(const CellIndex& a, const CellIndex& b) const {
  if (a == b) return 0;
  auto ia = cells_.find(a), ib = cells_.find(b);
  if (ia == cells_.end() || ib == cells_.end()) return 0;
  const auto& la = ia->second;
  const auto& lb = ib->second;
  std::uint64_t t = 0;
  std::size_t p = 0, q = 0;
  while (p < la.size() && q < lb.size()) {
    if (la[p].sample < lb[q].sample) {
      ++p;
    } else if (lb[q].sample < la[p].sample) {
      ++q;
    } else {
      t += static_cast<std::uint64_t>(la[p].count) * lb[q].count;
      ++p;
      ++q;
    }
  }
  return t;
}

double MarginalEstimate::value(const CellIndex& a) const {
  if (samples_.empty()) return 0.0;
  const double mean = static_cast<double>(total_count(a)) / static_cast<double>(samples_.size());
  // On delta cells N |A| is the realized alpha, so the bound mean <= 1 gives
  // value <= 1/alpha with the same rounding.
  return mean / (static_cast<double>(n_particles_) * cell_volume());
}

double MarginalEstimate::value(const CellIndex& a, const CellIndex& b) const {
  if (samples_.empty() || n_particles_ < 2) return 0.0;
  const double mean = static_cast<double>(joint_count(a, b)) / static_cast<double>(samples_.size());
  const double vol = cell_volume();
  return mean / (falling2(n_particles_) * vol * vol);
}

std::vector<std::pair<CellIndex, double>> MarginalEstimate::values1() const {
  std::vector<std::pair<CellIndex, double>> out;
  out.reserve(cells_.size());
  for (const auto& [cell, list] : cells_) out.emplace_back(cell, value(cell));
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<std::pair<std::pair<CellIndex, CellIndex>, double>> MarginalEstimate::values2(
    std::size_t limit) const {
  std::set<std::pair<CellIndex, CellIndex>> pairs;
  for (const auto& s : samples_) {
    for (std::size_t a = 0; a < s.size(); ++a) {
      for (std::size_t b = a + 1; b < s.size(); ++b) {
        pairs.emplace(s[a].first, s[b].first);
        if (pairs.size() > limit) return {};
      }
    }
  }
  std::vector<std::pair<std::pair<CellIndex, CellIndex>, double>> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs) out.emplace_back(p, value(p.first, p.second));
  return out;
}

MarginalEstimate MarginalEstimate::merge(const MarginalEstimate& a, const MarginalEstimate& b) {
  if (a.samples_.empty()) return b;
  if (b.samples_.empty()) return a;
  if (a.n_particles_ != b.n_particles_ || a.delta_ != b.delta_ || a.side_ != b.side_) {
    throw ConfigError("merge: estimates use different grids");
  }
  MarginalEstimate out = a;
  out.samples_.insert(out.samples_.end(), b.samples_.begin(), b.samples_.end());
  out.rebuild_index();
  return out;
}

MarginalEstimate MarginalEstimate::resample(std::span<const std::size_t> picks) const {
  MarginalEstimate out;
  out.k_ = k_;
  out.n_particles_ = n_particles_;
  out.delta_ = delta_;
  out.side_ = side_;
  out.alpha_ = alpha_;
  out.samples_.reserve(picks.size());
  for (std::size_t r : picks) out.samples_.push_back(samples_.at(r));
  out.rebuild_index();
  return out;
}

MarginalEstimate MarginalEstimate::with_order(int k) const {
  if (k != 1 && k != 2) throw ConfigError("marginal order must be 1 or 2");
  MarginalEstimate out = *this;
  out.k_ = k;
  return out;
}

MarginalEstimate estimate_marginal(std::span<const ParticleEnsemble> snapshots, int k,
                                   double observe_side) {
  if (snapshots.empty()) throw ConfigError("estimate_marginal: no snapshots");
  const CellGrid& grid = snapshots.front().grid();
  const double side = observe_side > 0.0 ? observe_side : grid.delta();
  std::vector<std::vector<std::pair<CellIndex, std::uint32_t>>> samples;
  samples.reserve(snapshots.size());
  for (const auto& ens : snapshots) {
    if (!(ens.grid() == grid)) throw ConfigError("estimate_marginal: snapshots use different grids");
    std::unordered_map<CellIndex, std::uint32_t, CellHash> counts;
    counts.reserve(ens.size());
    for (const auto& v : ens.velocities()) ++counts[cell_of(side, v)];
    samples.emplace_back(counts.begin(), counts.end());
  }
  return MarginalEstimate::from_samples(k, grid.n_particles(), grid.delta(), side, grid.alpha(),
                                        std::move(samples));
}

double delta_norm(const MarginalEstimate& est) {
  if (est.n_samples() == 0) return 0.0;
  if (est.k() == 1) {
    double best = 0.0;
    for (const auto& [cell, list] : est.cells()) best = std::max(best, est.value(cell));
    return best;
  }
  // Branch and bound on the co-occupation count: joint(A,B) <= T_B * m_max
  // where T is the total count of a cell and m_max the largest single count.
  struct Item {
    CellIndex cell;
    std::uint64_t total;
  };
  std::vector<Item> items;
  std::uint64_t m_max = 0;
  for (const auto& [cell, list] : est.cells()) {
    std::uint64_t t = 0;
    for (const auto& e : list) {
      t += e.count;
      m_max = std::max<std::uint64_t>(m_max, e.count);
    }
    items.push_back({cell, t});
  }
  std::sort(items.begin(), items.end(), [](const Item& x, const Item& y) {
    return x.total != y.total ? x.total > y.total : x.cell < y.cell;
  });
  std::uint64_t best = 0;
  CellIndex best_a{}, best_b{};
  for (std::size_t a = 0; a < items.size(); ++a) {
    if (a + 1 < items.size() && items[a + 1].total * m_max <= best) break;
    for (std::size_t b = a + 1; b < items.size(); ++b) {
      if (items[b].total * m_max <= best) break;
      const std::uint64_t j = est.joint_count(items[a].cell, items[b].cell);
      if (j > best) {
        best = j;
        best_a = items[a].cell;
        best_b = items[b].cell;
      }
    }
  }
  return best == 0 ? 0.0 : est.value(best_a, best_b);
}

double cell_average(const DensityField& field, double side, const CellIndex& cell) {
  const Vec3 o = cell_origin(side, cell);
  double s = 0.0;
  for (int c = 0; c < 8; ++c) {
    const Vec3 p = o + side * Vec3((c >> 2 & 1) ? 0.75 : 0.25, (c >> 1 & 1) ? 0.75 : 0.25,
                                   (c & 1) ? 0.75 : 0.25);
    s += field.interpolate(p);
  }
  return s / 8.0;
}

double l1_distance(const MarginalEstimate& est,
                   const std::function<double(const CellIndex&)>& avg, const CompactBox& box) {
  box.validate();
  const auto range = box.cell_range(est.side());
  const double vol = est.cell_volume();
  double sum = 0.0;
  for_each_cell(range, [&](const CellIndex& c) { sum += std::abs(avg(c)); });
  for (const auto& [cell, list] : est.cells()) {
    if (!in_range(range, cell)) continue;
    const double a = avg(cell);
    sum += std::abs(est.value(cell) - a) - std::abs(a);
  }
  return sum * vol;
}

double l1_distance(const MarginalEstimate& est, const DensityField& field, const CompactBox& box) {
  const double side = est.side();
  return l1_distance(est, [&](const CellIndex& c) { return cell_average(field, side, c); }, box);
}

double sup_distance(const MarginalEstimate& est,
                    const std::function<double(const CellIndex&)>& avg, const CompactBox& box) {
  box.validate();
  double best = 0.0;
  for_each_cell(box.cell_range(est.side()),
                [&](const CellIndex& c) { best = std::max(best, std::abs(est.value(c) - avg(c))); });
  return best;
}

namespace {

// Dense evaluation over the occupied cells of the box. Pairs of cells that are
// never occupied in est1 or est2 contribute nothing.
double chaos_dense(const MarginalEstimate& est2, const MarginalEstimate& est1,
                   const std::vector<CellIndex>& cells) {
  const std::size_t nc = cells.size();
  const std::size_t R = est2.n_samples();
  std::unordered_map<CellIndex, std::size_t, CellHash> pos;
  for (std::size_t i = 0; i < nc; ++i) pos[cells[i]] = i;
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(R), static_cast<Eigen::Index>(nc));
  for (std::size_t r = 0; r < R; ++r) {
    for (const auto& [cell, count] : est2.samples()[r]) {
      auto it = pos.find(cell);
      if (it != pos.end()) M(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(it->second)) = count;
    }
  }
  Eigen::VectorXd e1(static_cast<Eigen::Index>(nc));
  for (std::size_t i = 0; i < nc; ++i) e1(static_cast<Eigen::Index>(i)) = est1.value(cells[i]);
  const double vol = est1.cell_volume();
  // f2(A,B) |A||B| = <n_A n_B> / (N (N-1))
  const double scale = 1.0 / (static_cast<double>(R) * falling2(est2.n_particles()));
  double sum = 0.0;
  constexpr Eigen::Index kBlock = 256;
  const auto n = static_cast<Eigen::Index>(nc);
  for (Eigen::Index b0 = 0; b0 < n; b0 += kBlock) {
    const Eigen::Index bs = std::min(kBlock, n - b0);
    const Eigen::MatrixXd G = M.middleCols(b0, bs).transpose() * M;
    for (Eigen::Index a = 0; a < bs; ++a) {
      const double pa = e1(b0 + a);
      for (Eigen::Index b = 0; b < n; ++b) {
        if (b == b0 + a) continue;
        sum += std::abs(G(a, b) * scale - pa * e1(b) * vol * vol);
      }
    }
  }
  return sum;
}

// Sparse evaluation for fine cells:
//   sum |x - y| = sum x + sum y - 2 sum min(x, y),
// where the first two sums have closed forms and min(x, y) is nonzero only on
// pairs co-occupied in some snapshot.
double chaos_sparse(const MarginalEstimate& est2, const MarginalEstimate& est1,
                    const std::pair<CellIndex, CellIndex>& range) {
  const double R = static_cast<double>(est2.n_samples());
  const double vol = est1.cell_volume();
  const double vol2 = est2.cell_volume();
  const double denom = R * falling2(est2.n_particles());
  double sum_x = 0.0;
  for (const auto& s : est2.samples()) {
    double tot = 0.0, sq = 0.0;
    for (const auto& [cell, count] : s) {
      if (!in_range(range, cell)) continue;
      tot += count;
      sq += static_cast<double>(count) * count;
    }
    sum_x += tot * tot - sq;
  }
  sum_x /= denom;
  double lin = 0.0, sq = 0.0;
  for (const auto& [cell, list] : est1.cells()) {
    if (!in_range(range, cell)) continue;
    const double m = est1.value(cell) * vol;
    lin += m;
    sq += m * m;
  }
  const double sum_y = lin * lin - sq;
  double sum_min = 0.0;
  const auto& samples = est2.samples();
  for (std::size_t r = 0; r < samples.size(); ++r) {
    std::vector<CellIndex> occ;
    for (const auto& [cell, count] : samples[r])
      if (in_range(range, cell)) occ.push_back(cell);
    for (std::size_t a = 0; a < occ.size(); ++a) {
      const auto& la = est2.cells().at(occ[a]);
      for (std::size_t b = a + 1; b < occ.size(); ++b) {
        const auto& lb = est2.cells().at(occ[b]);
        // count the pair only at the first snapshot where both cells occur
        std::size_t p = 0, q = 0;
        std::uint32_t first = 0;
        while (true) {
          if (la[p].sample < lb[q].sample) ++p;
          else if (lb[q].sample < la[p].sample) ++q;
          else { first = la[p].sample; break; }
        }
        if (first != r) continue;
        const double x = est2.value(occ[a], occ[b]) * vol2 * vol2;
        const double y = est1.value(occ[a]) * est1.value(occ[b]) * vol * vol;
        sum_min += 2.0 * std::min(x, y);
      }
    }
  }
  return sum_x + sum_y - 2.0 * sum_min;
}
}  // namespace

double chaos_defect(const MarginalEstimate& est2, const MarginalEstimate& est1, const CompactBox& box) {
  box.validate();
  if (est2.side() != est1.side()) throw ConfigError("chaos_defect: estimates use different cells");
  if (est2.n_samples() == 0) return 0.0;
  const auto range = box.cell_range(est2.side());
  std::set<CellIndex> occupied;
  for (const auto* e : {&est1, &est2})
    for (const auto& [cell, list] : e->cells())
      if (in_range(range, cell)) occupied.insert(cell);
  constexpr std::size_t kDenseLimit = 12000;
  if (occupied.size() <= kDenseLimit) {
    return chaos_dense(est2, est1, std::vector<CellIndex>(occupied.begin(), occupied.end()));
  }
  return chaos_sparse(est2, est1, range);
}

double fermionic_entropy(const MarginalEstimate& est1) {
  const double a = est1.alpha();
  double s = 0.0;
  for (const auto& [cell, list] : est1.cells()) {
    const double x = est1.value(cell);
    double term = x > 0.0 ? x * std::log(x) : 0.0;
    const double y = 1.0 - a * x;
    if (y > 0.0) term += y * std::log(y) / a;
    s -= term * est1.cell_volume();
  }
  return s;
}

double bootstrap_sd(const MarginalEstimate& est, int resamples, std::uint64_t seed,
                    const std::function<double(const MarginalEstimate&)>& stat) {
  const std::size_t R = est.n_samples();
  if (R < 2 || resamples < 2) return 0.0;
  Rng rng(seed);
  std::vector<std::size_t> picks(R);
  double mean = 0.0, m2 = 0.0;
  for (int b = 0; b < resamples; ++b) {
    for (auto& p : picks) p = rng.index(R);
    const double x = stat(est.resample(picks));
    const double d = x - mean;
    mean += d / (b + 1);
    m2 += d * (x - mean);
  }
  return std::sqrt(m2 / (resamples - 1));
}

void write_csv_k1(std::ostream& os, double t, const MarginalEstimate& est, bool header) {
  if (header) os << "t,ix,iy,iz,f1_hat\n";
  for (const auto& [c, v] : est.values1()) {
    os << t << ',' << c.ix << ',' << c.iy << ',' << c.iz << ',' << v << '\n';
  }
}

bool write_csv_k2(std::ostream& os, double t, const MarginalEstimate& est, bool header,
                  std::size_t limit) {
  if (header) os << "t,ix1,iy1,iz1,ix2,iy2,iz2,f2_hat\n";
  const auto rows = est.values2(limit);
  if (rows.empty() && est.n_samples() > 0 && est.n_particles() > 1) return false;
  for (const auto& [p, v] : rows) {
    const auto& [a, b] = p;
    os << t << ',' << a.ix << ',' << a.iy << ',' << a.iz << ',' << b.ix << ',' << b.iy << ','
       << b.iz << ',' << v << '\n';
  }
  return true;
}

}  // namespace fermikac
