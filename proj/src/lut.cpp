#include "sfdi/lut.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <tuple>

#include "sfdi/binary_io.hpp"
#include "sfdi/error.hpp"

namespace sfdi {

namespace {

constexpr std::uint16_t kLutVersion = 1;
constexpr double kInsideSlack = 1e-9;

bool strictly_ascending(const std::vector<double>& g) {
  for (std::size_t k = 1; k < g.size(); ++k)
    if (!(g[k] > g[k - 1])) return false;
  return true;
}

bool is_geometric(const std::vector<double>& g) {
  if (g.size() < 3 || g.front() <= 0.0) return false;
  const double ratio = g[1] / g[0];
  for (std::size_t k = 2; k < g.size(); ++k)
    if (std::abs(g[k] / g[k - 1] - ratio) > 1e-9 * ratio) return false;
  return true;
}

double interpolate_axis(const std::vector<double>& g, int c, double t, bool geometric) {
  if (t <= 0.0) return g[c];
  if (t >= 1.0) return g[c + 1];
  if (geometric) return g[c] * std::pow(g[c + 1] / g[c], t);
  return g[c] + t * (g[c + 1] - g[c]);
}

struct CellSolution {
  bool inside = false;
  double u = 0.0;
  double v = 0.0;
  double residual = std::numeric_limits<double>::infinity();
};

}  // namespace

std::vector<double> make_grid(Interval range, int count, GridSpacing spacing) {
  require(count >= 2, "grid size must be >= 2");
  require(std::isfinite(range.lo) && std::isfinite(range.hi) && range.lo > 0.0 &&
              range.hi > range.lo,
          "grid range must be positive and non-degenerate");
  std::vector<double> g(static_cast<std::size_t>(count));
  for (int k = 0; k < count; ++k) {
    const double t = static_cast<double>(k) / (count - 1);
    g[k] = spacing == GridSpacing::logarithmic
               ? std::exp(std::log(range.lo) + t * (std::log(range.hi) - std::log(range.lo)))
               : range.lo + t * (range.hi - range.lo);
  }
  g.front() = range.lo;
  g.back() = range.hi;
  return g;
}

DiffusionLut::DiffusionLut(SpatialFrequency fx, double refractive_index,
                           std::vector<double> mu_a_grid, std::vector<double> mu_s_grid,
                           std::vector<ReflectanceNode> table)
    : fx_(fx), n_(refractive_index), mu_a_(std::move(mu_a_grid)), mu_s_(std::move(mu_s_grid)),
      table_(std::move(table)) {
  require(std::isfinite(n_) && n_ >= 1.0, "refractive index must be >= 1");
  require(mu_a_.size() >= 2 && mu_s_.size() >= 2, "LUT grids need at least 2 nodes");
  require(strictly_ascending(mu_a_) && strictly_ascending(mu_s_),
          "LUT grids must be strictly ascending");
  require(mu_a_.front() > 0.0 && mu_s_.front() > 0.0, "LUT grids must be positive");
  require(table_.size() == mu_a_.size() * mu_s_.size(), "LUT table size does not match grids");
  for (const auto& node : table_)
    require(std::isfinite(node.rd_dc) && std::isfinite(node.rd_ac) && node.rd_ac <= node.rd_dc,
            "LUT entries must be finite with rd_ac <= rd_dc");
  diffusion_warning_ = mu_a_.back() >= mu_s_.front();
  mu_a_geometric_ = is_geometric(mu_a_);
  mu_s_geometric_ = is_geometric(mu_s_);
  build_index();
}

void DiffusionLut::build_index() {
  double hi_dc = -std::numeric_limits<double>::infinity();
  double hi_ac = hi_dc;
  lo_dc_ = lo_ac_ = std::numeric_limits<double>::infinity();
  for (const auto& node : table_) {
    lo_dc_ = std::min(lo_dc_, node.rd_dc);
    hi_dc = std::max(hi_dc, node.rd_dc);
    lo_ac_ = std::min(lo_ac_, node.rd_ac);
    hi_ac = std::max(hi_ac, node.rd_ac);
  }
  buckets_ = std::max(1, static_cast<int>(std::sqrt(static_cast<double>(table_.size()))));
  cell_dc_ = std::max((hi_dc - lo_dc_) / buckets_, 1e-300);
  cell_ac_ = std::max((hi_ac - lo_ac_) / buckets_, 1e-300);
  bucket_nodes_.assign(static_cast<std::size_t>(buckets_) * buckets_, {});
  for (int i = 0; i < static_cast<int>(mu_a_.size()); ++i) {
    for (int j = 0; j < static_cast<int>(mu_s_.size()); ++j) {
      const auto& node = at(i, j);
      const int bx = std::clamp(static_cast<int>((node.rd_dc - lo_dc_) / cell_dc_), 0, buckets_ - 1);
      const int by = std::clamp(static_cast<int>((node.rd_ac - lo_ac_) / cell_ac_), 0, buckets_ - 1);
      bucket_nodes_[static_cast<std::size_t>(bx) * buckets_ + by].push_back(
          static_cast<int>(index(i, j)));
    }
  }
}

std::pair<int, int> DiffusionLut::nearest_node(double rd_dc, double rd_ac) const {
  require(std::isfinite(rd_dc) && std::isfinite(rd_ac), "measured reflectance must be finite");
  // Nodes outside the searched square are at least r * min_cell from the query's projection
  // onto the bounding box, and projection onto a convex set never increases distances.
  const double px = std::clamp(rd_dc, lo_dc_, lo_dc_ + cell_dc_ * buckets_);
  const double py = std::clamp(rd_ac, lo_ac_, lo_ac_ + cell_ac_ * buckets_);
  const int cx = std::clamp(static_cast<int>((px - lo_dc_) / cell_dc_), 0, buckets_ - 1);
  const int cy = std::clamp(static_cast<int>((py - lo_ac_) / cell_ac_), 0, buckets_ - 1);
  const double min_cell = std::min(cell_dc_, cell_ac_);

  auto best = std::make_tuple(std::numeric_limits<double>::infinity(), 0, 0);
  bool found = false;
  for (int r = 0; r <= buckets_; ++r) {
    for (int bx = cx - r; bx <= cx + r; ++bx) {
      if (bx < 0 || bx >= buckets_) continue;
      for (int by = cy - r; by <= cy + r; ++by) {
        if (by < 0 || by >= buckets_) continue;
        if (std::max(std::abs(bx - cx), std::abs(by - cy)) != r) continue;
        for (int flat : bucket_nodes_[static_cast<std::size_t>(bx) * buckets_ + by]) {
          const auto& node = table_[static_cast<std::size_t>(flat)];
          const double d_dc = node.rd_dc - rd_dc;
          const double d_ac = node.rd_ac - rd_ac;
          const int i = flat / static_cast<int>(mu_s_.size());
          const int j = flat % static_cast<int>(mu_s_.size());
          auto cand = std::make_tuple(d_dc * d_dc + d_ac * d_ac, i, j);
          if (cand < best) best = cand;
          found = true;
        }
      }
    }
    if (found && std::sqrt(std::get<0>(best)) < r * min_cell) break;
  }
  return {std::get<1>(best), std::get<2>(best)};
}

bool DiffusionLut::solve_cell(int ci, int cj, double dc, double ac, double& u, double& v,
                              double& residual) const {
  const auto& p00 = at(ci, cj);
  const auto& p10 = at(ci + 1, cj);
  const auto& p01 = at(ci, cj + 1);
  const auto& p11 = at(ci + 1, cj + 1);
  auto eval = [&](double uu, double vv, double& fdc, double& fac) {
    fdc = (1 - uu) * (1 - vv) * p00.rd_dc + uu * (1 - vv) * p10.rd_dc + (1 - uu) * vv * p01.rd_dc +
          uu * vv * p11.rd_dc;
    fac = (1 - uu) * (1 - vv) * p00.rd_ac + uu * (1 - vv) * p10.rd_ac + (1 - uu) * vv * p01.rd_ac +
          uu * vv * p11.rd_ac;
  };

  u = 0.5;
  v = 0.5;
  bool converged = false;
  for (int it = 0; it < 50; ++it) {
    double fdc, fac;
    eval(u, v, fdc, fac);
    const double r_dc = fdc - dc;
    const double r_ac = fac - ac;
    const double j11 = (1 - v) * (p10.rd_dc - p00.rd_dc) + v * (p11.rd_dc - p01.rd_dc);
    const double j12 = (1 - u) * (p01.rd_dc - p00.rd_dc) + u * (p11.rd_dc - p10.rd_dc);
    const double j21 = (1 - v) * (p10.rd_ac - p00.rd_ac) + v * (p11.rd_ac - p01.rd_ac);
    const double j22 = (1 - u) * (p01.rd_ac - p00.rd_ac) + u * (p11.rd_ac - p10.rd_ac);
    const double det = j11 * j22 - j12 * j21;
    if (det == 0.0 || !std::isfinite(det)) break;
    const double du = (j22 * r_dc - j12 * r_ac) / det;
    const double dv = (-j21 * r_dc + j11 * r_ac) / det;
    u = std::clamp(u - du, -1.0, 2.0);
    v = std::clamp(v - dv, -1.0, 2.0);
    if (std::abs(du) < 1e-12 && std::abs(dv) < 1e-12) {
      converged = true;
      break;
    }
  }
  if (!converged) {
    // Newton can stall a few ulps short of the step threshold; accept a vanishing residual.
    double fdc, fac;
    eval(u, v, fdc, fac);
    converged = std::hypot(fdc - dc, fac - ac) <= 1e-12 * (std::abs(dc) + std::abs(ac));
  }
  const bool inside = converged && u >= -kInsideSlack && u <= 1 + kInsideSlack &&
                      v >= -kInsideSlack && v <= 1 + kInsideSlack;
  u = std::clamp(u, 0.0, 1.0);
  v = std::clamp(v, 0.0, 1.0);
  double fdc, fac;
  eval(u, v, fdc, fac);
  residual = std::hypot(fdc - dc, fac - ac);
  return inside;
}

OpticalProperties DiffusionLut::props_at(int ci, int cj, double u, double v) const {
  OpticalProperties p;
  p.mu_a = interpolate_axis(mu_a_, ci, u, mu_a_geometric_);
  p.mu_s_prime = interpolate_axis(mu_s_, cj, v, mu_s_geometric_);
  p.wavelength_nm = 660.0;
  return p;
}

InversionResult DiffusionLut::invert(double rd_dc, double rd_ac) const {
  const auto [i, j] = nearest_node(rd_dc, rd_ac);
  InversionResult result;
  result.node_mu_a = i;
  result.node_mu_s = j;
  const auto& node = at(i, j);
  if (node.rd_dc == rd_dc && node.rd_ac == rd_ac) {
    result.props = {mu_a_[i], mu_s_[j], 660.0};
    return result;
  }

  const int max_ci = static_cast<int>(mu_a_.size()) - 2;
  const int max_cj = static_cast<int>(mu_s_.size()) - 2;
  CellSolution best_inside, best_any;
  int in_ci = -1, in_cj = -1, any_ci = -1, any_cj = -1;
  auto try_cell = [&](int ci, int cj) {
    CellSolution s;
    s.inside = solve_cell(ci, cj, rd_dc, rd_ac, s.u, s.v, s.residual);
    if (s.inside && s.residual < best_inside.residual) {
      best_inside = s;
      in_ci = ci;
      in_cj = cj;
    }
    if (s.residual < best_any.residual) {
      best_any = s;
      any_ci = ci;
      any_cj = cj;
    }
  };

  for (int radius = 1; radius <= 2 && in_ci < 0; ++radius) {
    for (int ci = std::max(0, i - radius); ci <= std::min(max_ci, i + radius - 1); ++ci)
      for (int cj = std::max(0, j - radius); cj <= std::min(max_cj, j + radius - 1); ++cj)
        try_cell(ci, cj);
  }
  if (in_ci < 0) {
    // Rare: the containing cell is not adjacent to the nearest node. Scan cells whose
    // reflectance bounding box holds the query.
    for (int ci = 0; ci <= max_ci; ++ci) {
      for (int cj = 0; cj <= max_cj; ++cj) {
        const auto& a = at(ci, cj);
        const auto& b = at(ci + 1, cj);
        const auto& c = at(ci, cj + 1);
        const auto& d = at(ci + 1, cj + 1);
        const double lo_dc = std::min({a.rd_dc, b.rd_dc, c.rd_dc, d.rd_dc});
        const double hi_dc = std::max({a.rd_dc, b.rd_dc, c.rd_dc, d.rd_dc});
        const double lo_ac = std::min({a.rd_ac, b.rd_ac, c.rd_ac, d.rd_ac});
        const double hi_ac = std::max({a.rd_ac, b.rd_ac, c.rd_ac, d.rd_ac});
        if (rd_dc < lo_dc || rd_dc > hi_dc || rd_ac < lo_ac || rd_ac > hi_ac) continue;
        try_cell(ci, cj);
      }
    }
  }

  if (in_ci >= 0) {
    result.props = props_at(in_ci, in_cj, best_inside.u, best_inside.v);
  } else {
    result.out_of_range = true;
    result.props = props_at(any_ci, any_cj, best_any.u, best_any.v);
  }
  return result;
}

DiffusionLut build_lut(const LutSpec& spec) {
  auto mu_a = make_grid(spec.mu_a, spec.n_mu_a, spec.mu_a_spacing);
  auto mu_s = make_grid(spec.mu_s_prime, spec.n_mu_s, spec.mu_s_spacing);
  std::vector<ReflectanceNode> table(mu_a.size() * mu_s.size());
  for (std::size_t i = 0; i < mu_a.size(); ++i) {
    for (std::size_t j = 0; j < mu_s.size(); ++j) {
      const auto pair =
          reflectance_pair({mu_a[i], mu_s[j], 660.0}, spec.fx, spec.refractive_index);
      table[i * mu_s.size() + j] = {pair.rd_dc, pair.rd_ac};
    }
  }
  return DiffusionLut(spec.fx, spec.refractive_index, std::move(mu_a), std::move(mu_s),
                      std::move(table));
}

InversionResult invert_lut(const DiffusionLut& lut, const DiffuseReflectancePair& measured) {
  require(measured.fx == lut.fx(), "measured spatial frequency does not match the LUT");
  require(std::isfinite(measured.rd_dc) && std::isfinite(measured.rd_ac),
          "measured reflectance must be finite");
  return lut.invert(measured.rd_dc, measured.rd_ac);
}

std::vector<char> encode_lut(const DiffusionLut& lut) {
  io::ByteWriter w;
  w.bytes("SFLU");
  w.put<std::uint16_t>(kLutVersion);
  w.put<double>(lut.fx().per_mm());
  w.put<double>(lut.refractive_index());
  w.put<std::uint32_t>(static_cast<std::uint32_t>(lut.mu_a_grid().size()));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(lut.mu_s_grid().size()));
  for (double g : lut.mu_a_grid()) w.put<double>(g);
  for (double g : lut.mu_s_grid()) w.put<double>(g);
  for (const auto& node : lut.table()) {
    w.put<double>(node.rd_dc);
    w.put<double>(node.rd_ac);
  }
  return w.take();
}

DiffusionLut decode_lut(std::span<const char> bytes) {
  io::ByteReader r(bytes, "SFLU");
  r.expect_magic("SFLU");
  const auto version = r.get<std::uint16_t>("version");
  if (version != kLutVersion) r.error("unsupported version " + std::to_string(version));
  const double fx = r.get<double>("fx");
  const double n = r.get<double>("refractive index");
  const auto na = r.get<std::uint32_t>("mu_a grid length");
  const auto ns = r.get<std::uint32_t>("mu_s grid length");
  const std::size_t payload = (static_cast<std::size_t>(na) + ns +
                               2 * static_cast<std::size_t>(na) * ns) * sizeof(double);
  r.need(payload, "grids and table");
  if (r.remaining() != payload) r.error("trailing bytes after table");
  std::vector<double> mu_a(na), mu_s(ns);
  for (auto& g : mu_a) g = r.get<double>("mu_a grid");
  for (auto& g : mu_s) g = r.get<double>("mu_s grid");
  std::vector<ReflectanceNode> table(static_cast<std::size_t>(na) * ns);
  for (auto& node : table) {
    node.rd_dc = r.get<double>("table");
    node.rd_ac = r.get<double>("table");
  }
  try {
    return DiffusionLut(SpatialFrequency{fx}, n, std::move(mu_a), std::move(mu_s),
                        std::move(table));
  } catch (const Error& e) {
    fail(ErrorKind::parse, std::string("SFLU: invalid contents: ") + e.what());
  }
}

void write_lut(const std::filesystem::path& path, const DiffusionLut& lut) {
  io::write_file_atomic(path, encode_lut(lut));
}

DiffusionLut read_lut(const std::filesystem::path& path) { return decode_lut(io::read_file(path)); }

void write_lut_csv(std::ostream& out, const DiffusionLut& lut) {
  out << "mu_a,mu_s_prime,rd_dc,rd_ac\n";
  out.precision(17);
  for (std::size_t i = 0; i < lut.mu_a_grid().size(); ++i)
    for (std::size_t j = 0; j < lut.mu_s_grid().size(); ++j) {
      const auto& node = lut.at(static_cast<int>(i), static_cast<int>(j));
      out << lut.mu_a_grid()[i] << ',' << lut.mu_s_grid()[j] << ',' << node.rd_dc << ','
          << node.rd_ac << '\n';
    }
}

}  // namespace sfdi
