#pragma once

#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

#include "sfdi/optics.hpp"

namespace sfdi {

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

enum class GridSpacing { linear, logarithmic };

struct LutSpec {
  SpatialFrequency fx{0.2};
  Interval mu_a{0.001, 0.1};
  Interval mu_s_prime{0.1, 3.0};
  int n_mu_a = 128;
  int n_mu_s = 128;
  GridSpacing mu_a_spacing = GridSpacing::logarithmic;
  GridSpacing mu_s_spacing = GridSpacing::linear;
  double refractive_index = kDefaultRefractiveIndex;
};

struct ReflectanceNode {
  double rd_dc = 0.0;
  double rd_ac = 0.0;
  friend bool operator==(const ReflectanceNode&, const ReflectanceNode&) = default;
};

struct InversionResult {
  OpticalProperties props;
  bool out_of_range = false;
  int node_mu_a = 0;  ///< index of the nearest grid node along mu_a
  int node_mu_s = 0;
};

/// Gridded forward map (mu_a, mu_s') -> (Rd_DC, Rd_AC) at one spatial frequency.
/// Immutable once constructed; queries are reentrant.
class DiffusionLut {
 public:
  DiffusionLut(SpatialFrequency fx, double refractive_index, std::vector<double> mu_a_grid,
               std::vector<double> mu_s_grid, std::vector<ReflectanceNode> table);

  SpatialFrequency fx() const noexcept { return fx_; }
  double refractive_index() const noexcept { return n_; }
  std::span<const double> mu_a_grid() const noexcept { return mu_a_; }
  std::span<const double> mu_s_grid() const noexcept { return mu_s_; }
  std::span<const ReflectanceNode> table() const noexcept { return table_; }
  const ReflectanceNode& at(int i_mu_a, int j_mu_s) const { return table_[index(i_mu_a, j_mu_s)]; }

  /// Set when part of the grid has mu_a >= mu_s', outside diffusion validity.
  bool diffusion_warning() const noexcept { return diffusion_warning_; }

  /// Nearest node in (Rd_DC, Rd_AC); ties go to lower mu_a index, then lower mu_s index.
  std::pair<int, int> nearest_node(double rd_dc, double rd_ac) const;

  InversionResult invert(double rd_dc, double rd_ac) const;

  friend bool operator==(const DiffusionLut& a, const DiffusionLut& b) {
    return a.fx_ == b.fx_ && a.n_ == b.n_ && a.mu_a_ == b.mu_a_ && a.mu_s_ == b.mu_s_ &&
           a.table_ == b.table_;
  }

 private:
  std::size_t index(int i, int j) const noexcept {
    return static_cast<std::size_t>(i) * mu_s_.size() + static_cast<std::size_t>(j);
  }
  void build_index();
  bool solve_cell(int ci, int cj, double dc, double ac, double& u, double& v,
                  double& residual) const;
  OpticalProperties props_at(int ci, int cj, double u, double v) const;

  SpatialFrequency fx_;
  double n_;
  std::vector<double> mu_a_;
  std::vector<double> mu_s_;
  std::vector<ReflectanceNode> table_;
  bool diffusion_warning_ = false;
  bool mu_a_geometric_ = false;
  bool mu_s_geometric_ = false;

  // Uniform bucket grid over the (Rd_DC, Rd_AC) bounding box for nearest-node queries.
  int buckets_ = 1;
  double lo_dc_ = 0, lo_ac_ = 0, cell_dc_ = 1, cell_ac_ = 1;
  std::vector<std::vector<int>> bucket_nodes_;
};

std::vector<double> make_grid(Interval range, int count, GridSpacing spacing);

DiffusionLut build_lut(const LutSpec& spec);

/// Property pair minimizing reflectance distance, refined bilinearly around the nearest node.
InversionResult invert_lut(const DiffusionLut& lut, const DiffuseReflectancePair& measured);

// SFLU binary codec and CSV dump.
std::vector<char> encode_lut(const DiffusionLut& lut);
DiffusionLut decode_lut(std::span<const char> bytes);
void write_lut(const std::filesystem::path& path, const DiffusionLut& lut);
DiffusionLut read_lut(const std::filesystem::path& path);
void write_lut_csv(std::ostream& out, const DiffusionLut& lut);

}  // namespace sfdi
