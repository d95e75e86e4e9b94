#include "sfdi/demod.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <limits>
#include <numbers>
#include <ostream>
#include <sstream>
#include <string>

#include "sfdi/filters.hpp"

namespace sfdi {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double wrap_deg(double deg) {
  double w = std::fmod(deg, 360.0);
  if (w < 0.0) w += 360.0;
  return w >= 360.0 ? 0.0 : w;
}

/// Signed angular difference in (-180, 180].
double angle_diff(double a, double b) {
  double d = std::fmod(a - b, 360.0);
  if (d <= -180.0) d += 360.0;
  if (d > 180.0) d -= 360.0;
  return d;
}

std::vector<double> row_band_mean(const ImageF& frame, const RowBand& band) {
  const auto [first, last] = band.resolve(frame.height());
  std::vector<double> p(static_cast<std::size_t>(frame.width()), 0.0);
  for (int y = first; y < last; ++y)
    for (int x = 0; x < frame.width(); ++x) p[x] += frame(y, x);
  for (auto& v : p) v /= (last - first);
  return p;
}

struct ProfileFit {
  std::vector<double> background;  ///< polynomial part of the fit
  double a = 0.0;                  ///< cos coefficient
  double b = 0.0;                  ///< sin coefficient
  bool ok = false;
};

/// Weighted least squares of p against Legendre polynomials plus an optional sinusoid at k.
class ProfileModel {
 public:
  /// `trim` edge samples get zero weight; a Hann taper covers the rest.
  ProfileModel(std::size_t n, int degree, std::size_t trim)
      : n_(n), degree_(degree), weight_(n, 0.0), legendre_(n, degree + 1) {
    const double span = static_cast<double>(n - 2 * trim);
    for (std::size_t x = 0; x < n; ++x) {
      if (x >= trim && x < n - trim) {
        const double s = std::sin(kPi * (static_cast<double>(x - trim) + 0.5) / span);
        weight_[x] = s * s;
      }
      const double t = n > 1 ? 2.0 * static_cast<double>(x) / static_cast<double>(n - 1) - 1.0 : 0.0;
      legendre_(x, 0) = 1.0;
      if (degree >= 1) legendre_(x, 1) = t;
      for (int d = 1; d < degree; ++d)
        legendre_(x, d + 1) = ((2 * d + 1) * t * legendre_(x, d) - d * legendre_(x, d - 1)) / (d + 1);
    }
  }

  const std::vector<double>& weight() const noexcept { return weight_; }

  ProfileFit fit(const std::vector<double>& p, std::optional<double> k) const {
    const int cols = degree_ + 1 + (k ? 2 : 0);
    Eigen::MatrixXd design(static_cast<Eigen::Index>(n_), cols);
    Eigen::VectorXd rhs(static_cast<Eigen::Index>(n_));
    for (std::size_t x = 0; x < n_; ++x) {
      const double sw = std::sqrt(weight_[x]);
      for (int d = 0; d <= degree_; ++d) design(x, d) = sw * legendre_(x, d);
      if (k) {
        design(x, degree_ + 1) = sw * std::cos(*k * static_cast<double>(x));
        design(x, degree_ + 2) = sw * std::sin(*k * static_cast<double>(x));
      }
      rhs(x) = sw * p[x];
    }
    const Eigen::VectorXd coef = design.colPivHouseholderQr().solve(rhs);
    ProfileFit out;
    out.ok = coef.allFinite();
    out.background.assign(n_, 0.0);
    for (std::size_t x = 0; x < n_; ++x)
      for (int d = 0; d <= degree_; ++d) out.background[x] += coef(d) * legendre_(x, d);
    if (k) {
      out.a = coef(degree_ + 1);
      out.b = coef(degree_ + 2);
    }
    return out;
  }

  /// Weighted energy captured by the sinusoid term of the joint fit at k.
  double explained(const std::vector<double>& p, double k) const {
    const ProfileFit f = fit(p, k);
    double e = 0.0;
    for (std::size_t x = 0; x < n_; ++x) {
      const double s = f.a * std::cos(k * static_cast<double>(x)) + f.b * std::sin(k * static_cast<double>(x));
      const double r = p[x] - f.background[x] - s;
      e -= weight_[x] * r * r;
    }
    return e;
  }

  double spectrum(const std::vector<double>& v, double k) const {
    std::complex<double> acc{0.0, 0.0};
    for (std::size_t x = 0; x < n_; ++x)
      acc += weight_[x] * v[x] * std::polar(1.0, -k * static_cast<double>(x));
    return std::abs(acc);
  }

 private:
  std::size_t n_;
  int degree_;
  std::vector<double> weight_;
  Eigen::MatrixXd legendre_;
};

struct Maxima {
  std::vector<double> positions;
  double period = 0.0;
};

Maxima find_maxima(const std::vector<double>& v) {
  Maxima out;
  const int n = static_cast<int>(v.size());
  const double top = *std::max_element(v.begin(), v.end());
  if (!(top > 0.0)) return out;
  const double threshold = 0.3 * top;
  int x = 0;
  while (x < n) {
    if (v[x] <= 0.0) {
      ++x;
      continue;
    }
    int best = x;
    while (x < n && v[x] > 0.0) {
      if (v[x] > v[best]) best = x;
      ++x;
    }
    if (best == 0 || best == n - 1 || v[best] < threshold) continue;
    const double denom = v[best - 1] - 2.0 * v[best] + v[best + 1];
    const double shift = denom < 0.0 ? 0.5 * (v[best - 1] - v[best + 1]) / denom : 0.0;
    out.positions.push_back(best + std::clamp(shift, -0.5, 0.5));
  }
  if (out.positions.size() < 2) return out;

  std::vector<double> gaps;
  for (std::size_t i = 1; i < out.positions.size(); ++i)
    gaps.push_back(out.positions[i] - out.positions[i - 1]);
  std::vector<double> sorted = gaps;
  std::nth_element(sorted.begin(), sorted.begin() + sorted.size() / 2, sorted.end());
  const double median = sorted[sorted.size() / 2];
  // A gap spanning several median gaps means a weak peak was skipped, not a longer period.
  double periods = 0.0;
  for (double g : gaps) periods += std::max(1.0, std::round(g / median));
  out.period = (out.positions.back() - out.positions.front()) / periods;
  return out;
}

double golden_max(const std::function<double(double)>& f, double lo, double hi) {
  const double r = 0.5 * (std::sqrt(5.0) - 1.0);
  double a = lo, b = hi;
  double c = b - r * (b - a), d = a + r * (b - a);
  double fc = f(c), fd = f(d);
  for (int it = 0; it < 60 && (b - a) > 1e-10 * std::abs(b); ++it) {
    if (fc > fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - r * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + r * (b - a);
      fd = f(d);
    }
  }
  return 0.5 * (a + b);
}

}  // namespace

namespace {

struct BandFit {
  FringeProfile profile;
  double a = 0.0;  ///< cos coefficient of the unsmoothed fit
  double b = 0.0;
};

BandFit analyse_band(const std::vector<double>& band, const PhaseConfig& config,
                     std::optional<double> period_px, std::optional<double> intensity = std::nullopt) {
  require(config.smoothing_window >= 1, "smoothing window must be >= 1");
  require(config.background_degree >= 0, "background degree must be >= 0");
  if (period_px) require(std::isfinite(*period_px) && *period_px > 0.0, "period must be positive");

  // The smoothed profile drives maxima, contrast and discernibility. Under a non-flat envelope
  // smoothing adds a slight chirp, so the phase is projected from the unsmoothed band mean.
  const std::vector<double> p = moving_average(band, config.smoothing_window);
  const std::size_t n = p.size();
  // Where the smoothing window was truncated the profile is biased; leave those samples out.
  const std::size_t trim = static_cast<std::size_t>(config.smoothing_window / 2);
  require(n > 2 * trim + 8, "frame too narrow for the smoothing window");
  const ProfileModel model(n, config.background_degree, trim);

  BandFit result;
  FringeProfile& out = result.profile;
  out.phase_deg = kNaN;

  double k0;
  if (period_px) {
    k0 = 2.0 * kPi / *period_px;
  } else {
    const ProfileFit trend = model.fit(p, std::nullopt);
    std::vector<double> d(n);
    for (std::size_t x = 0; x < n; ++x) d[x] = p[x] - trend.background[x];
    double best_mag = -1.0;
    k0 = 0.0;
    const double nn = static_cast<double>(n);
    for (double f = 1.5 / nn; f <= 0.5; f += 0.25 / nn) {
      const double mag = model.spectrum(d, 2.0 * kPi * f);
      if (mag > best_mag) {
        best_mag = mag;
        k0 = 2.0 * kPi * f;
      }
    }
  }

  ProfileFit fit = model.fit(p, k0);
  out.values.resize(n);
  for (std::size_t x = 0; x < n; ++x) out.values[x] = p[x] - fit.background[x];
  const Maxima maxima = find_maxima(out.values);
  out.maxima = static_cast<int>(maxima.positions.size());
  out.period_px = maxima.period;

  double k = k0;
  if (!period_px && out.maxima >= 2) {
    const double km = 2.0 * kPi / maxima.period;
    k = golden_max([&](double kk) { return model.explained(band, kk); }, 0.92 * km, 1.08 * km);
    fit = model.fit(p, k);
    for (std::size_t x = 0; x < n; ++x) out.values[x] = p[x] - fit.background[x];
  }
  out.fit_period_px = 2.0 * kPi / k;

  const auto [lo, hi] = std::minmax_element(out.values.begin(), out.values.end());
  out.contrast = *hi - *lo;
  out.amplitude = std::hypot(fit.a, fit.b);

  double energy = 0.0, residual = 0.0;
  const auto& w = model.weight();
  for (std::size_t x = 0; x < n; ++x) {
    const double s = fit.a * std::cos(k * static_cast<double>(x)) + fit.b * std::sin(k * static_cast<double>(x));
    energy += w[x] * out.values[x] * out.values[x];
    residual += w[x] * (out.values[x] - s) * (out.values[x] - s);
  }
  const double r2 = energy > 0.0 ? 1.0 - residual / energy : 0.0;
  double level = 0.0;
  for (double v : p) level += std::abs(v);
  level /= static_cast<double>(n);
  // Intensities are normalized to [0, 1]; anything below this is rounding residue.
  const double floor = std::max(1e-9, 1e-6 * level);
  // Envelope shape left over after the background fit can pass as a weak sinusoid.
  const double faint = config.min_visibility * (intensity ? *intensity : level);
  out.discernible = fit.ok && out.maxima >= 2 && out.amplitude > floor && out.amplitude >= faint &&
                    r2 >= config.min_fit_r2;
  const ProfileFit unsmoothed = model.fit(band, k);
  result.a = unsmoothed.a;
  result.b = unsmoothed.b;
  if (out.discernible) out.phase_deg = wrap_deg(std::atan2(-unsmoothed.b, unsmoothed.a) * 180.0 / kPi);
  return result;
}

struct Point {
  double x = 0.0, y = 0.0;
};

std::optional<Point> kasa_centre(const std::vector<Point>& pts) {
  if (pts.size() < 3) return std::nullopt;
  Eigen::MatrixXd a(static_cast<Eigen::Index>(pts.size()), 3);
  Eigen::VectorXd rhs(static_cast<Eigen::Index>(pts.size()));
  for (std::size_t i = 0; i < pts.size(); ++i) {
    a(i, 0) = pts[i].x;
    a(i, 1) = pts[i].y;
    a(i, 2) = 1.0;
    rhs(i) = -(pts[i].x * pts[i].x + pts[i].y * pts[i].y);
  }
  const Eigen::VectorXd c = a.colPivHouseholderQr().solve(rhs);
  if (!c.allFinite()) return std::nullopt;
  return Point{-0.5 * c(0), -0.5 * c(1)};
}

double median_of(std::vector<double> v) {
  std::nth_element(v.begin(), v.begin() + v.size() / 2, v.end());
  return v[v.size() / 2];
}

/// Relative spread (MAD / median) of the distances from `c`; robust to a minority of
/// contrast dropouts, whose points sit inside the circle.
double radial_spread(const std::vector<Point>& pts, Point c) {
  std::vector<double> r;
  for (const Point& p : pts) r.push_back(std::hypot(p.x - c.x, p.y - c.y));
  const double med = median_of(r);
  if (!(med > 0.0)) return std::numeric_limits<double>::infinity();
  for (double& v : r) v = std::abs(v - med);
  return median_of(r) / med;
}

double max_angular_gap(const std::vector<Point>& pts, Point c) {
  std::vector<double> angles;
  for (const Point& p : pts) angles.push_back(std::atan2(p.y - c.y, p.x - c.x));
  std::sort(angles.begin(), angles.end());
  double gap = angles.front() + 2.0 * kPi - angles.back();
  for (std::size_t i = 1; i < angles.size(); ++i) gap = std::max(gap, angles[i] - angles[i - 1]);
  return gap;
}

/// Static fringe-frequency component common to all frames (e.g. speckle texture), as the
/// centre of the circle traced by the per-frame fringe coefficients. Zero unless a fitted
/// centre is well supported and makes the radii clearly more uniform.
Point static_component(const std::vector<Point>& pts) {
  const Point origin{};
  auto centre = kasa_centre(pts);
  if (!centre) return origin;
  std::vector<Point> kept;
  {
    std::vector<double> r;
    for (const Point& p : pts) r.push_back(std::hypot(p.x - centre->x, p.y - centre->y));
    const double med = median_of(r);
    for (std::size_t i = 0; i < pts.size(); ++i)
      if (r[i] >= 0.8 * med && r[i] <= 1.25 * med) kept.push_back(pts[i]);
  }
  centre = kasa_centre(kept);
  if (!centre || kept.size() < 5) return origin;
  if (max_angular_gap(kept, *centre) >= kPi) return origin;
  const double s0 = radial_spread(pts, origin);
  const double s1 = radial_spread(pts, *centre);
  return (s0 > 0.05 && s1 < 0.5 * s0) ? *centre : origin;
}

}  // namespace

FringeProfile estimate_phase(const ImageF& frame, const PhaseConfig& config,
                             std::optional<double> period_px) {
  require(frame.width() >= 8, "frame too narrow for fringe analysis");
  return analyse_band(row_band_mean(frame, config.band), config, period_px).profile;
}

FrameStack background_subtract(const FrameStack& stack) {
  require(stack.frames() >= 2, "background subtraction needs at least two frames");
  const std::size_t per_frame =
      static_cast<std::size_t>(stack.width()) * stack.height() * stack.channels();
  std::vector<double> mean(per_frame, 0.0);
  const auto& in = stack.raw();
  for (int t = 0; t < stack.frames(); ++t)
    for (std::size_t i = 0; i < per_frame; ++i) mean[i] += in[t * per_frame + i];
  for (auto& m : mean) m /= stack.frames();

  FrameStack out(stack.width(), stack.height(), stack.frames(), stack.channels(), stack.frame_rate());
  auto& dst = out.raw();
  for (int t = 0; t < stack.frames(); ++t)
    for (std::size_t i = 0; i < per_frame; ++i)
      dst[t * per_frame + i] = static_cast<float>(in[t * per_frame + i] - mean[i]);
  return out;
}

Tracking track_frames(const FrameStack& stack, const TrackerConfig& config, int channel) {
  require(stack.frames() >= 1, "tracking needs a non-empty stack");
  require(channel >= 0 && channel < stack.channels(), "channel index out of range");
  require(stack.width() >= 8, "frame too narrow for fringe analysis");
  require(config.contrast_floor >= 0.0, "contrast floor must be >= 0");
  require(config.phase_tol_deg >= 0.0 && config.phase_tol_deg < 60.0,
          "phase tolerance must be in [0, 60) degrees");
  const int n = stack.frames();
  Tracking out;
  out.frames.resize(static_cast<std::size_t>(n));

  std::vector<std::vector<double>> bands;
  for (int t = 0; t < n; ++t) bands.push_back(row_band_mean(stack.frame(t, channel), config.phase.band));
  const std::size_t width = bands.front().size();
  std::vector<double> mean(width, 0.0);
  for (const auto& b : bands)
    for (std::size_t x = 0; x < width; ++x) mean[x] += b[x] / n;
  double intensity = 0.0;
  for (double v : mean) intensity += std::abs(v) / static_cast<double>(width);

  const int window = std::clamp(static_cast<int>(std::lround(stack.frame_rate() * config.zeroth_window_s)),
                                1, n);
  auto pick_zeroth = [&](const std::vector<FringeProfile>& profiles) {
    int zeroth = -1;
    for (int t = 0; t < window; ++t)
      if (profiles[t].discernible && (zeroth < 0 || profiles[t].contrast > profiles[zeroth].contrast))
        zeroth = t;
    return zeroth;
  };
  auto minus = [&](const std::vector<double>& a, const std::vector<double>& b) {
    std::vector<double> d(width);
    for (std::size_t x = 0; x < width; ++x) d[x] = a[x] - b[x];
    return d;
  };

  // Period from the background-subtracted frames, where static texture is gone; from the raw
  // frames when the fringe barely moves and subtraction leaves nothing.
  std::vector<FringeProfile> profiles(static_cast<std::size_t>(n));
  int pick = -1;
  if (n >= 2) {
    for (int t = 0; t < window; ++t)
      profiles[t] = analyse_band(minus(bands[t], mean), config.phase, std::nullopt, intensity).profile;
    pick = pick_zeroth(profiles);
  }
  if (pick < 0) {
    for (int t = 0; t < window; ++t) profiles[t] = analyse_band(bands[t], config.phase, std::nullopt).profile;
    pick = pick_zeroth(profiles);
  }
  if (pick < 0) {
    for (auto& f : out.frames) f.phase_deg = kNaN;
    return out;
  }
  out.period_px = profiles[pick].fit_period_px;
  const double k = 2.0 * kPi / out.period_px;

  // The background is the mean band with its fringe-frequency term replaced by the static
  // component, so the time-averaged fringe is not subtracted along with it.
  std::vector<Point> coeffs;
  for (int t = 0; t < n; ++t) {
    const BandFit f = analyse_band(bands[t], config.phase, out.period_px);
    if (n < 2 || analyse_band(minus(bands[t], mean), config.phase, out.period_px, intensity).profile.discernible)
      coeffs.push_back({f.a, f.b});
  }
  const Point c = static_component(coeffs);
  const BandFit mean_fit = analyse_band(mean, config.phase, out.period_px);
  std::vector<double> background = mean;
  for (std::size_t x = 0; x < width; ++x)
    background[x] -= (mean_fit.a - c.x) * std::cos(k * static_cast<double>(x)) +
                     (mean_fit.b - c.y) * std::sin(k * static_cast<double>(x));
  for (int t = 0; t < n; ++t)
    profiles[t] = analyse_band(minus(bands[t], background), config.phase, out.period_px, intensity).profile;

  out.zeroth = pick_zeroth(profiles);
  if (out.zeroth < 0) {
    for (auto& f : out.frames) f.phase_deg = kNaN;
    return out;
  }
  const double phase0 = profiles[out.zeroth].phase_deg;
  out.zeroth_contrast = profiles[out.zeroth].contrast;
  for (int t = 0; t < n; ++t) {
    auto& f = out.frames[t];
    f.discernible = profiles[t].discernible;
    f.contrast = profiles[t].contrast;
    f.phase_deg = f.discernible ? wrap_deg(profiles[t].phase_deg - phase0) : kNaN;
    f.usable = f.discernible && out.zeroth_contrast > 0.0 &&
               f.contrast >= config.contrast_floor * out.zeroth_contrast;
  }
  return out;
}

FrameTriplet select_triplet(const Tracking& tracking, const TrackerConfig& config) {
  const int n = static_cast<int>(tracking.frames.size());
  require(n >= 3, "triplet selection needs at least three frames");
  const std::array<double, 2> targets{120.0, 240.0};

  if (tracking.zeroth < 0)
    throw NoTripletFound("no discernible fringe in the leading window", {});

  FrameTriplet triplet;
  triplet.indices[0] = tracking.zeroth;
  triplet.phases_deg[0] = 0.0;
  std::vector<TripletCandidate> best(2);
  std::string missing;
  for (std::size_t k = 0; k < targets.size(); ++k) {
    best[k].target_deg = targets[k];
    double best_err = std::numeric_limits<double>::infinity();
    int chosen = -1;
    double chosen_err = std::numeric_limits<double>::infinity();
    for (int t = 0; t < n; ++t) {
      if (t == tracking.zeroth) continue;
      const auto& f = tracking.frames[t];
      if (!f.discernible) continue;
      const double err = std::abs(angle_diff(f.phase_deg, targets[k]));
      // Candidate bookkeeping favours usable frames, then phase error.
      const bool better = (f.usable && !best[k].usable) ||
                          (f.usable == best[k].usable && err < best_err);
      if (best[k].frame < 0 || better) {
        best_err = err;
        best[k] = {targets[k], t, f.phase_deg,
                   tracking.zeroth_contrast > 0.0 ? f.contrast / tracking.zeroth_contrast : 0.0,
                   f.usable};
      }
      if (!f.usable || err > config.phase_tol_deg) continue;
      if (config.policy == SelectionPolicy::first) {
        if (chosen < 0) chosen = t;
      } else if (err < chosen_err) {
        chosen = t;
        chosen_err = err;
      }
    }
    if (chosen < 0) {
      std::ostringstream msg;
      msg << (missing.empty() ? "" : "; ") << targets[k] << " deg";
      if (best[k].frame >= 0)
        msg << " (closest: frame " << best[k].frame << " at " << best[k].phase_deg
            << " deg, contrast ratio " << best[k].contrast_ratio << ")";
      missing += msg.str();
      continue;
    }
    triplet.indices[k + 1] = chosen;
    triplet.phases_deg[k + 1] = tracking.frames[chosen].phase_deg;
  }
  if (!missing.empty())
    throw NoTripletFound("no usable frame within tolerance of " + missing, std::move(best));
  return triplet;
}

FrameTriplet select_triplet(const FrameStack& stack, const TrackerConfig& config, int channel) {
  require(stack.frames() >= 3, "triplet selection needs at least three frames");
  return select_triplet(track_frames(stack, config, channel), config);
}

std::pair<double, double> demodulate_pixel(double i1, double i2, double i3) {
  const double d12 = i1 - i2;
  const double d23 = i2 - i3;
  const double d31 = i3 - i1;
  const double ac = std::numbers::sqrt2 / 3.0 * std::sqrt(d12 * d12 + d23 * d23 + d31 * d31);
  const double dc = (i1 + i2 + i3) / 3.0;
  return {ac, dc};
}

DemodulatedPair demodulate(const FrameStack& stack, const FrameTriplet& triplet,
                           SpatialFrequency fx, int channel) {
  require(channel >= 0 && channel < stack.channels(), "channel index out of range");
  for (int idx : triplet.indices)
    require(idx >= 0 && idx < stack.frames(), "triplet frame index out of range");
  require(triplet.indices[0] != triplet.indices[1] && triplet.indices[1] != triplet.indices[2] &&
              triplet.indices[0] != triplet.indices[2],
          "triplet frame indices must be distinct");

  const int w = stack.width();
  const int h = stack.height();
  DemodulatedPair out{MapD(w, h), MapD(w, h), Mask(w, h, 0), fx};
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      auto [ac, dc] = demodulate_pixel(stack.at(triplet.indices[0], y, x, channel),
                                       stack.at(triplet.indices[1], y, x, channel),
                                       stack.at(triplet.indices[2], y, x, channel));
      if (dc < 0.0) {
        out.negative_dc(y, x) = 1;
        dc = 0.0;
      }
      out.m_ac(y, x) = ac;
      out.m_dc(y, x) = dc;
    }
  return out;
}

UsableRate usable_frame_rate(const FrameStack& stack, const TrackerConfig& config, int channel) {
  const Tracking tracking = track_frames(stack, config, channel);
  UsableRate out;
  out.usable.reserve(tracking.frames.size());
  int count = 0;
  for (const auto& f : tracking.frames) {
    out.usable.push_back(f.usable);
    count += f.usable ? 1 : 0;
  }
  out.frames_per_second = stack.frames() > 0 ? stack.frame_rate() * count / stack.frames() : 0.0;
  return out;
}

void write_selection_report(std::ostream& out, const Tracking& tracking,
                            const std::optional<FrameTriplet>& triplet) {
  out << "frame,phase_deg,contrast,usable,selected\n";
  const auto old_precision = out.precision(10);
  for (std::size_t t = 0; t < tracking.frames.size(); ++t) {
    const auto& f = tracking.frames[t];
    const bool selected =
        triplet && std::find(triplet->indices.begin(), triplet->indices.end(),
                             static_cast<int>(t)) != triplet->indices.end();
    out << t << ',';
    if (f.discernible) out << f.phase_deg;
    out << ',' << f.contrast << ',' << (f.usable ? 1 : 0) << ',' << (selected ? 1 : 0) << '\n';
  }
  out.precision(old_precision);
}

}  // namespace sfdi
