#pragma once

#include <array>
#include <iosfwd>
#include <optional>
#include <vector>

#include "sfdi/error.hpp"
#include "sfdi/frame_stack.hpp"
#include "sfdi/optics.hpp"

namespace sfdi {

/// Row-averaged, smoothed, background-removed fringe cross-section of one frame.
struct FringeProfile {
  std::vector<double> values;
  double period_px = 0.0;       ///< mean spacing of adjacent maxima
  double fit_period_px = 0.0;   ///< period the phase was projected at
  double phase_deg = 0.0;       ///< phase of the fringe at column 0, [0, 360); NaN if not discernible
  double contrast = 0.0;        ///< max - min of `values`
  double amplitude = 0.0;       ///< fitted sinusoid amplitude
  int maxima = 0;
  bool discernible = false;
};

struct PhaseConfig {
  RowBand band;
  int smoothing_window = 5;
  int background_degree = 4;  ///< polynomial order of the per-profile background model
  double min_fit_r2 = 0.3;    ///< fraction of profile energy the sinusoid must explain
  double min_visibility = 0.004;  ///< fringe amplitude relative to the mean intensity
};

enum class SelectionPolicy {
  first,    ///< earliest usable frame inside each phase window
  closest,  ///< usable frame nearest each target phase
};

struct TrackerConfig {
  PhaseConfig phase;
  double phase_tol_deg = 10.0;
  double contrast_floor = 0.7;    ///< usable iff contrast >= floor * zeroth-frame contrast
  double zeroth_window_s = 1.0;   ///< zeroth frame is picked from this leading interval
  SelectionPolicy policy = SelectionPolicy::first;
};

/// Profile of `frame`. With `period_px` set, the phase is projected at that period instead of
/// the frame's own refined period, so phases of different frames share one reference.
FringeProfile estimate_phase(const ImageF& frame, const PhaseConfig& config = {},
                             std::optional<double> period_px = std::nullopt);

/// Each output frame minus the mean frame of the stack.
FrameStack background_subtract(const FrameStack& stack);

struct FrameTrack {
  double phase_deg = 0.0;  ///< relative to the zeroth frame; NaN if not discernible
  double contrast = 0.0;
  bool discernible = false;
  bool usable = false;
};

struct Tracking {
  int zeroth = -1;  ///< -1 when no discernible frame exists in the leading window
  double period_px = 0.0;
  double zeroth_contrast = 0.0;
  std::vector<FrameTrack> frames;
};

/// Per-frame phase and contrast relative to the highest-contrast frame of the leading window.
Tracking track_frames(const FrameStack& stack, const TrackerConfig& config = {}, int channel = 0);

struct FrameTriplet {
  std::array<int, 3> indices{};
  std::array<double, 3> phases_deg{};  ///< relative to indices[0]; phases_deg[0] == 0
};

struct TripletCandidate {
  double target_deg = 0.0;
  int frame = -1;
  double phase_deg = 0.0;
  double contrast_ratio = 0.0;
  bool usable = false;
};

class NoTripletFound : public Error {
 public:
  NoTripletFound(const std::string& what, std::vector<TripletCandidate> best)
      : Error(ErrorKind::no_triplet, what), best_(std::move(best)) {}
  const std::vector<TripletCandidate>& best_candidates() const noexcept { return best_; }

 private:
  std::vector<TripletCandidate> best_;
};

FrameTriplet select_triplet(const Tracking& tracking, const TrackerConfig& config = {});
FrameTriplet select_triplet(const FrameStack& stack, const TrackerConfig& config = {},
                            int channel = 0);

struct DemodulatedPair {
  MapD m_ac;
  MapD m_dc;
  Mask negative_dc;  ///< pixels whose DC estimate was negative and clipped to zero
  SpatialFrequency fx;
};

/// AC and DC modulation amplitudes of one pixel from three 120-degree-spaced samples.
std::pair<double, double> demodulate_pixel(double i1, double i2, double i3);

DemodulatedPair demodulate(const FrameStack& stack, const FrameTriplet& triplet,
                           SpatialFrequency fx, int channel = 0);

struct UsableRate {
  double frames_per_second = 0.0;
  std::vector<bool> usable;
};

UsableRate usable_frame_rate(const FrameStack& stack, const TrackerConfig& config = {},
                             int channel = 0);

/// CSV audit trail: frame,phase_deg,contrast,usable,selected
void write_selection_report(std::ostream& out, const Tracking& tracking,
                            const std::optional<FrameTriplet>& triplet);

}  // namespace sfdi
