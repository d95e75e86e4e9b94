#pragma once

namespace sfdi {

inline constexpr double kDefaultRefractiveIndex = 1.4;

/// Bulk optical properties of a turbid medium at one wavelength.
struct OpticalProperties {
  double mu_a = 0.0;          ///< absorption coefficient, 1/mm
  double mu_s_prime = 0.0;    ///< reduced scattering coefficient, 1/mm
  double wavelength_nm = 660.0;

  /// Throws invalid_input unless all fields are finite and positive.
  void validate() const;

  friend bool operator==(const OpticalProperties&, const OpticalProperties&) = default;
};

/// Fringe spatial frequency at the sample plane in cycles/mm. Zero is planar illumination.
class SpatialFrequency {
 public:
  constexpr SpatialFrequency() = default;
  explicit SpatialFrequency(double per_mm);

  constexpr double per_mm() const noexcept { return fx_; }
  constexpr bool is_planar() const noexcept { return fx_ == 0.0; }

  friend constexpr auto operator<=>(const SpatialFrequency&, const SpatialFrequency&) = default;

 private:
  double fx_ = 0.0;
};

/// Planar (DC) and modulated (AC) diffuse reflectance of one point.
struct DiffuseReflectancePair {
  double rd_dc = 0.0;
  double rd_ac = 0.0;
  SpatialFrequency fx;
};

/// Fractional property change between two wavelengths, e.g. -0.14 for a 14% drop.
struct WavelengthShift {
  double mu_a_fraction = 0.0;
  double mu_s_fraction = 0.0;
};

/// Effective internal reflection coefficient of a boundary with relative index n.
double effective_reflection(double refractive_index);

/// Semi-infinite diffusion-approximation reflectance under sinusoidal illumination.
///
/// Rd(fx) = 3 A a' / ((mu_eff'/mu_tr + 1)(mu_eff'/mu_tr + 3A)) with
/// mu_tr = mu_a + mu_s', a' = mu_s'/mu_tr, mu_eff' = sqrt(3 mu_a mu_tr + (2 pi fx)^2)
/// and A = (1 - R_eff) / (2 (1 + R_eff)).
double diffuse_reflectance(const OpticalProperties& props, SpatialFrequency fx,
                           double refractive_index = kDefaultRefractiveIndex);

/// Rd at fx = 0 and at fx.
DiffuseReflectancePair reflectance_pair(const OpticalProperties& props, SpatialFrequency fx,
                                        double refractive_index = kDefaultRefractiveIndex);

/// Multiplicative re-expression of reference properties at another wavelength.
OpticalProperties wavelength_adjust(const OpticalProperties& props, double from_nm, double to_nm,
                                    const WavelengthShift& shift);

}  // namespace sfdi
