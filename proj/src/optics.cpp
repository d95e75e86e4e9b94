#include "sfdi/optics.hpp"

#include <cmath>
#include <numbers>

#include "sfdi/error.hpp"

namespace sfdi {

void OpticalProperties::validate() const {
  require(std::isfinite(mu_a) && mu_a > 0.0, "mu_a must be finite and positive");
  require(std::isfinite(mu_s_prime) && mu_s_prime > 0.0,
          "mu_s_prime must be finite and positive");
  require(std::isfinite(wavelength_nm) && wavelength_nm > 0.0,
          "wavelength must be finite and positive");
}

SpatialFrequency::SpatialFrequency(double per_mm) : fx_(per_mm) {
  require(std::isfinite(per_mm) && per_mm >= 0.0, "spatial frequency must be finite and >= 0");
}

double effective_reflection(double n) {
  require(std::isfinite(n) && n >= 1.0, "refractive index must be >= 1");
  return -1.440 / (n * n) + 0.710 / n + 0.668 + 0.0636 * n;
}

double diffuse_reflectance(const OpticalProperties& props, SpatialFrequency fx,
                           double refractive_index) {
  props.validate();
  const double r_eff = effective_reflection(refractive_index);
  const double a = (1.0 - r_eff) / (2.0 * (1.0 + r_eff));

  const double mu_tr = props.mu_a + props.mu_s_prime;
  const double albedo = props.mu_s_prime / mu_tr;
  const double k = 2.0 * std::numbers::pi * fx.per_mm();
  const double mu_eff = std::sqrt(3.0 * props.mu_a * mu_tr + k * k);
  const double ratio = mu_eff / mu_tr;

  const double rd = 3.0 * a * albedo / ((ratio + 1.0) * (ratio + 3.0 * a));
  if (!std::isfinite(rd)) fail(ErrorKind::numerical, "diffuse reflectance is not finite");
  return rd;
}

DiffuseReflectancePair reflectance_pair(const OpticalProperties& props, SpatialFrequency fx,
                                        double refractive_index) {
  return {diffuse_reflectance(props, SpatialFrequency{0.0}, refractive_index),
          diffuse_reflectance(props, fx, refractive_index), fx};
}

OpticalProperties wavelength_adjust(const OpticalProperties& props, double from_nm, double to_nm,
                                    const WavelengthShift& shift) {
  props.validate();
  require(std::isfinite(from_nm) && from_nm > 0.0 && std::isfinite(to_nm) && to_nm > 0.0,
          "wavelengths must be positive");
  require(std::isfinite(shift.mu_a_fraction) && shift.mu_a_fraction > -1.0 &&
              std::isfinite(shift.mu_s_fraction) && shift.mu_s_fraction > -1.0,
          "wavelength shift fractions must be finite and > -1");
  OpticalProperties out = props;
  out.mu_a *= 1.0 + shift.mu_a_fraction;
  out.mu_s_prime *= 1.0 + shift.mu_s_fraction;
  out.wavelength_nm = to_nm;
  return out;
}

}  // namespace sfdi
