#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace sfdi {

/// Literature statistics of one tissue class at one wavelength, mm^-1.
struct TissueClassStats {
  std::string name;
  double mean_mu_a = 0.0;
  double std_mu_a = 0.0;
  double mean_mu_s = 0.0;
  double std_mu_s = 0.0;
  double wavelength_nm = 660.0;
  void validate() const;
};

/// Fractional measurement error added to each feature's variance as (rel_err * mean)^2.
struct DeviceNoiseModel {
  double rel_err_mu_a = 0.15;
  double rel_err_mu_s = 0.06;
  static DeviceNoiseModel none() { return {0.0, 0.0}; }
  void validate() const;
};

using Sample = std::array<double, 2>;  ///< (mu_a, mu_s')

struct LogNormalParams {
  double mu = 0.0;     ///< mean of the log
  double sigma = 0.0;  ///< std of the log
};

/// Log-domain parameters whose linear-domain mean and variance are `mean` and `variance`.
LogNormalParams lognormal_params(double mean, double variance);

std::vector<Sample> sample_class(const TissueClassStats& stats, const DeviceNoiseModel& noise,
                                 std::size_t n, std::uint64_t seed);

struct SvmConfig {
  double c = 1.0;
  int max_iterations = 10000;
  double gradient_tolerance = 1e-6;
  double learning_rate = 1.0;  ///< step at iteration t is learning_rate / sqrt(t)
};

struct ClassifierModel {
  std::array<double, 2> weights{};
  double bias = 0.0;
  std::array<double, 2> feature_mean{};
  std::array<double, 2> feature_scale{1.0, 1.0};
  bool degenerate = false;  ///< classes indistinguishable; predicts `majority` everywhere
  bool majority = false;

  double decision(const Sample& s) const;
  bool predict(const Sample& s) const;  ///< true = positive (disease) class
};

/// Linear SVM on z-scored features: minimizes 0.5 |w|^2 + C * sum(hinge) by batch subgradient
/// descent, keeping the best iterate.
ClassifierModel train_svm(std::span<const Sample> positives, std::span<const Sample> negatives,
                          const SvmConfig& config = {});

struct PerformanceReport {
  double sensitivity = 0.0;
  double specificity = 0.0;
  std::size_t true_positive = 0, false_negative = 0, true_negative = 0, false_positive = 0;
  std::size_t n_train = 0;
  std::size_t n_validation = 0;
  std::uint64_t seed = 0;

  double balanced_accuracy() const noexcept { return 0.5 * (sensitivity + specificity); }
  friend bool operator==(const PerformanceReport&, const PerformanceReport&) = default;
};

PerformanceReport evaluate(const ClassifierModel& model, std::span<const Sample> positives,
                           std::span<const Sample> negatives);

struct AsgeVerdict {
  bool pass = false;
  double sensitivity_margin = 0.0;  ///< sensitivity - threshold
  double specificity_margin = 0.0;
};

inline constexpr double kAsgeSensitivity = 0.90;
inline constexpr double kAsgeSpecificity = 0.80;

AsgeVerdict asge_check(const PerformanceReport& report);

/// Shortest recording time after which at least three usable frames have arrived with
/// probability `prob`, modelling usable frames as a Poisson process of `usable_rate` per second.
double time_to_three_frames(double usable_rate, double prob = 0.99);

struct ProtocolConfig {
  std::size_t n_train = 500;
  std::size_t n_validation = 500;
  std::uint64_t seed = 1;
  DeviceNoiseModel noise;
  SvmConfig svm;
};

struct ClassComparison {
  std::string healthy;
  std::string disease;
  PerformanceReport report;
  AsgeVerdict verdict;
};

/// One healthy-vs-disease classifier per disease class, trained and validated on fresh samples.
std::vector<ClassComparison> run_protocol(const TissueClassStats& healthy,
                                          std::span<const TissueClassStats> diseases,
                                          const ProtocolConfig& config);

void write_report_csv(std::ostream& out, std::span<const ClassComparison> results);
void write_report_text(std::ostream& out, std::span<const ClassComparison> results);

}  // namespace sfdi
