#include "sfdi/clinical.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>
#include <random>

#include "sfdi/error.hpp"

namespace sfdi {
namespace {

std::mt19937_64 make_engine(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  return std::mt19937_64(seq);
}

double feature_variance(double mean, double std, double rel_err) {
  return std * std + (rel_err * mean) * (rel_err * mean);
}

// Sums over each class kept separate so that swapping the labels mirrors every operation.
struct Batch {
  std::vector<Sample> pos, neg;
};

double objective(const Batch& z, const std::array<double, 2>& w, double b, double lambda) {
  double loss = 0.0;
  for (const Sample& x : z.pos) loss += std::max(0.0, 1.0 - (w[0] * x[0] + w[1] * x[1] + b));
  double loss_neg = 0.0;
  for (const Sample& x : z.neg) loss_neg += std::max(0.0, 1.0 + (w[0] * x[0] + w[1] * x[1] + b));
  const double n = static_cast<double>(z.pos.size() + z.neg.size());
  return 0.5 * lambda * (w[0] * w[0] + w[1] * w[1]) + (loss + loss_neg) / n;
}

}  // namespace

void TissueClassStats::validate() const {
  require(std::isfinite(mean_mu_a) && mean_mu_a > 0.0 && std::isfinite(mean_mu_s) &&
              mean_mu_s > 0.0,
          "tissue class '" + name + "' needs positive means");
  require(std::isfinite(std_mu_a) && std_mu_a >= 0.0 && std::isfinite(std_mu_s) && std_mu_s >= 0.0,
          "tissue class '" + name + "' needs non-negative stds");
}

void DeviceNoiseModel::validate() const {
  require(std::isfinite(rel_err_mu_a) && rel_err_mu_a >= 0.0 && std::isfinite(rel_err_mu_s) &&
              rel_err_mu_s >= 0.0,
          "device noise terms must be non-negative");
}

LogNormalParams lognormal_params(double mean, double variance) {
  require(std::isfinite(mean) && mean > 0.0, "log-normal mean must be positive");
  require(std::isfinite(variance) && variance >= 0.0, "log-normal variance must be non-negative");
  const double s2 = std::log1p(variance / (mean * mean));
  return {std::log(mean) - 0.5 * s2, std::sqrt(s2)};
}

std::vector<Sample> sample_class(const TissueClassStats& stats, const DeviceNoiseModel& noise,
                                 std::size_t n, std::uint64_t seed) {
  stats.validate();
  noise.validate();
  require(n >= 1, "sample count must be >= 1");
  const double va = feature_variance(stats.mean_mu_a, stats.std_mu_a, noise.rel_err_mu_a);
  const double vs = feature_variance(stats.mean_mu_s, stats.std_mu_s, noise.rel_err_mu_s);
  const LogNormalParams pa = lognormal_params(stats.mean_mu_a, va);
  const LogNormalParams ps = lognormal_params(stats.mean_mu_s, vs);

  auto engine = make_engine(seed, 0x7155E);
  std::normal_distribution<double> unit;
  std::vector<Sample> out(n);
  for (Sample& s : out) {
    const double za = unit(engine);
    const double zs = unit(engine);
    s[0] = va == 0.0 ? stats.mean_mu_a : std::exp(pa.mu + pa.sigma * za);
    s[1] = vs == 0.0 ? stats.mean_mu_s : std::exp(ps.mu + ps.sigma * zs);
  }
  return out;
}

double ClassifierModel::decision(const Sample& s) const {
  double d = bias;
  for (int i = 0; i < 2; ++i) d += weights[i] * (s[i] - feature_mean[i]) / feature_scale[i];
  return d;
}

bool ClassifierModel::predict(const Sample& s) const {
  return degenerate ? majority : decision(s) > 0.0;
}

ClassifierModel train_svm(std::span<const Sample> positives, std::span<const Sample> negatives,
                          const SvmConfig& config) {
  require(positives.size() >= 2 && negatives.size() >= 2, "SVM needs at least two samples per class");
  require(config.c > 0.0 && config.max_iterations >= 1 && config.learning_rate > 0.0,
          "invalid SVM hyperparameters");
  for (auto set : {positives, negatives})
    for (const Sample& s : set)
      require(std::isfinite(s[0]) && std::isfinite(s[1]), "SVM samples must be finite");

  ClassifierModel model;
  const double n = static_cast<double>(positives.size() + negatives.size());
  for (int i = 0; i < 2; ++i) {
    double sp = 0.0, sn = 0.0;
    for (const Sample& s : positives) sp += s[i];
    for (const Sample& s : negatives) sn += s[i];
    const double mean = (sp + sn) / n;
    double qp = 0.0, qn = 0.0;
    for (const Sample& s : positives) qp += (s[i] - mean) * (s[i] - mean);
    for (const Sample& s : negatives) qn += (s[i] - mean) * (s[i] - mean);
    const double sd = std::sqrt((qp + qn) / n);
    model.feature_mean[i] = mean;
    model.feature_scale[i] = sd > 0.0 ? sd : 1.0;
  }

  std::vector<Sample> sp(positives.begin(), positives.end());
  std::vector<Sample> sn(negatives.begin(), negatives.end());
  std::sort(sp.begin(), sp.end());
  std::sort(sn.begin(), sn.end());
  if (sp == sn) {
    model.degenerate = true;
    model.majority = positives.size() > negatives.size();
    return model;
  }

  Batch z;
  auto standardize = [&](const Sample& s) {
    return Sample{(s[0] - model.feature_mean[0]) / model.feature_scale[0],
                  (s[1] - model.feature_mean[1]) / model.feature_scale[1]};
  };
  for (const Sample& s : positives) z.pos.push_back(standardize(s));
  for (const Sample& s : negatives) z.neg.push_back(standardize(s));

  const double lambda = 1.0 / (config.c * n);
  std::array<double, 2> w{};
  double b = 0.0;
  std::array<double, 2> best_w = w;
  double best_b = b;
  double best = objective(z, w, b, lambda);
  for (int t = 1; t <= config.max_iterations; ++t) {
    std::array<double, 2> gp{}, gn{};
    double cp = 0.0, cn = 0.0;
    for (const Sample& x : z.pos)
      if (w[0] * x[0] + w[1] * x[1] + b < 1.0) {
        gp[0] += x[0];
        gp[1] += x[1];
        cp += 1.0;
      }
    for (const Sample& x : z.neg)
      if (w[0] * x[0] + w[1] * x[1] + b > -1.0) {
        gn[0] += x[0];
        gn[1] += x[1];
        cn += 1.0;
      }
    const std::array<double, 2> gw{lambda * w[0] - (gp[0] - gn[0]) / n,
                                   lambda * w[1] - (gp[1] - gn[1]) / n};
    const double gb = -(cp - cn) / n;
    if (std::sqrt(gw[0] * gw[0] + gw[1] * gw[1] + gb * gb) < config.gradient_tolerance) break;
    const double step = config.learning_rate / std::sqrt(static_cast<double>(t));
    w[0] -= step * gw[0];
    w[1] -= step * gw[1];
    b -= step * gb;
    const double f = objective(z, w, b, lambda);
    if (f < best) {
      best = f;
      best_w = w;
      best_b = b;
    }
  }
  if (!std::isfinite(best)) fail(ErrorKind::numerical, "SVM training diverged");
  model.weights = best_w;
  model.bias = best_b;
  return model;
}

PerformanceReport evaluate(const ClassifierModel& model, std::span<const Sample> positives,
                           std::span<const Sample> negatives) {
  require(!positives.empty() && !negatives.empty(), "validation sets must be non-empty");
  PerformanceReport r;
  for (const Sample& s : positives) (model.predict(s) ? r.true_positive : r.false_negative)++;
  for (const Sample& s : negatives) (model.predict(s) ? r.false_positive : r.true_negative)++;
  r.sensitivity = static_cast<double>(r.true_positive) / static_cast<double>(positives.size());
  r.specificity = static_cast<double>(r.true_negative) / static_cast<double>(negatives.size());
  r.n_validation = positives.size() + negatives.size();
  return r;
}

AsgeVerdict asge_check(const PerformanceReport& report) {
  AsgeVerdict v;
  v.sensitivity_margin = report.sensitivity - kAsgeSensitivity;
  v.specificity_margin = report.specificity - kAsgeSpecificity;
  v.pass = report.sensitivity >= kAsgeSensitivity && report.specificity >= kAsgeSpecificity;
  return v;
}

double time_to_three_frames(double usable_rate, double prob) {
  require(std::isfinite(usable_rate) && usable_rate > 0.0, "usable frame rate must be positive");
  require(prob > 0.0 && prob < 1.0, "target probability must be in (0, 1)");
  // P(N >= 3) for N ~ Poisson(m) rises monotonically in m; bisect on the expected count.
  auto shortfall = [prob](double m) {
    return std::exp(-m) * (1.0 + m + 0.5 * m * m) - (1.0 - prob);
  };
  double lo = 0.0, hi = 1.0;
  while (shortfall(hi) > 0.0) hi *= 2.0;
  for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    (shortfall(mid) > 0.0 ? lo : hi) = mid;
  }
  return hi / usable_rate;
}

std::vector<ClassComparison> run_protocol(const TissueClassStats& healthy,
                                          std::span<const TissueClassStats> diseases,
                                          const ProtocolConfig& config) {
  require(!diseases.empty(), "protocol needs at least one disease class");
  std::seed_seq seq{static_cast<std::uint32_t>(config.seed),
                    static_cast<std::uint32_t>(config.seed >> 32)};
  std::vector<std::uint64_t> seeds(2 + 2 * diseases.size());
  {
    std::vector<std::uint32_t> raw(seeds.size() * 2);
    seq.generate(raw.begin(), raw.end());
    for (std::size_t i = 0; i < seeds.size(); ++i)
      seeds[i] = (static_cast<std::uint64_t>(raw[2 * i]) << 32) | raw[2 * i + 1];
  }
  const auto healthy_train = sample_class(healthy, config.noise, config.n_train, seeds[0]);
  const auto healthy_val = sample_class(healthy, config.noise, config.n_validation, seeds[1]);

  std::vector<ClassComparison> out;
  for (std::size_t d = 0; d < diseases.size(); ++d) {
    const auto train = sample_class(diseases[d], config.noise, config.n_train, seeds[2 + 2 * d]);
    const auto val = sample_class(diseases[d], config.noise, config.n_validation, seeds[3 + 2 * d]);
    const ClassifierModel model = train_svm(train, healthy_train, config.svm);
    PerformanceReport report = evaluate(model, val, healthy_val);
    report.n_train = train.size() + healthy_train.size();
    report.seed = config.seed;
    out.push_back({healthy.name, diseases[d].name, report, asge_check(report)});
  }
  return out;
}

void write_report_csv(std::ostream& out, std::span<const ClassComparison> results) {
  out << "healthy,disease,sensitivity,specificity,tp,fn,tn,fp,n_train,n_validation,seed,asge_pass,"
         "sensitivity_margin,specificity_margin\n";
  out << std::setprecision(9);
  for (const auto& r : results) {
    const auto& p = r.report;
    out << r.healthy << ',' << r.disease << ',' << p.sensitivity << ',' << p.specificity << ','
        << p.true_positive << ',' << p.false_negative << ',' << p.true_negative << ','
        << p.false_positive << ',' << p.n_train << ',' << p.n_validation << ',' << p.seed << ','
        << (r.verdict.pass ? 1 : 0) << ',' << r.verdict.sensitivity_margin << ','
        << r.verdict.specificity_margin << '\n';
  }
}

void write_report_text(std::ostream& out, std::span<const ClassComparison> results) {
  out << std::fixed << std::setprecision(1);
  for (const auto& r : results) {
    out << r.healthy << " vs " << r.disease << ": sensitivity " << 100.0 * r.report.sensitivity
        << "%, specificity " << 100.0 * r.report.specificity << "% -> ASGE "
        << (r.verdict.pass ? "PASS" : "FAIL") << " (margins " << std::showpos
        << 100.0 * r.verdict.sensitivity_margin << ", " << 100.0 * r.verdict.specificity_margin
        << std::noshowpos << " points)\n";
  }
  out << std::defaultfloat;
}

}  // namespace sfdi
