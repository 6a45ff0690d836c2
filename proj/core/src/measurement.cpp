#include "qqlab/measurement.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <boost/random/binomial_distribution.hpp>
#include <fmt/format.h>

#include "qqlab/error.hpp"

namespace qqlab {
namespace {

constexpr double kSqrt2 = std::numbers::sqrt2;

// Real polarization vector {H, V} components for a polarizer at angle theta
// (pol = 0) or theta + 90 deg (pol = 1).
std::array<double, 2> axis(double theta, int pol) noexcept {
  const double t = theta + (pol == 1 ? 0.5 * std::numbers::pi : 0.0);
  return {std::cos(t), std::sin(t)};
}

OutcomeDistribution four_outcomes(double w_aa, double w_ao, double w_oa,
                                  double w_oo) {
  OutcomeDistribution d;
  d.frequency_resolved = false;
  d.outcomes = outcome_set(false);
  d.probabilities = {w_aa, w_ao, w_oa, w_oo};
  return d;
}

}  // namespace

std::string_view to_string(FrequencyFilter f) noexcept {
  switch (f) {
    case FrequencyFilter::kNone: return "none";
    case FrequencyFilter::kHigh: return "h";
    case FrequencyFilter::kLow: return "l";
  }
  return "none";
}

FrequencyFilter parse_filter(std::string_view text) {
  if (text == "none" || text.empty()) return FrequencyFilter::kNone;
  if (text == "h") return FrequencyFilter::kHigh;
  if (text == "l") return FrequencyFilter::kLow;
  throw Error(ErrorCode::kParse, fmt::format("unknown frequency filter '{}'", text));
}

double normalize_angle(double angle) noexcept {
  double a = std::fmod(angle, std::numbers::pi);
  if (a < 0.0) a += std::numbers::pi;
  // Snap values within rounding of pi back to zero.
  if (std::numbers::pi - a < 1e-13) a = 0.0;
  return a;
}

PolarizerSetting make_setting(int channel, double angle, FrequencyFilter filter) {
  if (channel != 1 && channel != 2) {
    throw Error(ErrorCode::kOutOfRange, fmt::format("invalid channel {}", channel));
  }
  if (!std::isfinite(angle)) {
    throw Error(ErrorCode::kOutOfRange, "polarizer angle must be finite");
  }
  return {channel, normalize_angle(angle), filter};
}

MeasurementConfig make_config(double angle1, double angle2,
                              std::uint64_t n_total, std::uint64_t seed,
                              FrequencyFilter filter1, FrequencyFilter filter2) {
  MeasurementConfig c;
  c.ch1 = make_setting(1, angle1, filter1);
  c.ch2 = make_setting(2, angle2, filter2);
  c.n_total = n_total;
  c.seed = seed;
  return c;
}

std::string Outcome::label() const {
  auto one = [](int pol, int freq) {
    std::string s(1, pol == 0 ? 'a' : 'o');
    if (freq == 0) s += 'h';
    if (freq == 1) s += 'l';
    return s;
  };
  return one(pol1, freq1) + "|" + one(pol2, freq2);
}

Outcome Outcome::parse(std::string_view label) {
  const auto bar = label.find('|');
  auto one = [&](std::string_view part, int& pol, int& freq) {
    if (part.empty() || part.size() > 2 || (part[0] != 'a' && part[0] != 'o')) {
      throw Error(ErrorCode::kParse, fmt::format("bad outcome label '{}'", label));
    }
    pol = part[0] == 'a' ? 0 : 1;
    freq = -1;
    if (part.size() == 2) {
      if (part[1] == 'h') freq = 0;
      else if (part[1] == 'l') freq = 1;
      else throw Error(ErrorCode::kParse, fmt::format("bad outcome label '{}'", label));
    }
  };
  if (bar == std::string_view::npos) {
    throw Error(ErrorCode::kParse, fmt::format("bad outcome label '{}'", label));
  }
  Outcome o;
  one(label.substr(0, bar), o.pol1, o.freq1);
  one(label.substr(bar + 1), o.pol2, o.freq2);
  if ((o.freq1 < 0) != (o.freq2 < 0)) {
    throw Error(ErrorCode::kParse, fmt::format("bad outcome label '{}'", label));
  }
  return o;
}

const std::vector<Outcome>& outcome_set(bool frequency_resolved) {
  static const std::vector<Outcome> pol_only = {
      {0, -1, 0, -1}, {0, -1, 1, -1}, {1, -1, 0, -1}, {1, -1, 1, -1}};
  static const std::vector<Outcome> resolved = [] {
    std::vector<Outcome> v;
    for (int p1 = 0; p1 < 2; ++p1)
      for (int f1 = 0; f1 < 2; ++f1)
        for (int p2 = 0; p2 < 2; ++p2)
          for (int f2 = 0; f2 < 2; ++f2) v.push_back({p1, f1, p2, f2});
    return v;
  }();
  return frequency_resolved ? resolved : pol_only;
}

double OutcomeDistribution::at(const Outcome& o) const {
  const auto it = std::find(outcomes.begin(), outcomes.end(), o);
  if (it == outcomes.end()) {
    throw Error(ErrorCode::kOutOfRange,
                fmt::format("outcome {} not in distribution", o.label()));
  }
  return probabilities[static_cast<std::size_t>(it - outcomes.begin())];
}

double OutcomeDistribution::total() const noexcept {
  double s = 0.0;
  for (double p : probabilities) s += p;
  return s;
}

OutcomeDistribution conditional_probabilities_hv(const QuquartParams& q) {
  const double cross = 0.5 * (std::norm(q.b_plus) + std::norm(q.b_minus));
  return four_outcomes(std::norm(q.c1), cross, cross, std::norm(q.c4));
}

OutcomeDistribution conditional_probabilities_rotated(const QuquartParams& q,
                                                      double alpha) {
  const double c = std::cos(alpha);
  const double s = std::sin(alpha);
  const Amplitude c1a = c * c * q.c1 + kSqrt2 * c * s * q.b_plus + s * s * q.c4;
  const Amplitude c4a = s * s * q.c1 - kSqrt2 * c * s * q.b_plus + c * c * q.c4;
  const Amplitude bpa = -kSqrt2 * c * s * (q.c1 - q.c4) + std::cos(2 * alpha) * q.b_plus;
  const double cross = 0.5 * (std::norm(bpa) + std::norm(q.b_minus));
  return four_outcomes(std::norm(c1a), cross, cross, std::norm(c4a));
}

OutcomeDistribution freq_resolved_distribution(const QuquartParams& q,
                                               double alpha) {
  MeasurementConfig config;
  config.ch1 = {1, alpha, FrequencyFilter::kHigh};
  config.ch2 = {2, alpha, FrequencyFilter::kLow};
  return outcome_distribution(q, config);
}

double unordered_pair_rate(double ordered_probability) noexcept {
  return kExchangeDegeneracy * ordered_probability;
}

OutcomeDistribution outcome_distribution(const QuquartParams& q,
                                         const MeasurementConfig& config) {
  const PolFreqWaveFunction psi = wave_function(q);
  OutcomeDistribution d;
  d.frequency_resolved = config.frequency_resolved();
  d.outcomes = outcome_set(d.frequency_resolved);
  d.probabilities.reserve(d.outcomes.size());

  // amplitude[p1][p2][w1][w2] after projecting both polarizations.
  Amplitude proj[2][2][2][2] = {};
  for (int p1 = 0; p1 < 2; ++p1) {
    const auto e1 = axis(config.ch1.angle, p1);
    for (int p2 = 0; p2 < 2; ++p2) {
      const auto e2 = axis(config.ch2.angle, p2);
      for (int w1 = 0; w1 < 2; ++w1) {
        for (int w2 = 0; w2 < 2; ++w2) {
          Amplitude a = 0.0;
          for (int s1 = 0; s1 < 2; ++s1)
            for (int s2 = 0; s2 < 2; ++s2)
              a += e1[s1] * e2[s2] * psi(Pol(s1), Freq(w1), Pol(s2), Freq(w2));
          proj[p1][p2][w1][w2] = a;
        }
      }
    }
  }
  for (const Outcome& o : d.outcomes) {
    double p = 0.0;
    for (int w1 = 0; w1 < 2; ++w1) {
      if (o.freq1 >= 0 && o.freq1 != w1) continue;
      for (int w2 = 0; w2 < 2; ++w2) {
        if (o.freq2 >= 0 && o.freq2 != w2) continue;
        p += std::norm(proj[o.pol1][o.pol2][w1][w2]);
      }
    }
    d.probabilities.push_back(p);
  }
  if (config.background > 0.0) {
    const double b = std::clamp(config.background, 0.0, 1.0);
    const double uniform = 1.0 / static_cast<double>(d.probabilities.size());
    for (double& p : d.probabilities) p = (1.0 - b) * p + b * uniform;
  }
  return d;
}

std::optional<double> CountRecord::frequency(const Outcome& o) const {
  const auto it = std::find(outcomes.begin(), outcomes.end(), o);
  if (it == outcomes.end()) return std::nullopt;
  const double v = counts[static_cast<std::size_t>(it - outcomes.begin())];
  return exact() ? v : v / static_cast<double>(config.n_total);
}

void CountRecord::validate() const {
  if (outcomes.empty() || counts.size() != outcomes.size()) {
    throw Error(ErrorCode::kEmptyRecord, "record has no outcome counts");
  }
  double sum = 0.0;
  for (double c : counts) {
    if (c < 0.0 || !std::isfinite(c)) {
      throw Error(ErrorCode::kInconsistentTotals, "negative or non-finite count");
    }
    sum += c;
  }
  const double expected = exact() ? 1.0 : static_cast<double>(config.n_total);
  const double tol = exact() ? 1e-9 : 0.5;
  if (std::abs(sum - expected) > tol) {
    throw Error(ErrorCode::kInconsistentTotals,
                fmt::format("counts sum to {:.17g}, expected {:.17g}", sum, expected));
  }
}

CountRecord exact_record(const QuquartParams& q, MeasurementConfig config) {
  config.n_total = 0;
  const OutcomeDistribution d = outcome_distribution(q, config);
  return {config, d.outcomes, d.probabilities, "exact", "none"};
}

CountRecord simulate_coincidences(const QuquartParams& q,
                                  const MeasurementConfig& config) {
  if (config.exact()) return exact_record(q, config);
  const OutcomeDistribution d = outcome_distribution(q, config);
  Rng rng = make_rng(config.seed);

  CountRecord record{config, d.outcomes, {}, "synthetic", std::string(kRngAlgorithm)};
  record.counts.assign(d.outcomes.size(), 0.0);
  auto remaining = static_cast<std::int64_t>(config.n_total);
  const std::size_t n = d.outcomes.size();
  for (std::size_t i = 0; i + 1 < n && remaining > 0; ++i) {
    double tail = 0.0;
    for (std::size_t j = i + 1; j < n; ++j) tail += d.probabilities[j];
    const double p = d.probabilities[i];
    const double conditional = tail > 0.0 ? std::clamp(p / (p + tail), 0.0, 1.0) : 1.0;
    std::int64_t k = 0;
    if (conditional >= 1.0) {
      k = remaining;
    } else if (conditional > 0.0) {
      boost::random::binomial_distribution<std::int64_t, double> draw(remaining, conditional);
      k = draw(rng);
    }
    record.counts[i] = static_cast<double>(k);
    remaining -= k;
  }
  record.counts.back() += static_cast<double>(remaining);
  return record;
}

}  // namespace qqlab
