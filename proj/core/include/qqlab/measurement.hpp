#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "qqlab/state.hpp"

namespace qqlab {

enum class FrequencyFilter { kNone, kHigh, kLow };

std::string_view to_string(FrequencyFilter f) noexcept;
FrequencyFilter parse_filter(std::string_view text);

// Polarizer (and optional frequency filter) in front of one detector.
// Angle in radians from horizontal, normalized to [0, pi).
struct PolarizerSetting {
  int channel = 1;
  double angle = 0.0;
  FrequencyFilter filter = FrequencyFilter::kNone;
};

PolarizerSetting make_setting(int channel, double angle,
                              FrequencyFilter filter = FrequencyFilter::kNone);

// Angle reduced to [0, pi).
double normalize_angle(double angle) noexcept;

// One coincidence series. n_total = 0 marks an exact-probability record.
// background is the fraction of coincidences spread uniformly over the
// outcomes (accidentals); zero by default.
struct MeasurementConfig {
  PolarizerSetting ch1{1, 0.0, FrequencyFilter::kNone};
  PolarizerSetting ch2{2, 0.0, FrequencyFilter::kNone};
  std::uint64_t n_total = 0;
  std::uint64_t seed = 0;
  double background = 0.0;

  bool frequency_resolved() const noexcept {
    return ch1.filter != FrequencyFilter::kNone ||
           ch2.filter != FrequencyFilter::kNone;
  }
  bool exact() const noexcept { return n_total == 0; }
};

MeasurementConfig make_config(double angle1, double angle2,
                              std::uint64_t n_total, std::uint64_t seed = 0,
                              FrequencyFilter filter1 = FrequencyFilter::kNone,
                              FrequencyFilter filter2 = FrequencyFilter::kNone);

// Detection event of one pair. pol = 0 means the photon passed along the
// channel's polarizer axis, pol = 1 along the orthogonal axis. freq is
// -1 for frequency-blind detection, else 0 (high) or 1 (low).
struct Outcome {
  int pol1 = 0;
  int freq1 = -1;
  int pol2 = 0;
  int freq2 = -1;

  friend bool operator==(const Outcome&, const Outcome&) = default;

  // "a|o", "ah|ol", ...: a = along, o = orthogonal, h/l = frequency.
  std::string label() const;
  static Outcome parse(std::string_view label);
};

// 4 polarization outcomes (a|a, a|o, o|a, o|o) or the 16 polarization-
// frequency outcomes, in a fixed order.
const std::vector<Outcome>& outcome_set(bool frequency_resolved);

struct OutcomeDistribution {
  bool frequency_resolved = false;
  std::vector<Outcome> outcomes;
  std::vector<double> probabilities;

  double at(const Outcome& o) const;
  double total() const noexcept;
};

// w_H|H = |C1|^2, w_V|V = |C4|^2, w_H|V = w_V|H = (|B+|^2 + |B-|^2)/2.
OutcomeDistribution conditional_probabilities_hv(const QuquartParams& q);

// Same four quantities with both polarizers turned by alpha, evaluated from
// the explicit rotated-amplitude formulas.
OutcomeDistribution conditional_probabilities_rotated(const QuquartParams& q,
                                                      double alpha);

// Ordered 16-outcome distribution with both polarizers at alpha.
OutcomeDistribution freq_resolved_distribution(const QuquartParams& q,
                                               double alpha);

// A frequency-resolved coincidence rate in the convention where
// w(alpha,h | alpha+90,l) = |B+^alpha + B-|^2 / 2, i.e. twice the
// normalized ordered probability. The factor accounts for the two
// indistinguishable orderings of the frequency labels.
inline constexpr double kExchangeDegeneracy = 2.0;
double unordered_pair_rate(double ordered_probability) noexcept;

// Exact outcome distribution for arbitrary (possibly different) polarizer
// angles on the two channels, by projecting the full wave function.
OutcomeDistribution outcome_distribution(const QuquartParams& q,
                                         const MeasurementConfig& config);

struct CountRecord {
  MeasurementConfig config;
  std::vector<Outcome> outcomes;
  // Integer counts for sampled records; probabilities when config.exact().
  std::vector<double> counts;
  std::string timestamp;
  std::string rng_algorithm;

  bool exact() const noexcept { return config.exact(); }

  // Relative frequency N/N_tot (or the stored probability).
  std::optional<double> frequency(const Outcome& o) const;

  // Throws kEmptyRecord / kInconsistentTotals.
  void validate() const;
};

// Multinomial draw of n_total coincidences via sequential binomial
// conditioning. Deterministic in config.seed. Exact mode (n_total = 0)
// returns the probabilities instead.
CountRecord simulate_coincidences(const QuquartParams& q,
                                  const MeasurementConfig& config);

CountRecord exact_record(const QuquartParams& q, MeasurementConfig config);

}  // namespace qqlab
