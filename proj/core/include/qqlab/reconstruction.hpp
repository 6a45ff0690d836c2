#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "qqlab/error.hpp"
#include "qqlab/measurement.hpp"
#include "qqlab/state.hpp"

namespace qqlab {

enum class Scenario { kZeroC, kSingleC, kGeneral, kZeroBPlus };
std::string_view to_string(Scenario s) noexcept;

enum class FitKind { kLinear, kParabola, kFlat };
std::string_view to_string(FitKind k) noexcept;

// Thrown when the record set lacks configurations the inversion needs.
// needed() is the measurement plan for the missing part.
class MissingRecords : public Error {
 public:
  MissingRecords(std::vector<MeasurementConfig> needed, const std::string& message);

  const std::vector<MeasurementConfig>& needed() const noexcept { return needed_; }

 private:
  std::vector<MeasurementConfig> needed_;
};

// A relative frequency with its binomial standard error (zero for exact
// records) and the index of the record it was read from.
struct Measured {
  double value = 0.0;
  double std_error = 0.0;
  std::uint64_t n_total = 0;
  std::size_t record = 0;

  bool exact() const noexcept { return n_total == 0; }
};

// Count records addressed by physical polarizer angle. Any record whose
// channel axes (or their orthogonal complements) match the requested angles
// modulo pi answers the query; frequency-resolved records are marginalized
// for frequency-blind queries. w(t1|t2) = w(t2|t1) is used as a fallback.
class RecordSet {
 public:
  RecordSet() = default;
  explicit RecordSet(std::vector<CountRecord> records);

  void add(CountRecord record);
  const std::vector<CountRecord>& records() const noexcept { return records_; }
  std::size_t size() const noexcept { return records_.size(); }

  // Angles in radians.
  std::optional<Measured> polarization(double theta1, double theta2) const;
  std::optional<Measured> resolved(double theta1, Freq f1, double theta2,
                                   Freq f2) const;

  // Indices of all records usable as HV-frame records.
  std::vector<std::size_t> hv_records() const;

 private:
  std::vector<CountRecord> records_;
};

struct HvMagnitudes {
  double abs_c1 = 0.0;
  double abs_c4 = 0.0;
  // (|B+|^2 + |B-|^2)/2
  double cross = 0.0;
  double se_w_hh = 0.0;
  double se_w_vv = 0.0;
  double se_cross = 0.0;
  // Pooled number of coincidences, 0 for exact records.
  std::uint64_t n_total = 0;
};

// Pools HV-frame records (polarizers at 0 or 90 deg on both channels).
// Throws kEmptyRecord, kInconsistentTotals, kOutOfRange (not an HV record).
HvMagnitudes estimate_hv_magnitudes(std::span<const CountRecord> records);

// Magnitude below which |C1| or |C4| counts as zero: three binomial
// standard errors of |C|^2 (i.e. |C| < 3/sqrt(n+9)), floored at 1e-4.
double zero_threshold(std::uint64_t n_total) noexcept;

struct SlopeEstimate {
  double tan_theta = 0.0;
  double parabola_k = 0.0;
  double alpha0 = 0.0;
  FitKind fit_kind = FitKind::kFlat;
  double w0 = 0.0;
  double w_minus = 0.0;
  double w_plus = 0.0;
  double se_tan = 0.0;
  double se_k = 0.0;
};

// Parabola w(a) = w0 + t a + k a^2 through (-alpha0, w_minus), (0, w0),
// (alpha0, w_plus). Standard errors are used for the fit-kind gates.
SlopeEstimate fit_slope(Measured minus, Measured zero, Measured plus, double alpha0);

// at_h: w_a|a around a = 0; at_v: w_{90+a}|{90+a} around a = 0, both read
// from the frames (-alpha0, -alpha0), (0, 0), (alpha0, alpha0).
struct SlopePair {
  SlopeEstimate at_h;
  SlopeEstimate at_v;
};

// Throws kEmptyRecord if one of the frames is absent, kOutOfRange if
// alpha0 is not in (0, pi/4).
SlopePair estimate_slopes(const RecordSet& records, double alpha0);

// Tangents 2^{3/2} B+ Re(C1) and -2^{3/2} B+ Re(C4) (B+ real) recovered
// without small-angle error from the odd parts of w(+-alpha0). They agree
// with the fitted tan_theta values to O(alpha0^2).
struct Tangents {
  double tan_theta1 = 0.0;
  double tan_theta4 = 0.0;
};
Tangents exact_tangents(const SlopePair& slopes);

Scenario classify_scenario(double abs_c1, double abs_c4,
                           const std::optional<SlopePair>& slopes,
                           double zero_threshold) noexcept;

struct BPlusMagnitudes {
  double b_plus = 0.0;
  double abs_b_minus = 0.0;
};

// |B+|^2 = 2 w_a|a / sin^2(2a). Throws kDegenerateAngle, kOutOfRange.
BPlusMagnitudes reconstruct_zero_c(double w_alpha_alpha, double alpha,
                                   double tolerance = 1e-9);

// |B-| = sqrt(2 (w_135|45 - |C|^2/4)), B+ = sqrt(1 - |C|^2 - |B-|^2) where
// C is the nonzero one of C1, C4. Throws kOutOfRange.
BPlusMagnitudes reconstruct_single_c(double abs_c, double w_135_45,
                                     double tolerance = 1e-9);

struct BPlusRoot {
  double b_plus = 0.0;
  double cos_phi1 = 0.0;
  double cos_phi4 = 0.0;
  // +1: sin(phi1) and sin(phi4) share a sign, -1: opposite signs.
  int branch = 1;
  double residual = 0.0;
};

struct BPlusSolution {
  std::vector<BPlusRoot> roots;
  bool ambiguous = false;
};

// Solves the 45/135 deg equation
//   w_135|45 = |C1 - C4|^2/4 + cross - B+^2/2
// with cos(phi1) = tan1/(2^{3/2}|C1|B+), cos(phi4) = -tan4/(2^{3/2}|C4|B+)
// and cos(phi1 - phi4) = cos1 cos4 +- sin1 sin4, over both branches on the
// feasible interval [B_min, sqrt(2 cross)]. Endpoint values with
// |residual| <= tolerance count as roots. Throws kNoRoot.
BPlusSolution solve_b_plus_general(double abs_c1, double abs_c4, double tan_theta1,
                                   double tan_theta4, double cross, double w_45_135,
                                   double tolerance = 1e-10);

// cos(phi4) with phi1 = 0 and B+ = 0 from the even part of w_a|a.
// alpha0 = 0 uses the small-angle relation k = 2|C1|(|C4| cos phi4 - |C1|);
// alpha0 > 0 inverts w(alpha0) exactly with k = (w(+-alpha0) - w0)/alpha0^2.
struct PhaseEstimate {
  double phi = 0.0;
  double cos_phi = 1.0;
  bool sign_ambiguous = false;
};
PhaseEstimate reconstruct_zero_bplus(double abs_c1, double abs_c4, double parabola_k,
                                     double alpha0 = 0.0, double tolerance = 1e-9);

struct MPSEstimate {
  double abs_c1 = 0.0;
  double abs_c4 = 0.0;
  double b_plus = 0.0;
  double abs_b_minus = 0.0;
  double phi1 = 0.0;
  double phi4 = 0.0;
  Scenario scenario = Scenario::kGeneral;
  bool phi1_sign_ambiguous = false;
  bool phi4_sign_ambiguous = false;
  // Another root of the 45/135 equation fits the records equally well.
  bool b_plus_root_ambiguous = false;

  QutritParams qutrit() const noexcept;
};

enum class PhaseMinusPath { kNone, kBPlusFrame, kRotatedFrame };
std::string_view to_string(PhaseMinusPath p) noexcept;

struct QuquartEstimate {
  MPSEstimate mps;
  double phi_minus = 0.0;
  bool phi_minus_sign_ambiguous = false;
  PhaseMinusPath phase_minus_path = PhaseMinusPath::kNone;
  // Reference phase and cos(phi- - phi_ref) fixed by the designated record.
  double phi_ref = 0.0;
  double cos_phi_minus_rel = 1.0;
  // Residuals keyed by the relation they check.
  std::map<std::string, double> residuals;
  // Indices into the RecordSet that entered the estimate.
  std::vector<std::size_t> consumed;
  // Human-readable name of the inversion that produced B+.
  std::string inversion;

  // Renormalized and canonicalized state.
  QuquartParams to_params() const;
};

// Recovers phi- from a frequency-resolved record taken with both polarizers
// at the same angle alpha, via the ordered probability of
// (alpha, high | alpha + 90, low) = |B+^alpha + B-|^2/4.
// Throws kDegenerate, kOutOfRange.
QuquartEstimate reconstruct_phase_minus(const MPSEstimate& mps,
                                        const CountRecord& freq_record,
                                        double tolerance = 1e-9);

struct ReconstructionOptions {
  double alpha0 = 0.0872664625997164788;  // 5 deg
  // Overrides the data-derived zero gate for |C1|, |C4| when set.
  std::optional<double> zero_threshold;
};

QuquartEstimate reconstruct_full(const RecordSet& records,
                                 const ReconstructionOptions& options = {});

// Configurations sufficient for reconstruct_full on any state: HV frame,
// (+-alpha0, +-alpha0), (45, 45), frequency-resolved (0, 0) and (45, 45),
// and the (0, 45) frequency-resolved record that fixes the sign of phi-.
std::vector<MeasurementConfig> standard_plan(double alpha0, std::uint64_t n_total,
                                             std::uint64_t seed_base = 0);

}  // namespace qqlab
