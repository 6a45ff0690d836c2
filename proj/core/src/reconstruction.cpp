#include "qqlab/reconstruction.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>
#include <utility>

#include <fmt/format.h>

namespace qqlab {
namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kTwoSqrt2 = 2.0 * std::numbers::sqrt2;
constexpr double kDeg = kPi / 180.0;
// Angles closer than this (radians, modulo pi) address the same axis.
constexpr double kAngleMatch = 1e-7;
// |sin(phi)| below this counts as a real phase for sign bookkeeping.
constexpr double kRealPhase = 1e-6;

// 0 if `query` is the record axis, 1 if it is the orthogonal axis, else -1.
int axis_match(double record_angle, double query) noexcept {
  const double d = normalize_angle(query - record_angle);
  if (d < kAngleMatch || kPi - d < kAngleMatch) return 0;
  if (std::abs(d - 0.5 * kPi) < kAngleMatch) return 1;
  return -1;
}

// Relative frequency of the polarization outcome (p1, p2), summed over
// frequencies when the record is frequency resolved.
double marginal(const CountRecord& r, int p1, int p2) {
  double sum = 0.0;
  for (std::size_t i = 0; i < r.outcomes.size(); ++i) {
    if (r.outcomes[i].pol1 == p1 && r.outcomes[i].pol2 == p2) sum += r.counts[i];
  }
  return r.exact() ? sum : sum / static_cast<double>(r.config.n_total);
}

Measured make_measured(double w, const CountRecord& r, std::size_t index) {
  Measured m;
  m.value = w;
  m.n_total = r.config.n_total;
  m.record = index;
  if (!r.exact()) {
    m.std_error = std::sqrt(std::max(w * (1.0 - w), 0.0) /
                            static_cast<double>(r.config.n_total));
  }
  return m;
}

std::optional<Measured> average(std::optional<Measured> a, std::optional<Measured> b) {
  if (!a) return b;
  if (!b) return a;
  Measured m = *a;
  m.value = 0.5 * (a->value + b->value);
  m.std_error = 0.5 * std::hypot(a->std_error, b->std_error);
  return m;
}

// w(t1|t2) averaged with w(t2|t1); the two are equal for a symmetric state.
std::optional<Measured> symmetric(const RecordSet& rs, double t1, double t2) {
  return average(rs.polarization(t1, t2), rs.polarization(t2, t1));
}

double wrap_phase(double phi) noexcept { return std::remainder(phi, 2.0 * kPi); }

double clamp_unit(double x, double tolerance, const char* what) {
  if (!std::isfinite(x) || std::abs(x) > 1.0 + tolerance) {
    throw Error(ErrorCode::kOutOfRange,
                fmt::format("{} = {:.6g} lies outside [-1, 1]", what, x));
  }
  return std::clamp(x, -1.0, 1.0);
}

QuquartParams params_of(const MPSEstimate& m, double phi_minus) {
  QuquartParams q{std::polar(m.abs_c1, m.phi1), Amplitude(m.b_plus, 0.0),
                  std::polar(m.abs_c4, m.phi4), std::polar(m.abs_b_minus, phi_minus)};
  const double n = std::sqrt(q.norm_squared());
  if (n > 0.0) {
    q.c1 /= n;
    q.b_plus /= n;
    q.c4 /= n;
    q.b_minus /= n;
  }
  return q;
}

// Forward-model comparison against a set of records. With full = false the
// frequency-resolved records are compared through their polarization
// marginals only, so the prediction does not depend on phi-.
struct ForwardFit {
  double score = 0.0;
  double rms = 0.0;
  std::vector<double> predicted;
  std::vector<double> tolerance;
};

ForwardFit forward_fit(const QuquartParams& q, const RecordSet& rs,
                       const std::vector<std::size_t>& indices, bool full) {
  ForwardFit f;
  std::size_t count = 0;
  for (std::size_t idx : indices) {
    const CountRecord& r = rs.records()[idx];
    MeasurementConfig cfg = r.config;
    cfg.background = 0.0;
    const bool marginalize = r.config.frequency_resolved() && !full;
    if (marginalize) {
      cfg.ch1.filter = FrequencyFilter::kNone;
      cfg.ch2.filter = FrequencyFilter::kNone;
    }
    const OutcomeDistribution d = outcome_distribution(q, cfg);
    for (std::size_t i = 0; i < d.outcomes.size(); ++i) {
      const Outcome& o = d.outcomes[i];
      const double measured = marginalize ? marginal(r, o.pol1, o.pol2)
                                          : r.frequency(o).value_or(0.0);
      const double p = d.probabilities[i];
      double var = 1.0;
      double tol = 1e-9;
      if (!r.exact()) {
        const double n = static_cast<double>(r.config.n_total);
        var = std::max(p * (1.0 - p), 1.0 / n) / n;
        tol = 2.0 * std::sqrt(var);
      }
      const double diff = p - measured;
      f.score += diff * diff / var;
      f.rms += diff * diff;
      f.predicted.push_back(p);
      f.tolerance.push_back(tol);
      ++count;
    }
  }
  if (count > 0) f.rms = std::sqrt(f.rms / static_cast<double>(count));
  return f;
}

bool distinguishable(const ForwardFit& a, const ForwardFit& b) {
  for (std::size_t i = 0; i < a.predicted.size(); ++i) {
    if (std::abs(a.predicted[i] - b.predicted[i]) > a.tolerance[i]) return true;
  }
  return false;
}

std::vector<std::size_t> all_indices(const RecordSet& rs) {
  std::vector<std::size_t> v(rs.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = i;
  return v;
}

std::vector<std::size_t> resolved_indices(const RecordSet& rs) {
  std::vector<std::size_t> v;
  for (std::size_t i = 0; i < rs.size(); ++i) {
    if (rs.records()[i].config.frequency_resolved()) v.push_back(i);
  }
  return v;
}

std::uint64_t typical_n(const RecordSet& rs) {
  for (const CountRecord& r : rs.records()) {
    if (!r.exact()) return r.config.n_total;
  }
  return 0;
}

MeasurementConfig plan_entry(double a1_deg, double a2_deg, std::uint64_t n,
                             bool resolved = false) {
  return resolved ? make_config(a1_deg * kDeg, a2_deg * kDeg, n, 0,
                                FrequencyFilter::kHigh, FrequencyFilter::kLow)
                  : make_config(a1_deg * kDeg, a2_deg * kDeg, n);
}

std::string describe(const std::vector<MeasurementConfig>& configs) {
  std::string s;
  for (const MeasurementConfig& c : configs) {
    if (!s.empty()) s += ", ";
    s += fmt::format("({:g} deg{}, {:g} deg{})", c.ch1.angle / kDeg,
                     c.ch1.filter == FrequencyFilter::kNone ? "" : " h",
                     c.ch2.angle / kDeg,
                     c.ch2.filter == FrequencyFilter::kNone ? "" : " l");
  }
  return s;
}

[[noreturn]] void missing(std::vector<MeasurementConfig> needed, std::string_view why) {
  const std::string list = describe(needed);
  throw MissingRecords(std::move(needed),
                       fmt::format("{}; measure {}", why, list));
}

// Tolerances used when the data are sampled rather than exact.
struct Tolerances {
  double unit = 1e-9;     // |cos| beyond one, radicands below zero
  double residual = 1e-10;  // accepting an endpoint root
};

Tolerances tolerances(std::uint64_t n) {
  if (n == 0) return {};
  const double sd = 1.0 / std::sqrt(static_cast<double>(n));
  return {std::max(0.25, 30.0 * sd), 2.0 * sd};
}

}  // namespace

std::string_view to_string(Scenario s) noexcept {
  switch (s) {
    case Scenario::kZeroC: return "zero_c";
    case Scenario::kSingleC: return "single_c";
    case Scenario::kGeneral: return "general";
    case Scenario::kZeroBPlus: return "zero_bplus";
  }
  return "general";
}

std::string_view to_string(FitKind k) noexcept {
  switch (k) {
    case FitKind::kLinear: return "linear";
    case FitKind::kParabola: return "parabola";
    case FitKind::kFlat: return "flat";
  }
  return "flat";
}

std::string_view to_string(PhaseMinusPath p) noexcept {
  switch (p) {
    case PhaseMinusPath::kNone: return "none";
    case PhaseMinusPath::kBPlusFrame: return "bplus_frame";
    case PhaseMinusPath::kRotatedFrame: return "rotated_frame";
  }
  return "none";
}

MissingRecords::MissingRecords(std::vector<MeasurementConfig> needed,
                               const std::string& message)
    : Error(ErrorCode::kMissingRecords, message), needed_(std::move(needed)) {}

RecordSet::RecordSet(std::vector<CountRecord> records) : records_(std::move(records)) {}

void RecordSet::add(CountRecord record) { records_.push_back(std::move(record)); }

std::optional<Measured> RecordSet::polarization(double theta1, double theta2) const {
  auto lookup = [&](double t1, double t2, bool resolved) -> std::optional<Measured> {
    for (std::size_t i = 0; i < records_.size(); ++i) {
      const CountRecord& r = records_[i];
      if (r.config.frequency_resolved() != resolved) continue;
      const int p1 = axis_match(r.config.ch1.angle, t1);
      const int p2 = axis_match(r.config.ch2.angle, t2);
      if (p1 < 0 || p2 < 0) continue;
      return make_measured(marginal(r, p1, p2), r, i);
    }
    return std::nullopt;
  };
  for (bool resolved : {false, true}) {
    if (auto m = lookup(theta1, theta2, resolved)) return m;
    if (auto m = lookup(theta2, theta1, resolved)) return m;
  }
  return std::nullopt;
}

std::optional<Measured> RecordSet::resolved(double theta1, Freq f1, double theta2,
                                            Freq f2) const {
  auto lookup = [&](double t1, Freq g1, double t2, Freq g2) -> std::optional<Measured> {
    for (std::size_t i = 0; i < records_.size(); ++i) {
      const CountRecord& r = records_[i];
      if (!r.config.frequency_resolved()) continue;
      const int p1 = axis_match(r.config.ch1.angle, t1);
      const int p2 = axis_match(r.config.ch2.angle, t2);
      if (p1 < 0 || p2 < 0) continue;
      const auto w = r.frequency({p1, static_cast<int>(g1), p2, static_cast<int>(g2)});
      if (!w) continue;
      return make_measured(*w, r, i);
    }
    return std::nullopt;
  };
  if (auto m = lookup(theta1, f1, theta2, f2)) return m;
  return lookup(theta2, f2, theta1, f1);
}

std::vector<std::size_t> RecordSet::hv_records() const {
  std::vector<std::size_t> v;
  for (std::size_t i = 0; i < records_.size(); ++i) {
    const auto& c = records_[i].config;
    if (axis_match(c.ch1.angle, 0.0) >= 0 && axis_match(c.ch2.angle, 0.0) >= 0) {
      v.push_back(i);
    }
  }
  return v;
}

HvMagnitudes estimate_hv_magnitudes(std::span<const CountRecord> records) {
  if (records.empty()) throw Error(ErrorCode::kEmptyRecord, "no HV-frame records");
  const bool exact = records.front().exact();
  double hh = 0.0, hv = 0.0, vh = 0.0, vv = 0.0;
  double n_sum = 0.0;
  bool first = true;
  for (const CountRecord& r : records) {
    r.validate();
    if (r.exact() != exact) {
      throw Error(ErrorCode::kInconsistentTotals,
                  "HV records mix exact probabilities and sampled counts");
    }
    const int h1 = axis_match(r.config.ch1.angle, 0.0);
    const int h2 = axis_match(r.config.ch2.angle, 0.0);
    if (h1 < 0 || h2 < 0) {
      throw Error(ErrorCode::kOutOfRange, "record is not in the HV frame");
    }
    // Outcome pol index that corresponds to H on each channel.
    const double w_hh = marginal(r, h1, h2);
    const double w_hv = marginal(r, h1, 1 - h2);
    const double w_vh = marginal(r, 1 - h1, h2);
    const double w_vv = marginal(r, 1 - h1, 1 - h2);
    if (exact) {
      if (!first && (std::abs(w_hh - hh) > 1e-9 || std::abs(w_vv - vv) > 1e-9 ||
                     std::abs(w_hv - hv) > 1e-9 || std::abs(w_vh - vh) > 1e-9)) {
        throw Error(ErrorCode::kInconsistentTotals,
                    "exact HV records disagree on the probabilities");
      }
      hh = w_hh;
      hv = w_hv;
      vh = w_vh;
      vv = w_vv;
    } else {
      const double n = static_cast<double>(r.config.n_total);
      hh += n * w_hh;
      hv += n * w_hv;
      vh += n * w_vh;
      vv += n * w_vv;
      n_sum += n;
    }
    first = false;
  }
  HvMagnitudes m;
  if (!exact) {
    hh /= n_sum;
    hv /= n_sum;
    vh /= n_sum;
    vv /= n_sum;
    m.n_total = static_cast<std::uint64_t>(n_sum);
    m.se_w_hh = std::sqrt(hh * (1.0 - hh) / n_sum);
    m.se_w_vv = std::sqrt(vv * (1.0 - vv) / n_sum);
    m.se_cross = 0.5 * std::sqrt((hv * (1.0 - hv) + vh * (1.0 - vh)) / n_sum);
  }
  m.abs_c1 = std::sqrt(std::max(hh, 0.0));
  m.abs_c4 = std::sqrt(std::max(vv, 0.0));
  m.cross = 0.5 * (hv + vh);
  return m;
}

double zero_threshold(std::uint64_t n_total) noexcept {
  if (n_total == 0) return 1e-4;
  return std::max(3.0 / std::sqrt(static_cast<double>(n_total) + 9.0), 1e-4);
}

SlopeEstimate fit_slope(Measured minus, Measured zero, Measured plus, double alpha0) {
  if (!(alpha0 > 0.0)) throw Error(ErrorCode::kOutOfRange, "alpha0 must be positive");
  SlopeEstimate s;
  s.alpha0 = alpha0;
  s.w0 = zero.value;
  s.w_minus = minus.value;
  s.w_plus = plus.value;
  s.tan_theta = (plus.value - minus.value) / (2.0 * alpha0);
  s.parabola_k = (plus.value + minus.value - 2.0 * zero.value) / (2.0 * alpha0 * alpha0);
  s.se_tan = std::hypot(plus.std_error, minus.std_error) / (2.0 * alpha0);
  s.se_k = std::sqrt(plus.std_error * plus.std_error + minus.std_error * minus.std_error +
                     4.0 * zero.std_error * zero.std_error) /
           (2.0 * alpha0 * alpha0);
  if (std::abs(s.tan_theta) < std::max(3.0 * s.se_tan, 1e-3)) {
    s.fit_kind = FitKind::kFlat;
  } else if (std::abs(s.parabola_k) * alpha0 <= 0.05 * std::abs(s.tan_theta) ||
             std::abs(s.parabola_k) <= 3.0 * s.se_k) {
    s.fit_kind = FitKind::kLinear;
  } else {
    s.fit_kind = FitKind::kParabola;
  }
  return s;
}

SlopePair estimate_slopes(const RecordSet& records, double alpha0) {
  if (!(alpha0 > 0.0 && alpha0 < 0.25 * kPi)) {
    throw Error(ErrorCode::kOutOfRange, "alpha0 must lie in (0, 45 deg)");
  }
  const double v = 0.5 * kPi;
  auto need = [&](double t) {
    auto m = records.polarization(t, t);
    if (!m) {
      throw Error(ErrorCode::kEmptyRecord,
                  fmt::format("no record at ({:g} deg, {:g} deg)",
                              normalize_angle(t) / kDeg, normalize_angle(t) / kDeg));
    }
    return *m;
  };
  SlopePair p;
  p.at_h = fit_slope(need(-alpha0), need(0.0), need(alpha0), alpha0);
  p.at_v = fit_slope(need(v - alpha0), need(v), need(v + alpha0), alpha0);
  return p;
}

Tangents exact_tangents(const SlopePair& slopes) {
  const double a0 = slopes.at_h.alpha0;
  const double c = std::cos(a0);
  const double s = std::sin(a0);
  const double odd_h = 0.5 * (slopes.at_h.w_plus - slopes.at_h.w_minus);
  const double odd_v = 0.5 * (slopes.at_v.w_plus - slopes.at_v.w_minus);
  // odd_h = 2^{3/2} c s (c^2 X1 + s^2 X4), odd_v = -2^{3/2} c s (s^2 X1 + c^2 X4)
  // with X1 = B+ Re C1, X4 = B+ Re C4.
  const double a = odd_h / (kTwoSqrt2 * c * s);
  const double b = -odd_v / (kTwoSqrt2 * c * s);
  const double det = std::cos(2.0 * a0);
  const double x1 = (c * c * a - s * s * b) / det;
  const double x4 = (c * c * b - s * s * a) / det;
  return {kTwoSqrt2 * x1, -kTwoSqrt2 * x4};
}

Scenario classify_scenario(double abs_c1, double abs_c4,
                           const std::optional<SlopePair>& slopes,
                           double zero_threshold) noexcept {
  const bool z1 = abs_c1 <= zero_threshold;
  const bool z4 = abs_c4 <= zero_threshold;
  if (z1 && z4) return Scenario::kZeroC;
  if (z1 || z4) return Scenario::kSingleC;
  if (slopes && slopes->at_h.fit_kind == FitKind::kFlat &&
      slopes->at_v.fit_kind == FitKind::kFlat) {
    return Scenario::kZeroBPlus;
  }
  return Scenario::kGeneral;
}

BPlusMagnitudes reconstruct_zero_c(double w_alpha_alpha, double alpha, double tolerance) {
  const double s = std::sin(2.0 * alpha);
  if (std::abs(s) < 1e-6) {
    throw Error(ErrorCode::kDegenerateAngle,
                fmt::format("sin(2a) = {:.3g}; B+ is invisible at this angle", s));
  }
  const double b2 = 2.0 * w_alpha_alpha / (s * s);
  if (!std::isfinite(b2) || b2 > 1.0 + tolerance || b2 < -tolerance) {
    throw Error(ErrorCode::kOutOfRange, fmt::format("implied |B+|^2 = {:.6g}", b2));
  }
  const double c = std::clamp(b2, 0.0, 1.0);
  return {std::sqrt(c), std::sqrt(1.0 - c)};
}

BPlusMagnitudes reconstruct_single_c(double abs_c, double w_135_45, double tolerance) {
  const double bm2 = 2.0 * (w_135_45 - 0.25 * abs_c * abs_c);
  if (!std::isfinite(bm2) || bm2 < -tolerance) {
    throw Error(ErrorCode::kOutOfRange, fmt::format("implied |B-|^2 = {:.6g}", bm2));
  }
  const double bm2c = std::max(bm2, 0.0);
  const double bp2 = 1.0 - abs_c * abs_c - bm2c;
  if (bp2 < -tolerance) {
    throw Error(ErrorCode::kOutOfRange, fmt::format("implied B+^2 = {:.6g}", bp2));
  }
  return {std::sqrt(std::max(bp2, 0.0)), std::sqrt(bm2c)};
}

BPlusSolution solve_b_plus_general(double abs_c1, double abs_c4, double tan_theta1,
                                   double tan_theta4, double cross, double w_45_135,
                                   double tolerance) {
  if (!(abs_c1 > 0.0 && abs_c4 > 0.0)) {
    throw Error(ErrorCode::kOutOfRange, "general case needs |C1|, |C4| > 0");
  }
  if (!std::isfinite(tan_theta1) || !std::isfinite(tan_theta4) || !std::isfinite(cross) ||
      !std::isfinite(w_45_135)) {
    throw Error(ErrorCode::kOutOfRange, "non-finite input");
  }
  const double k1 = tan_theta1 / (kTwoSqrt2 * abs_c1);
  const double k4 = -tan_theta4 / (kTwoSqrt2 * abs_c4);
  const double hi = std::sqrt(std::max(2.0 * cross, 0.0));
  double lo = std::max(std::abs(k1), std::abs(k4));

  auto cosines = [&](double b) {
    return std::pair{std::clamp(k1 / b, -1.0, 1.0), std::clamp(k4 / b, -1.0, 1.0)};
  };
  auto residual = [&](double b, int branch) {
    const auto [c1, c4] = cosines(b);
    const double s1s4 = std::sqrt((1.0 - c1 * c1) * (1.0 - c4 * c4));
    const double cos_d = c1 * c4 + branch * s1s4;
    const double diff2 =
        abs_c1 * abs_c1 + abs_c4 * abs_c4 - 2.0 * abs_c1 * abs_c4 * cos_d;
    return 0.25 * diff2 + cross - 0.5 * b * b - w_45_135;
  };
  auto make_root = [&](double b, int branch) {
    const auto [c1, c4] = cosines(b);
    return BPlusRoot{b, c1, c4, branch, residual(b, branch)};
  };

  if (hi <= 0.0) throw Error(ErrorCode::kNoRoot, "cross term vanishes; no room for B+");
  if (lo > hi) {
    // Only the upper end can still be consistent within the tolerance.
    lo = hi;
  }
  lo = std::max(lo, 1e-15 * hi);

  // The two branches join at B_min, where one sine vanishes like
  // sqrt(B - B_min). With B = B_min + s^2 and branch = sign(s) the joined
  // residual is smooth in s, so one scan over s in [-u, u] covers both.
  const double u = std::sqrt(hi - lo);
  auto at = [&](double sv) { return std::pair{lo + sv * sv, sv < 0.0 ? -1 : 1}; };
  auto res_s = [&](double sv) {
    const auto [b, branch] = at(sv);
    return residual(b, branch);
  };
  auto root_s = [&](double sv) {
    const auto [b, branch] = at(sv);
    return make_root(b, branch);
  };

  std::vector<BPlusRoot> found;
  constexpr int kGrid = 128;  // 64 cells per branch
  std::vector<double> ss(kGrid + 1), rs(kGrid + 1);
  for (int i = 0; i <= kGrid; ++i) {
    ss[i] = -u + 2.0 * u * i / kGrid;
    rs[i] = res_s(ss[i]);
  }
  auto bisect = [&](double a, double b, double ra) {
    double mid = 0.5 * (a + b);
    for (int it = 0; it < 200; ++it) {
      mid = 0.5 * (a + b);
      const double rm = res_s(mid);
      if (std::abs(rm) < 1e-12 || b - a < 1e-16) break;
      if ((rm < 0.0) == (ra < 0.0)) {
        a = mid;
        ra = rm;
      } else {
        b = mid;
      }
    }
    found.push_back(root_s(mid));
  };
  for (int i = 0; i < kGrid; ++i) {
    if (rs[i] * rs[i + 1] < 0.0) bisect(ss[i], ss[i + 1], rs[i]);
  }
  // A pair of close roots can hide inside one cell. Where |R| has a local
  // minimum without a sign change, locate the extremum by golden section
  // and bracket both sides if it crosses zero.
  for (int i = 1; i < kGrid; ++i) {
    const double sign = rs[i] < 0.0 ? -1.0 : 1.0;
    if (rs[i - 1] * rs[i] <= 0.0 || rs[i] * rs[i + 1] <= 0.0) continue;
    if (std::abs(rs[i]) > std::abs(rs[i - 1]) || std::abs(rs[i]) > std::abs(rs[i + 1])) continue;
    constexpr double kGolden = 0.6180339887498949;
    double a = ss[i - 1], b = ss[i + 1];
    double x1 = b - kGolden * (b - a), x2 = a + kGolden * (b - a);
    double f1 = sign * res_s(x1), f2 = sign * res_s(x2);
    for (int it = 0; it < 100 && b - a > 1e-15; ++it) {
      if (f1 < f2) {
        b = x2;
        x2 = x1;
        f2 = f1;
        x1 = b - kGolden * (b - a);
        f1 = sign * res_s(x1);
      } else {
        a = x1;
        x1 = x2;
        f1 = f2;
        x2 = a + kGolden * (b - a);
        f2 = sign * res_s(x2);
      }
    }
    const double xm = 0.5 * (a + b);
    const double rm = res_s(xm);
    if (rm * rs[i] < 0.0) {
      bisect(ss[i - 1], xm, rs[i - 1]);
      bisect(xm, ss[i + 1], rm);
    } else if (std::abs(rm) <= std::max(tolerance, 1e-12)) {
      found.push_back(root_s(xm));
    }
  }
  for (double sv : {-u, 0.0, u}) {
    if (std::abs(res_s(sv)) <= tolerance) found.push_back(root_s(sv));
  }

  if (found.empty() && tolerance > 1e-10) {
    // Sampled data: the residual curve may graze zero without crossing.
    double best_s = 0.0;
    double best_abs = INFINITY;
    for (int i = 0; i <= 4 * kGrid; ++i) {
      const double sv = -u + 2.0 * u * i / (4 * kGrid);
      const double r = std::abs(res_s(sv));
      if (r < best_abs) {
        best_abs = r;
        best_s = sv;
      }
    }
    if (best_abs <= tolerance) found.push_back(root_s(best_s));
  }
  if (found.empty()) {
    throw Error(ErrorCode::kNoRoot,
                fmt::format("45/135 equation has no root for B+ in [{:.6g}, {:.6g}]", lo, hi));
  }

  // Merge duplicates: the same B+ from both branches when one phase is real,
  // or an endpoint found twice.
  std::sort(found.begin(), found.end(),
            [](const BPlusRoot& a, const BPlusRoot& b) { return a.b_plus < b.b_plus; });
  BPlusSolution sol;
  for (const BPlusRoot& r : found) {
    bool dup = false;
    for (BPlusRoot& kept : sol.roots) {
      if (std::abs(kept.b_plus - r.b_plus) > 1e-9 * std::max(1.0, hi)) continue;
      const double s1s4 = std::sqrt((1.0 - r.cos_phi1 * r.cos_phi1) *
                                    (1.0 - r.cos_phi4 * r.cos_phi4));
      if (kept.branch == r.branch || s1s4 < 1e-9) {
        if (std::abs(r.residual) < std::abs(kept.residual)) kept = r;
        dup = true;
        break;
      }
    }
    if (!dup) sol.roots.push_back(r);
  }
  sol.ambiguous = sol.roots.size() > 1;
  return sol;
}

PhaseEstimate reconstruct_zero_bplus(double abs_c1, double abs_c4, double parabola_k,
                                     double alpha0, double tolerance) {
  if (!(abs_c1 > 0.0 && abs_c4 > 0.0)) {
    throw Error(ErrorCode::kOutOfRange, "B+ = 0 inversion needs |C1|, |C4| > 0");
  }
  double cos_phi = 0.0;
  if (alpha0 == 0.0) {
    cos_phi = (parabola_k / (2.0 * abs_c1) + abs_c1) / abs_c4;
  } else {
    const double c2 = std::cos(alpha0) * std::cos(alpha0);
    const double s2 = std::sin(alpha0) * std::sin(alpha0);
    const double even = parabola_k * alpha0 * alpha0;
    cos_phi = (even - (c2 * c2 - 1.0) * abs_c1 * abs_c1 - s2 * s2 * abs_c4 * abs_c4) /
              (2.0 * c2 * s2 * abs_c1 * abs_c4);
  }
  PhaseEstimate e;
  e.cos_phi = clamp_unit(cos_phi, tolerance, "cos(phi4)");
  e.phi = std::acos(e.cos_phi);
  e.sign_ambiguous = std::sin(e.phi) > kRealPhase;
  return e;
}

QutritParams MPSEstimate::qutrit() const noexcept {
  return {std::polar(abs_c1, phi1), Amplitude(b_plus, 0.0), std::polar(abs_c4, phi4)};
}

QuquartParams QuquartEstimate::to_params() const {
  const QuquartParams q = params_of(mps, phi_minus);
  return canonicalize(make_ququart(q.c1, q.b_plus, q.c4, q.b_minus, Renormalize::kYes));
}

QuquartEstimate reconstruct_phase_minus(const MPSEstimate& mps,
                                        const CountRecord& freq_record,
                                        double tolerance) {
  const MeasurementConfig& cfg = freq_record.config;
  if (!cfg.frequency_resolved()) {
    throw Error(ErrorCode::kOutOfRange, "phi- needs a frequency-resolved record");
  }
  if (axis_match(cfg.ch1.angle, cfg.ch2.angle) != 0) {
    throw Error(ErrorCode::kOutOfRange,
                "phi- record must have both polarizers at the same angle");
  }
  freq_record.validate();
  const double alpha = cfg.ch1.angle;
  QuquartParams q = params_of(mps, 0.0);
  const double bm = std::abs(q.b_minus);
  q.b_minus = 0.0;
  const Amplitude bpa = rotate_frame(q, alpha).b_plus;
  const double prod = std::abs(bpa) * bm;
  if (prod < 1e-9) {
    throw Error(ErrorCode::kDegenerate,
                fmt::format("|B+^a| |B-| = {:.3g}; phi- is unobservable in this frame", prod));
  }
  // Ordered probability of (a, high | a + 90, low) and its mirror image.
  const auto p1 = freq_record.frequency({0, 0, 1, 1});
  const auto p2 = freq_record.frequency({1, 1, 0, 0});
  if (!p1 || !p2) throw Error(ErrorCode::kEmptyRecord, "record lacks the a,h|o,l outcome");
  const double p = 0.5 * (*p1 + *p2);

  QuquartEstimate e;
  e.mps = mps;
  e.phi_ref = std::arg(bpa);
  e.cos_phi_minus_rel = clamp_unit((4.0 * p - std::norm(bpa) - bm * bm) / (2.0 * prod),
                                   tolerance, "cos(phi- - phi_ref)");
  const double a = std::acos(e.cos_phi_minus_rel);
  e.phi_minus = wrap_phase(e.phi_ref + a);
  e.phi_minus_sign_ambiguous = std::sin(a) > kRealPhase;
  e.phase_minus_path = (mps.b_plus > 0.0 && axis_match(alpha, 0.0) == 0)
                           ? PhaseMinusPath::kBPlusFrame
                           : PhaseMinusPath::kRotatedFrame;
  const double predicted = 0.25 * std::norm(bpa + std::polar(bm, e.phi_minus));
  e.residuals["phase_minus_equation"] = std::abs(predicted - p);
  return e;
}

QuquartEstimate reconstruct_full(const RecordSet& records,
                                 const ReconstructionOptions& options) {
  for (const CountRecord& r : records.records()) r.validate();
  const std::uint64_t n_plan = typical_n(records);
  const double a0 = options.alpha0;
  const double a0_deg = a0 / kDeg;

  const std::vector<std::size_t> hv_idx = records.hv_records();
  if (hv_idx.empty()) missing({plan_entry(0, 0, n_plan)}, "no HV-frame record");
  std::vector<CountRecord> hv_set;
  for (std::size_t i : hv_idx) hv_set.push_back(records.records()[i]);
  const HvMagnitudes hv = estimate_hv_magnitudes(hv_set);
  const Tolerances tol = tolerances(hv.n_total);
  const double thr = options.zero_threshold.value_or(zero_threshold(hv.n_total));
  // Gate for squared quantities obtained by subtraction.
  auto square_gate = [&](double se) { return std::max(3.0 * se, thr * thr); };

  std::set<std::size_t> consumed(hv_idx.begin(), hv_idx.end());
  std::map<std::string, double> residuals;
  residuals["hv_normalization"] =
      std::abs(hv.abs_c1 * hv.abs_c1 + hv.abs_c4 * hv.abs_c4 + 2.0 * hv.cross - 1.0);
  std::string inversion;

  MPSEstimate base;
  base.abs_c1 = hv.abs_c1 <= thr ? 0.0 : hv.abs_c1;
  base.abs_c4 = hv.abs_c4 <= thr ? 0.0 : hv.abs_c4;
  // Every MPS consistent with the polarization data. More than one survives
  // only in the general case, where polarizer data fix B+^2 + Re(C1 C4*)
  // but not the two terms separately.
  std::vector<MPSEstimate> candidates;
  std::vector<double> root_residuals;

  std::optional<SlopePair> slopes;
  auto require_slopes = [&](std::vector<MeasurementConfig> also) {
    try {
      slopes = estimate_slopes(records, a0);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kEmptyRecord) throw;
      std::vector<MeasurementConfig> need{plan_entry(a0_deg, a0_deg, n_plan),
                                          plan_entry(-a0_deg, -a0_deg, n_plan)};
      need.insert(need.end(), also.begin(), also.end());
      missing(std::move(need), "slope records missing");
    }
    for (double t : {-a0, a0}) consumed.insert(records.polarization(t, t)->record);
  };
  Scenario scenario = classify_scenario(hv.abs_c1, hv.abs_c4, std::nullopt, thr);

  if (scenario == Scenario::kZeroC) {
    std::optional<Measured> best;
    double best_alpha = 0.0;
    for (std::size_t i = 0; i < records.size(); ++i) {
      const auto& c = records.records()[i].config;
      if (axis_match(c.ch1.angle, c.ch2.angle) != 0) continue;
      const double alpha = c.ch1.angle;
      if (std::abs(std::sin(2.0 * alpha)) < 1e-6) continue;
      if (best && std::abs(std::sin(2.0 * alpha)) <= std::abs(std::sin(2.0 * best_alpha)))
        continue;
      // a|a and o|o coincide when C1 = C4 = 0.
      best = average(records.polarization(alpha, alpha),
                     records.polarization(alpha + 0.5 * kPi, alpha + 0.5 * kPi));
      best_alpha = alpha;
    }
    if (!best) {
      missing({plan_entry(45, 45, n_plan), plan_entry(0, 0, n_plan, true)},
              "C1 = C4 = 0 needs one rotated frame");
    }
    consumed.insert(best->record);
    const BPlusMagnitudes m = reconstruct_zero_c(best->value, best_alpha, tol.unit);
    MPSEstimate mps = base;
    mps.b_plus = m.b_plus;
    mps.abs_b_minus = m.abs_b_minus;
    const double s = std::sin(2.0 * best_alpha);
    if (mps.b_plus * mps.b_plus <= square_gate(2.0 * best->std_error / (s * s))) {
      mps.b_plus = 0.0;
      mps.abs_b_minus = 1.0;
    }
    candidates.push_back(mps);
    inversion = fmt::format("|B+|^2 = 2 w(a|a) / sin^2(2a) at a = {:g} deg",
                            best_alpha / kDeg);
  } else if (scenario == Scenario::kSingleC) {
    const bool mirrored = base.abs_c1 == 0.0;
    const double c = mirrored ? base.abs_c4 : base.abs_c1;
    const double se_wc = mirrored ? hv.se_w_vv : hv.se_w_hh;
    const auto w = symmetric(records, 135 * kDeg, 45 * kDeg);
    if (!w) {
      missing({plan_entry(45, 45, n_plan), plan_entry(a0_deg, a0_deg, n_plan),
               plan_entry(-a0_deg, -a0_deg, n_plan)},
              "one of C1, C4 vanishes; the 45 deg frame is required");
    }
    consumed.insert(w->record);
    const BPlusMagnitudes m = reconstruct_single_c(c, w->value, tol.unit);
    MPSEstimate mps = base;
    mps.b_plus = m.b_plus;
    mps.abs_b_minus = m.abs_b_minus;
    const double se_bp2 = std::hypot(0.5 * se_wc, 2.0 * w->std_error);
    if (mps.abs_b_minus * mps.abs_b_minus <= square_gate(2.0 * w->std_error)) {
      mps.abs_b_minus = 0.0;
    }
    if (mps.b_plus * mps.b_plus <= square_gate(se_bp2)) {
      mps.b_plus = 0.0;
    } else {
      require_slopes({});
      const Tangents t = exact_tangents(*slopes);
      if (mirrored) {
        const double cos4 = -t.tan_theta4 / (kTwoSqrt2 * c * mps.b_plus);
        mps.phi4 = std::acos(clamp_unit(cos4, tol.unit, "cos(phi4)"));
      } else {
        const double cos1 = t.tan_theta1 / (kTwoSqrt2 * c * mps.b_plus);
        mps.phi1 = std::acos(clamp_unit(cos1, tol.unit, "cos(phi1)"));
      }
    }
    candidates.push_back(mps);
    inversion = fmt::format("|B-|^2 = 2 (w(135|45) - |C{}|^2/4)", mirrored ? 4 : 1);
  } else {
    const auto w45 = symmetric(records, 135 * kDeg, 45 * kDeg);
    require_slopes(w45 ? std::vector<MeasurementConfig>{}
                       : std::vector<MeasurementConfig>{plan_entry(45, 45, n_plan)});
    scenario = classify_scenario(hv.abs_c1, hv.abs_c4, slopes, thr);
    if (scenario == Scenario::kZeroBPlus) {
      const PhaseEstimate ph = reconstruct_zero_bplus(base.abs_c1, base.abs_c4,
                                                      slopes->at_h.parabola_k, a0, tol.unit);
      const PhaseEstimate pv = reconstruct_zero_bplus(base.abs_c4, base.abs_c1,
                                                      slopes->at_v.parabola_k, a0, tol.unit);
      MPSEstimate mps = base;
      mps.b_plus = 0.0;
      mps.phi1 = 0.0;
      mps.phi4 = std::acos(std::clamp(0.5 * (ph.cos_phi + pv.cos_phi), -1.0, 1.0));
      mps.abs_b_minus = std::sqrt(std::max(2.0 * hv.cross, 0.0));
      if (mps.abs_b_minus * mps.abs_b_minus <= square_gate(2.0 * hv.se_cross)) {
        mps.abs_b_minus = 0.0;
      }
      candidates.push_back(mps);
      inversion = fmt::format(
          "cos(phi4) from the parabola w(a) = w0 + k a^2 around 0 and 90 deg, a0 = {:g} deg",
          a0_deg);
    } else {
      if (!w45) missing({plan_entry(45, 45, n_plan)}, "the 45 deg frame is required");
      consumed.insert(w45->record);
      const Tangents t = exact_tangents(*slopes);
      const BPlusSolution sol =
          solve_b_plus_general(base.abs_c1, base.abs_c4, t.tan_theta1, t.tan_theta4,
                               hv.cross, w45->value, tol.residual);
      for (const BPlusRoot& r : sol.roots) {
        MPSEstimate m = base;
        m.b_plus = r.b_plus;
        m.phi1 = std::acos(r.cos_phi1);
        m.phi4 = r.branch * std::acos(r.cos_phi4);
        m.abs_b_minus = std::sqrt(std::max(2.0 * hv.cross - r.b_plus * r.b_plus, 0.0));
        if (m.abs_b_minus * m.abs_b_minus <= square_gate(2.0 * hv.se_cross)) {
          m.abs_b_minus = 0.0;
        }
        candidates.push_back(m);
        root_residuals.push_back(std::abs(r.residual));
      }
      inversion = "B+ from w(135|45) = |C1 - C4|^2/4 + (|B+|^2 + |B-|^2)/2 - B+^2/2";
    }
  }
  for (MPSEstimate& m : candidates) m.scenario = scenario;

  // Completes one candidate with phi- and the conjugation gauge.
  auto finish = [&](const MPSEstimate& mps, std::set<std::size_t>& used) {
    QuquartEstimate est;
    est.mps = mps;
    const bool others = mps.abs_c1 > 0.0 || mps.abs_c4 > 0.0 || mps.b_plus > 0.0;
    if (mps.abs_b_minus > 0.0 && others) {
      // Designated record: same angle on both channels, preferring the HV
      // frame when B+ != 0 and otherwise the frame with the largest |B+^a|.
      std::optional<std::size_t> designated;
      double best_weight = 0.0;
      QuquartParams q = params_of(mps, 0.0);
      q.b_minus = 0.0;
      for (std::size_t i = 0; i < records.size(); ++i) {
        const auto& c = records.records()[i].config;
        if (!c.frequency_resolved() || axis_match(c.ch1.angle, c.ch2.angle) != 0) continue;
        double weight = std::abs(rotate_frame(q, c.ch1.angle).b_plus);
        if (mps.b_plus > 0.0 && axis_match(c.ch1.angle, 0.0) == 0) weight += 10.0;
        if (weight > best_weight) {
          best_weight = weight;
          designated = i;
        }
      }
      if (!designated) {
        missing({mps.b_plus > 0.0 ? plan_entry(0, 0, n_plan, true)
                                  : plan_entry(45, 45, n_plan, true),
                 plan_entry(0, 45, n_plan, true)},
                "|B-| > 0 needs a frequency-resolved record");
      }
      used.insert(*designated);
      const QuquartEstimate pm =
          reconstruct_phase_minus(mps, records.records()[*designated], tol.unit);
      est.phi_minus = pm.phi_minus;
      est.phi_ref = pm.phi_ref;
      est.cos_phi_minus_rel = pm.cos_phi_minus_rel;
      est.phase_minus_path = pm.phase_minus_path;
      est.residuals = pm.residuals;

      const bool earlier_complex = std::abs(std::sin(mps.phi1)) > kRealPhase ||
                                   std::abs(std::sin(mps.phi4)) > kRealPhase;
      if (pm.phi_minus_sign_ambiguous && earlier_complex) {
        // The two candidates are not conjugates of each other; let the
        // frequency-resolved records decide.
        const double other = wrap_phase(2.0 * pm.phi_ref - pm.phi_minus);
        const std::vector<std::size_t> idx = resolved_indices(records);
        const ForwardFit fa = forward_fit(params_of(mps, pm.phi_minus), records, idx, true);
        const ForwardFit fb = forward_fit(params_of(mps, other), records, idx, true);
        if (fb.score < fa.score) est.phi_minus = other;
        est.phi_minus_sign_ambiguous = !distinguishable(fa, fb);
        if (!est.phi_minus_sign_ambiguous) used.insert(idx.begin(), idx.end());
      }
    }
    // Conjugation gauge: the first phase with nonzero sine is made positive.
    for (double phi : {est.mps.phi1, est.mps.phi4, est.phi_minus}) {
      const double s = std::sin(phi);
      if (std::abs(s) <= kRealPhase) continue;
      if (s < 0.0) {
        est.mps.phi1 = wrap_phase(-est.mps.phi1);
        est.mps.phi4 = wrap_phase(-est.mps.phi4);
        est.phi_minus = wrap_phase(-est.phi_minus);
        est.phi_ref = wrap_phase(-est.phi_ref);
      }
      break;
    }
    return est;
  };

  struct Finished {
    QuquartEstimate est;
    ForwardFit fit;
    std::set<std::size_t> used;
    std::size_t candidate = 0;
  };
  std::vector<Finished> done;
  std::optional<MissingRecords> first_missing;
  std::optional<Error> first_error;
  const std::vector<std::size_t> every = all_indices(records);
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    Finished f;
    f.candidate = i;
    try {
      f.est = finish(candidates[i], f.used);
    } catch (const MissingRecords& e) {
      if (!first_missing) first_missing = e;
      continue;
    } catch (const Error& e) {
      // A spurious root shows up as an impossible phi- equation.
      if (candidates.size() == 1) throw;
      if (!first_error) first_error = e;
      continue;
    }
    f.fit = forward_fit(params_of(f.est.mps, f.est.phi_minus), records, every, true);
    done.push_back(std::move(f));
  }
  if (done.empty()) {
    if (first_missing) throw *first_missing;
    throw *first_error;
  }

  std::size_t best = 0;
  for (std::size_t i = 1; i < done.size(); ++i) {
    if (done[i].fit.score < done[best].fit.score) best = i;
  }
  QuquartEstimate est = done[best].est;
  // Unevaluated candidates count as indistinguishable.
  if (first_missing) est.mps.b_plus_root_ambiguous = true;
  for (std::size_t i = 0; i < done.size(); ++i) {
    if (i == best || distinguishable(done[i].fit, done[best].fit)) continue;
    if (std::abs(done[i].est.mps.b_plus - est.mps.b_plus) < 1e-9) {
      est.mps.phi4_sign_ambiguous = true;
    } else {
      est.mps.b_plus_root_ambiguous = true;
    }
  }
  if (!root_residuals.empty()) {
    residuals["b_plus_equation"] = root_residuals[done[best].candidate];
  }
  for (const auto& [k, v] : est.residuals) residuals[k] = v;
  residuals["forward_model_rms"] = done[best].fit.rms;
  est.residuals = std::move(residuals);
  consumed.insert(done[best].used.begin(), done[best].used.end());
  if (candidates.size() > 1) consumed.insert(every.begin(), every.end());
  est.consumed.assign(consumed.begin(), consumed.end());
  est.inversion = std::move(inversion);
  return est;
}

std::vector<MeasurementConfig> standard_plan(double alpha0, std::uint64_t n_total,
                                             std::uint64_t seed_base) {
  const double a = alpha0 / kDeg;
  std::vector<MeasurementConfig> plan = {
      plan_entry(0, 0, n_total),          plan_entry(a, a, n_total),
      plan_entry(-a, -a, n_total),        plan_entry(45, 45, n_total),
      plan_entry(0, 0, n_total, true),    plan_entry(45, 45, n_total, true),
      plan_entry(0, 45, n_total, true),
  };
  for (std::size_t i = 0; i < plan.size(); ++i) plan[i].seed = seed_base + i;
  return plan;
}

}  // namespace qqlab
