#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "qqlab/error.hpp"
#include "qqlab/measurement.hpp"
#include "qqlab/reconstruction.hpp"

using namespace qqlab;

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kDeg = kPi / 180.0;
constexpr double kInvSqrt2 = oracle::kInvSqrt2;
constexpr double kTwoSqrt2 = 2.0 * std::numbers::sqrt2;
const double kAlpha0 = 5 * kDeg;

RecordSet exact_records(const QuquartParams& q,
                        const std::vector<MeasurementConfig>& plan = standard_plan(kAlpha0, 0)) {
  RecordSet rs;
  for (const MeasurementConfig& c : plan) rs.add(exact_record(q, c));
  return rs;
}

// w(t1|t2) from the closed-form projection: |e(t1)^T M e(t2)|^2 summed over
// the frequency Bell states.
double w_pol(const QuquartParams& q, double t1, double t2) {
  return outcome_distribution(q, make_config(t1, t2, 0)).probabilities[0];
}

template <class F>
ErrorCode code_of(F&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no qqlab::Error thrown";
  return ErrorCode::kIo;
}

// 0.5e^{0.3i}, 0.5, 0.5e^{-0.4i}, 0.5e^{0.7i}
QuquartParams reference_state() {
  return make_ququart(std::polar(0.5, 0.3), 0.5, std::polar(0.5, -0.4), std::polar(0.5, 0.7));
}

}  // namespace

// ---------- HV magnitudes ----------

TEST(EstimateHvMagnitudes, Examples) {
  auto hv = [](const QuquartParams& q) {
    const std::vector<CountRecord> r{exact_record(q, make_config(0.0, 0.0, 0))};
    return estimate_hv_magnitudes(r);
  };
  HvMagnitudes m = hv(make_ququart(1.0, 0.0, 0.0, 0.0));
  EXPECT_NEAR(m.abs_c1, 1.0, 1e-15);
  EXPECT_NEAR(m.abs_c4, 0.0, 1e-15);
  EXPECT_NEAR(m.cross, 0.0, 1e-15);
  m = hv(make_ququart(0.0, 0.0, 0.0, 1.0));
  EXPECT_NEAR(m.abs_c1, 0.0, 1e-15);
  EXPECT_NEAR(m.abs_c4, 0.0, 1e-15);
  EXPECT_NEAR(m.cross, 0.5, 1e-15);
  m = hv(make_ququart(0.6, 0.0, 0.8, 0.0));
  EXPECT_NEAR(m.abs_c1, 0.6, 1e-15);
  EXPECT_NEAR(m.abs_c4, 0.8, 1e-15);
  EXPECT_NEAR(m.cross, 0.0, 1e-15);
}

TEST(EstimateHvMagnitudes, PoolsSampledRecords) {
  const QuquartParams q = reference_state();
  const std::vector<CountRecord> r{
      simulate_coincidences(q, make_config(0.0, 0.0, 200000, 1)),
      simulate_coincidences(q, make_config(0.5 * kPi, 0.5 * kPi, 200000, 2))};
  const HvMagnitudes m = estimate_hv_magnitudes(r);
  EXPECT_EQ(m.n_total, 400000u);
  EXPECT_NEAR(m.abs_c1, 0.5, 5 * 0.5 / std::sqrt(4e5) / 0.5 + 1e-3);
  EXPECT_GT(m.se_w_hh, 0.0);
}

TEST(EstimateHvMagnitudes, Errors) {
  EXPECT_EQ(code_of([] { estimate_hv_magnitudes({}); }), ErrorCode::kEmptyRecord);
  const std::vector<CountRecord> tilted{
      exact_record(make_ququart(1.0, 0.0, 0.0, 0.0), make_config(0.3, 0.3, 0))};
  EXPECT_EQ(code_of([&] { estimate_hv_magnitudes(tilted); }), ErrorCode::kOutOfRange);
}

TEST(ZeroThreshold, Values) {
  EXPECT_EQ(zero_threshold(0), 1e-4);
  EXPECT_NEAR(zero_threshold(1000000), 3.0 / std::sqrt(1000009.0), 1e-15);
  EXPECT_EQ(zero_threshold(std::uint64_t{1} << 62), 1e-4);
}

// ---------- RecordSet ----------

TEST(RecordSet, AnswersFromOrthogonalAxesAndResolvedRecords) {
  const QuquartParams q = reference_state();
  RecordSet rs;
  rs.add(exact_record(q, make_config(0.0, 0.0, 0)));
  rs.add(exact_record(q, make_config(0.25 * kPi, 0.25 * kPi, 0, 0, FrequencyFilter::kHigh,
                                     FrequencyFilter::kLow)));
  // (V, H) from the HV record.
  EXPECT_NEAR(rs.polarization(0.5 * kPi, 0.0)->value, w_pol(q, 0.5 * kPi, 0.0), 1e-15);
  // (135, 45) from the marginal of the resolved 45 deg record.
  EXPECT_NEAR(rs.polarization(0.75 * kPi, 0.25 * kPi)->value, w_pol(q, 0.75 * kPi, 0.25 * kPi),
              1e-14);
  EXPECT_FALSE(rs.polarization(0.1, 0.1).has_value());
  const auto r = rs.resolved(0.25 * kPi, Freq::kHigh, 0.75 * kPi, Freq::kLow);
  ASSERT_TRUE(r.has_value());
  EXPECT_EQ(r->record, 1u);
  EXPECT_EQ(rs.hv_records(), std::vector<std::size_t>{0});
}

// ---------- slopes ----------

TEST(FitSlope, SymmetricPointsAreLinear) {
  const SlopeEstimate s = fit_slope({0.2}, {0.25}, {0.3}, kAlpha0);
  EXPECT_NEAR(s.parabola_k, 0.0, 1e-12);
  EXPECT_EQ(s.fit_kind, FitKind::kLinear);
  EXPECT_NEAR(s.tan_theta, 0.1 / (2 * kAlpha0), 1e-12);
  EXPECT_EQ(code_of([] { fit_slope({0.2}, {0.25}, {0.3}, 0.0); }), ErrorCode::kOutOfRange);
}

TEST(EstimateSlopes, TangentMatchesDerivative) {
  const QuquartParams q = make_ququart(0.5, 0.5, 0.5, 0.5);
  const SlopePair s = estimate_slopes(exact_records(q), kAlpha0);
  EXPECT_NEAR(s.at_h.tan_theta, kTwoSqrt2 * 0.5 * 0.5, 2e-2);
  EXPECT_NE(s.at_h.fit_kind, FitKind::kFlat);
  const Tangents t = exact_tangents(s);
  EXPECT_NEAR(t.tan_theta1, kTwoSqrt2 * 0.5 * 0.5, 1e-12);
  EXPECT_NEAR(t.tan_theta4, -kTwoSqrt2 * 0.5 * 0.5, 1e-12);
}

TEST(EstimateSlopes, ExactTangentsOnRandomStates) {
  Rng rng = make_rng(51);
  for (int i = 0; i < 200; ++i) {
    const QuquartParams q = canonicalize(random_ququart(rng));
    const Tangents t = exact_tangents(estimate_slopes(exact_records(q), kAlpha0));
    EXPECT_NEAR(t.tan_theta1, kTwoSqrt2 * q.b_plus.real() * q.c1.real(), 1e-12);
    EXPECT_NEAR(t.tan_theta4, -kTwoSqrt2 * q.b_plus.real() * q.c4.real(), 1e-12);
  }
}

TEST(EstimateSlopes, ZeroBPlusIsFlatWithCurvature) {
  const double c1 = 0.6, c4 = 0.8, phi4 = kPi / 3;
  const QuquartParams q = make_ququart(c1, 0.0, std::polar(c4, phi4), 0.0);
  const SlopePair s = estimate_slopes(exact_records(q), kAlpha0);
  EXPECT_NEAR(s.at_h.tan_theta, 0.0, 1e-12);
  EXPECT_EQ(s.at_h.fit_kind, FitKind::kFlat);
  EXPECT_EQ(s.at_v.fit_kind, FitKind::kFlat);
  const double k = 2 * c1 * (c4 * std::cos(phi4) - c1);
  EXPECT_NEAR(s.at_h.parabola_k, k, 2e-2 * std::abs(k));
}

TEST(EstimateSlopes, Errors) {
  const RecordSet rs = exact_records(reference_state());
  EXPECT_EQ(code_of([&] { estimate_slopes(rs, 0.0); }), ErrorCode::kOutOfRange);
  EXPECT_EQ(code_of([&] { estimate_slopes(rs, 0.3); }), ErrorCode::kEmptyRecord);
}

// ---------- classification ----------

TEST(ClassifyScenario, Examples) {
  EXPECT_EQ(classify_scenario(0.0, 0.0, std::nullopt, 1e-4), Scenario::kZeroC);
  EXPECT_EQ(classify_scenario(0.6, 0.0, std::nullopt, 1e-4), Scenario::kSingleC);
  EXPECT_EQ(classify_scenario(0.0, 0.6, std::nullopt, 1e-4), Scenario::kSingleC);

  const QuquartParams zero_bplus = make_ququart(0.5, 0.0, std::polar(0.5, 1.0), kInvSqrt2);
  const SlopePair flat = estimate_slopes(exact_records(zero_bplus), kAlpha0);
  EXPECT_EQ(classify_scenario(0.5, 0.5, flat, 1e-4), Scenario::kZeroBPlus);

  const SlopePair sloped = estimate_slopes(exact_records(reference_state()), kAlpha0);
  EXPECT_EQ(classify_scenario(0.5, 0.5, sloped, 1e-4), Scenario::kGeneral);
}

// ---------- B+ inversions ----------

TEST(ReconstructZeroC, Examples) {
  const QuquartParams q = make_ququart(0.0, 0.6, 0.0, 0.8);
  BPlusMagnitudes m = reconstruct_zero_c(w_pol(q, kPi / 4, kPi / 4), kPi / 4);
  EXPECT_NEAR(m.b_plus, 0.6, 1e-12);
  EXPECT_NEAR(m.abs_b_minus, 0.8, 1e-12);

  const QuquartParams singlet = make_ququart(0.0, 0.0, 0.0, 1.0);
  m = reconstruct_zero_c(w_pol(singlet, kPi / 8, kPi / 8), kPi / 8);
  EXPECT_NEAR(m.b_plus, 0.0, 1e-12);
  EXPECT_NEAR(m.abs_b_minus, 1.0, 1e-12);

  EXPECT_EQ(code_of([] { reconstruct_zero_c(0.1, kPi / 2); }), ErrorCode::kDegenerateAngle);
  EXPECT_EQ(code_of([] { reconstruct_zero_c(0.9, kPi / 4); }), ErrorCode::kOutOfRange);
}

TEST(ReconstructZeroC, IndependentOfAngle) {
  const QuquartParams q = make_ququart(0.0, 0.6, 0.0, {0.0, 0.8});
  const double ref = reconstruct_zero_c(w_pol(q, 15 * kDeg, 15 * kDeg), 15 * kDeg).b_plus;
  for (double a : {30.0, 45.0}) {
    EXPECT_NEAR(reconstruct_zero_c(w_pol(q, a * kDeg, a * kDeg), a * kDeg).b_plus, ref, 1e-9);
  }
}

TEST(ReconstructSingleC, Examples) {
  const double bm = std::sqrt(1 - 0.36 - 0.36);
  const QuquartParams q = make_ququart(0.6, 0.6, 0.0, bm);
  BPlusMagnitudes m = reconstruct_single_c(0.6, w_pol(q, 3 * kPi / 4, kPi / 4));
  EXPECT_NEAR(m.abs_b_minus, 0.529150, 1e-6);
  EXPECT_NEAR(m.b_plus, 0.6, 1e-6);

  m = reconstruct_single_c(1.0, 0.25);
  EXPECT_NEAR(m.abs_b_minus, 0.0, 1e-12);
  EXPECT_NEAR(m.b_plus, 0.0, 1e-12);

  EXPECT_EQ(code_of([] { reconstruct_single_c(0.6, 0.0); }), ErrorCode::kOutOfRange);
}

TEST(SolveBPlusGeneral, ReferenceStateRootIsFound) {
  const QuquartParams q = reference_state();
  const double t1 = kTwoSqrt2 * 0.5 * 0.5 * std::cos(0.3);
  const double t4 = -kTwoSqrt2 * 0.5 * 0.5 * std::cos(-0.4);
  const double cross = 0.5 * (0.25 + 0.25);
  const BPlusSolution sol =
      solve_b_plus_general(0.5, 0.5, t1, t4, cross, w_pol(q, 3 * kPi / 4, kPi / 4));
  ASSERT_FALSE(sol.roots.empty());
  bool found = false;
  for (const BPlusRoot& r : sol.roots) {
    EXPECT_LE(std::abs(r.cos_phi1), 1.0);
    EXPECT_LE(std::abs(r.cos_phi4), 1.0);
    // Every root reproduces both tangents.
    EXPECT_NEAR(kTwoSqrt2 * 0.5 * r.b_plus * r.cos_phi1, t1, 1e-9);
    EXPECT_NEAR(-kTwoSqrt2 * 0.5 * r.b_plus * r.cos_phi4, t4, 1e-9);
    if (std::abs(r.b_plus - 0.5) < 1e-6) {
      found = true;
      EXPECT_NEAR(r.cos_phi1, std::cos(0.3), 1e-6);
      EXPECT_NEAR(r.cos_phi4, std::cos(0.4), 1e-6);
      // phi1 and phi4 have opposite signs.
      EXPECT_EQ(r.branch, -1);
    }
  }
  EXPECT_TRUE(found);
  EXPECT_EQ(sol.ambiguous, sol.roots.size() > 1);
}

TEST(SolveBPlusGeneral, RealAmplitudes) {
  const QuquartParams q = make_ququart(0.5, kInvSqrt2, 0.5, 0.0);
  const double b = kInvSqrt2;
  const BPlusSolution sol = solve_b_plus_general(
      0.5, 0.5, kTwoSqrt2 * b * 0.5, -kTwoSqrt2 * b * 0.5, 0.5 * b * b,
      w_pol(q, 3 * kPi / 4, kPi / 4));
  ASSERT_FALSE(sol.roots.empty());
  bool found = false;
  for (const BPlusRoot& r : sol.roots) {
    if (std::abs(r.b_plus - b) < 1e-6) {
      found = true;
      EXPECT_NEAR(r.cos_phi1, 1.0, 1e-6);
      EXPECT_NEAR(r.cos_phi4, 1.0, 1e-6);
    }
  }
  EXPECT_TRUE(found);
}

TEST(SolveBPlusGeneral, InfeasibleTangentHasNoRoot) {
  // |cos phi1| = 5 / (2^{3/2} * 0.1 * B+) > 1 for every B+ <= 1.
  EXPECT_EQ(code_of([] { solve_b_plus_general(0.1, 0.5, 5.0, 0.0, 0.3, 0.2); }),
            ErrorCode::kNoRoot);
  EXPECT_EQ(code_of([] { solve_b_plus_general(0.0, 0.5, 0.1, 0.1, 0.3, 0.2); }),
            ErrorCode::kOutOfRange);
}

TEST(SolveBPlusGeneral, RandomStatesRootsAreFeasible) {
  Rng rng = make_rng(52);
  int checked = 0;
  for (int i = 0; i < 300; ++i) {
    const QuquartParams q = canonicalize(random_ququart(rng));
    const double a1 = std::abs(q.c1), a4 = std::abs(q.c4), b = q.b_plus.real();
    const double t1 = kTwoSqrt2 * b * q.c1.real();
    const double t4 = -kTwoSqrt2 * b * q.c4.real();
    if (a1 < 1e-3 || a4 < 1e-3 || std::max(std::abs(t1), std::abs(t4)) < 1e-2) continue;
    const double cross = 0.5 * (b * b + std::norm(q.b_minus));
    const BPlusSolution sol =
        solve_b_plus_general(a1, a4, t1, t4, cross, w_pol(q, 3 * kPi / 4, kPi / 4));
    bool found = false;
    for (const BPlusRoot& r : sol.roots) {
      ASSERT_LE(std::abs(r.cos_phi1), 1.0);
      ASSERT_LE(std::abs(r.cos_phi4), 1.0);
      ASSERT_NEAR(kTwoSqrt2 * a1 * r.b_plus * r.cos_phi1, t1, 1e-9);
      ASSERT_NEAR(-kTwoSqrt2 * a4 * r.b_plus * r.cos_phi4, t4, 1e-9);
      found = found || std::abs(r.b_plus - b) < 1e-6;
    }
    EXPECT_TRUE(found) << "i=" << i;
    ++checked;
  }
  EXPECT_GT(checked, 200);
}

// ---------- B+ = 0 ----------

TEST(ReconstructZeroBPlus, Examples) {
  PhaseEstimate p = reconstruct_zero_bplus(kInvSqrt2, kInvSqrt2, 0.0);
  EXPECT_NEAR(p.cos_phi, 1.0, 1e-12);
  EXPECT_NEAR(p.phi, 0.0, 1e-6);
  EXPECT_FALSE(p.sign_ambiguous);

  const double k = 2 * 0.6 * (0.8 * 0.5 - 0.6);
  EXPECT_NEAR(k, -0.24, 1e-15);
  p = reconstruct_zero_bplus(0.6, 0.8, k);
  EXPECT_NEAR(p.phi, kPi / 3, 1e-12);
  EXPECT_TRUE(p.sign_ambiguous);

  // k = 2 * 0.6 * (0.8 * 1.5 - 0.6) implies cos(phi4) = 1.5.
  EXPECT_EQ(code_of([] { reconstruct_zero_bplus(0.6, 0.8, 0.72); }), ErrorCode::kOutOfRange);
}

TEST(ReconstructZeroBPlus, FiniteAngleInversionIsExact) {
  const double c1 = 0.6, c4 = 0.8, phi4 = 1.1;
  const QuquartParams q = make_ququart(c1, 0.0, std::polar(c4, phi4), 0.0);
  const SlopePair s = estimate_slopes(exact_records(q), kAlpha0);
  const PhaseEstimate p = reconstruct_zero_bplus(c1, c4, s.at_h.parabola_k, kAlpha0);
  EXPECT_NEAR(p.cos_phi, std::cos(phi4), 1e-12);
}

// ---------- phi- ----------

TEST(ReconstructPhaseMinus, BPlusFrame) {
  MPSEstimate mps;
  mps.b_plus = kInvSqrt2;
  mps.abs_b_minus = kInvSqrt2;
  mps.scenario = Scenario::kZeroC;
  const MeasurementConfig c =
      make_config(0.0, 0.0, 0, 0, FrequencyFilter::kHigh, FrequencyFilter::kLow);

  const CountRecord in_phase = exact_record(make_ququart(0.0, kInvSqrt2, 0.0, kInvSqrt2), c);
  EXPECT_NEAR(unordered_pair_rate(*in_phase.frequency({0, 0, 1, 1})), 1.0, 1e-15);
  QuquartEstimate e = reconstruct_phase_minus(mps, in_phase);
  EXPECT_NEAR(e.phi_minus, 0.0, 1e-6);
  EXPECT_FALSE(e.phi_minus_sign_ambiguous);
  EXPECT_EQ(e.phase_minus_path, PhaseMinusPath::kBPlusFrame);

  const CountRecord quarter =
      exact_record(make_ququart(0.0, kInvSqrt2, 0.0, {0.0, kInvSqrt2}), c);
  EXPECT_NEAR(unordered_pair_rate(*quarter.frequency({0, 0, 1, 1})), 0.5, 1e-15);
  e = reconstruct_phase_minus(mps, quarter);
  EXPECT_NEAR(std::abs(e.phi_minus), kPi / 2, 1e-9);
  EXPECT_TRUE(e.phi_minus_sign_ambiguous);
}

TEST(ReconstructPhaseMinus, RotatedFrameWhenBPlusVanishes) {
  const double c1 = 0.5, c4 = 0.5, phi4 = 0.9, phim = 2.0;
  const QuquartParams q =
      make_ququart(c1, 0.0, std::polar(c4, phi4), std::polar(kInvSqrt2, phim));
  MPSEstimate mps;
  mps.abs_c1 = c1;
  mps.abs_c4 = c4;
  mps.phi4 = phi4;
  mps.abs_b_minus = kInvSqrt2;
  mps.scenario = Scenario::kZeroBPlus;
  const CountRecord r = exact_record(
      q, make_config(kPi / 4, kPi / 4, 0, 0, FrequencyFilter::kHigh, FrequencyFilter::kLow));
  const QuquartEstimate e = reconstruct_phase_minus(mps, r);
  EXPECT_EQ(e.phase_minus_path, PhaseMinusPath::kRotatedFrame);
  // Only the angle relative to B+ in the 45 deg frame is fixed.
  const Amplitude bpa = rotate_frame(q, kPi / 4).b_plus;
  EXPECT_NEAR(e.phi_ref, std::arg(bpa), 1e-12);
  EXPECT_NEAR(e.cos_phi_minus_rel, std::cos(phim - std::arg(bpa)), 1e-9);
}

TEST(ReconstructPhaseMinus, DegenerateWithoutBMinus) {
  MPSEstimate mps;
  mps.b_plus = 1.0;
  const CountRecord r =
      exact_record(make_ququart(0.0, 1.0, 0.0, 0.0),
                   make_config(0.0, 0.0, 0, 0, FrequencyFilter::kHigh, FrequencyFilter::kLow));
  EXPECT_EQ(code_of([&] { reconstruct_phase_minus(mps, r); }), ErrorCode::kDegenerate);
  const CountRecord pol = exact_record(make_ququart(0.0, 1.0, 0.0, 0.0), make_config(0.0, 0.0, 0));
  EXPECT_EQ(code_of([&] { reconstruct_phase_minus(mps, pol); }), ErrorCode::kOutOfRange);
}

// ---------- full pipeline ----------

TEST(ReconstructFull, ZeroCState) {
  const QuquartParams q = make_ququart(0.0, 0.6, 0.0, {0.0, 0.8});
  const QuquartEstimate e = reconstruct_full(exact_records(q));
  EXPECT_EQ(e.mps.scenario, Scenario::kZeroC);
  EXPECT_NEAR(e.mps.abs_c1, 0.0, 1e-9);
  EXPECT_NEAR(e.mps.abs_c4, 0.0, 1e-9);
  EXPECT_NEAR(e.mps.b_plus, 0.6, 1e-9);
  EXPECT_NEAR(e.mps.abs_b_minus, 0.8, 1e-9);
  EXPECT_NEAR(std::cos(e.phi_minus), 0.0, 1e-6);
  EXPECT_NE(e.inversion.find("sin^2(2a)"), std::string::npos);
}

TEST(ReconstructFull, SingleCState) {
  const QuquartEstimate e = reconstruct_full(exact_records(make_ququart(1.0, 0.0, 0.0, 0.0)));
  EXPECT_EQ(e.mps.scenario, Scenario::kSingleC);
  EXPECT_NEAR(e.mps.abs_c1, 1.0, 1e-9);
  EXPECT_EQ(e.phase_minus_path, PhaseMinusPath::kNone);
  const QuquartParams p = e.to_params();
  EXPECT_NEAR(std::abs(p.c1), 1.0, 1e-9);
}

TEST(ReconstructFull, ReferenceStateExact) {
  const QuquartParams q = canonicalize(reference_state());
  const QuquartEstimate e = reconstruct_full(exact_records(q));
  EXPECT_EQ(e.mps.scenario, Scenario::kGeneral);
  const QuquartParams p = e.to_params();
  EXPECT_LT(std::min(oracle::distance(p, q), oracle::distance(p, oracle::conj(q))), 1e-6);
  EXPECT_EQ(e.consumed.size(), standard_plan(kAlpha0, 0).size());
  EXPECT_LT(e.residuals.at("forward_model_rms"), 1e-9);
}

TEST(ReconstructFull, ScenarioCoverage) {
  Rng rng = make_rng(53);
  for (int sc = 0; sc < 4; ++sc) {
    int done = 0;
    while (done < 60) {
      QuquartParams q = random_ququart(rng);
      if (sc == 0) q.c1 = q.c4 = 0.0;
      if (sc == 1) (done % 2 ? q.c4 : q.c1) = 0.0;
      if (sc == 3) q.b_plus = 0.0;
      q = canonicalize(make_ququart(q.c1, q.b_plus, q.c4, q.b_minus, Renormalize::kYes));
      // Margins of ten zero thresholds keep each state inside its branch.
      if (std::abs(q.b_minus) < 1e-3) continue;
      if (sc != 0 && sc != 1 && (std::abs(q.c1) < 1e-3 || std::abs(q.c4) < 1e-3)) continue;
      if (sc == 2 && std::max(std::abs(q.b_plus.real() * q.c1.real()),
                              std::abs(q.b_plus.real() * q.c4.real())) < 1e-2) {
        continue;
      }
      const QuquartEstimate e = reconstruct_full(exact_records(q));
      ASSERT_EQ(static_cast<int>(e.mps.scenario), sc);
      const QuquartParams p = e.to_params();
      ASSERT_LT(std::min(oracle::distance(p, q), oracle::distance(p, oracle::conj(q))), 1e-6)
          << "scenario " << to_string(e.mps.scenario);
      ++done;
    }
  }
}

TEST(ReconstructFull, MissingFortyFiveRecord) {
  std::vector<MeasurementConfig> plan;
  for (const MeasurementConfig& c : standard_plan(kAlpha0, 0)) {
    const bool at45 = !c.frequency_resolved() && std::abs(c.ch1.angle - kPi / 4) < 1e-9;
    if (!at45 && !c.frequency_resolved()) plan.push_back(c);
  }
  const RecordSet rs = exact_records(reference_state(), plan);
  try {
    reconstruct_full(rs);
    FAIL() << "expected MissingRecords";
  } catch (const MissingRecords& e) {
    EXPECT_EQ(e.code(), ErrorCode::kMissingRecords);
    ASSERT_FALSE(e.needed().empty());
    bool names45 = false;
    for (const MeasurementConfig& c : e.needed()) {
      names45 = names45 || (std::abs(c.ch1.angle - kPi / 4) < 1e-9 &&
                            std::abs(c.ch2.angle - kPi / 4) < 1e-9);
    }
    EXPECT_TRUE(names45);
  }
}

TEST(ReconstructFull, NoHvRecord) {
  RecordSet rs;
  rs.add(exact_record(reference_state(), make_config(kPi / 4, kPi / 4, 0)));
  EXPECT_THROW(reconstruct_full(rs), MissingRecords);
}

TEST(ReconstructFull, SampledReferenceState) {
  const QuquartParams q = canonicalize(reference_state());
  int ok = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    RecordSet rs;
    for (const MeasurementConfig& c : standard_plan(kAlpha0, 1000000, 100 * seed)) {
      rs.add(simulate_coincidences(q, c));
    }
    const QuquartParams p = reconstruct_full(rs).to_params();
    const double mag = std::max({std::abs(std::abs(p.c1) - std::abs(q.c1)),
                                 std::abs(std::abs(p.c4) - std::abs(q.c4)),
                                 std::abs(std::abs(p.b_plus) - std::abs(q.b_plus)),
                                 std::abs(std::abs(p.b_minus) - std::abs(q.b_minus))});
    const double cosines = std::max({std::abs(std::cos(std::arg(p.c1)) - std::cos(std::arg(q.c1))),
                                     std::abs(std::cos(std::arg(p.c4)) - std::cos(std::arg(q.c4))),
                                     std::abs(std::cos(std::arg(p.b_minus)) -
                                              std::cos(std::arg(q.b_minus)))});
    if (mag < 2e-2 && cosines < 5e-2) ++ok;
  }
  EXPECT_GE(ok, 9);
}

TEST(StandardPlan, SeedsAndShape) {
  const auto plan = standard_plan(kAlpha0, 1000, 40);
  ASSERT_GE(plan.size(), 7u);
  for (std::size_t i = 0; i < plan.size(); ++i) {
    EXPECT_EQ(plan[i].seed, 40 + i);
    EXPECT_EQ(plan[i].n_total, 1000u);
  }
}
