#include <cmath>
#include <vector>

#include <boost/random/normal_distribution.hpp>
#include <gtest/gtest.h>

#include "oracles.hpp"
#include "qqlab/correlations.hpp"
#include "qqlab/density.hpp"
#include "qqlab/error.hpp"

using namespace qqlab;

namespace {

constexpr double kInvSqrt2 = oracle::kInvSqrt2;

// C1 = C4 = 0 with |B-|^2 = x, both amplitudes real.
QuquartParams bell_mixture(double x) {
  return make_ququart(0.0, std::sqrt(1.0 - x), 0.0, std::sqrt(x), Renormalize::kYes);
}

Matrix2 haar_unitary(Rng& rng) {
  boost::random::normal_distribution<double> n;
  Matrix2 z;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) z(i, j) = {n(rng), n(rng)};
  Eigen::HouseholderQR<Matrix2> qr(z);
  return qr.householderQ();
}

Matrix4 kron(const Matrix2& a, const Matrix2& b) {
  Matrix4 k;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) k.block<2, 2>(2 * i, 2 * j) = a(i, j) * b;
  return k;
}

// Phi+, Phi-, Psi+, Psi- on {HH,HV,VH,VV}.
Matrix4 maximally_entangled_columns() {
  Matrix4 u = Matrix4::Zero();
  u(0, 0) = u(3, 0) = kInvSqrt2;
  u(0, 1) = kInvSqrt2;
  u(3, 1) = -kInvSqrt2;
  u(1, 2) = u(2, 2) = kInvSqrt2;
  u(1, 3) = kInvSqrt2;
  u(2, 3) = -kInvSqrt2;
  return u;
}

}  // namespace

TEST(SchmidtK, Examples) {
  EXPECT_NEAR(schmidt_K_mps(make_ququart(1.0, 0.0, 0.0, 0.0)), 1.0, 1e-15);
  EXPECT_NEAR(schmidt_K_mps(make_ququart(0.0, 0.0, 0.0, 1.0)), 2.0, 1e-15);
  EXPECT_NEAR(schmidt_K_mps(make_ququart(0.0, kInvSqrt2, 0.0, kInvSqrt2)), 2.0, 1e-15);
}

TEST(SchmidtK, EqualsInversePurity) {
  Rng rng = make_rng(31);
  for (int i = 0; i < 10000; ++i) {
    const QuquartParams q = random_ququart(rng);
    const Matrix2 r = oracle::reduce_first(oracle::polarization_density_product(q));
    ASSERT_NEAR(schmidt_K_mps(q), 1.0 / (r * r).trace().real(), 1e-12);
  }
}

TEST(Concurrence, Examples) {
  EXPECT_NEAR(concurrence_mps(make_ququart(1.0, 0.0, 0.0, 0.0)), 0.0, 1e-15);
  EXPECT_NEAR(concurrence_mps(make_ququart(0.0, 0.0, 0.0, 1.0)), 1.0, 1e-15);
  const QuquartParams q = make_ququart(kInvSqrt2, 0.0, kInvSqrt2, 0.0);
  EXPECT_NEAR(concurrence_mps(q), 1.0, 1e-15);
  EXPECT_NEAR(wootters_concurrence(mps_density(q)), 1.0, 1e-12);
}

TEST(Wootters, Examples) {
  MPSDensity singlet;
  singlet.entries(3, 3) = 1.0;
  EXPECT_NEAR(wootters_concurrence(singlet), 1.0, 1e-12);
  MPSDensity hh;
  hh.entries(0, 0) = 1.0;
  EXPECT_NEAR(wootters_concurrence(hh), 0.0, 1e-12);
  const QuquartParams q = make_ququart(0.0, std::sqrt(0.75), 0.0, 0.5);
  EXPECT_NEAR(wootters_concurrence(mps_density(q)), 0.5, 1e-12);
  EXPECT_NEAR(concurrence_mps(q), 0.5, 1e-15);
}

TEST(Wootters, ClosedFormMatchesBothRoutes) {
  Rng rng = make_rng(32);
  for (int i = 0; i < 10000; ++i) {
    const QuquartParams q = random_ququart(rng);
    const double closed = concurrence_mps(q);
    ASSERT_NEAR(wootters_concurrence(mps_density(q)), closed, 1e-10);
    if (i % 10 == 0) {
      ASSERT_NEAR(oracle::wootters(oracle::polarization_density_product(q)), closed, 1e-7);
    }
  }
}

// ---------- relative entropy ----------

TEST(RelativeEntropy, BellMixtureSpecialValues) {
  RelativeEntropyResult r = relative_entropy(bell_mixture(0.5));
  EXPECT_NEAR(r.value, 0.0, 1e-12);
  EXPECT_EQ(r.method, SrelMethod::kClosedFormBellMixture);

  r = relative_entropy(make_ququart(0.0, 0.0, 0.0, 1.0));
  EXPECT_NEAR(r.value, 1.0, 1e-12);

  const QuquartParams q = bell_mixture(0.9);
  r = relative_entropy(q);
  EXPECT_NEAR(r.value, 1.0 - oracle::binary_entropy(0.9), 1e-12);
  EXPECT_NEAR(r.value, 0.53100, 1e-4);
  EXPECT_LE(r.value, concurrence_mps(q));
  EXPECT_NEAR(concurrence_mps(q), 0.8, 1e-12);
}

TEST(RelativeEntropy, MinimizerReproducesClosedForm) {
  // The numeric search does not know the state is a Bell mixture.
  const QuquartParams q = bell_mixture(0.9);
  const RelativeEntropyResult r = minimize_relative_entropy(to_product_basis(mps_density(q)));
  EXPECT_EQ(r.method, SrelMethod::kNumericMinimization);
  EXPECT_NEAR(r.value, 1.0 - oracle::binary_entropy(0.9), 1e-6);
}

TEST(RelativeEntropy, MinimizerOnRotatedBellMixtures) {
  Rng rng = make_rng(33);
  const Matrix4 u = maximally_entangled_columns();
  for (double p : {0.65, 0.8, 0.95}) {
    Eigen::Vector4d w(p, (1 - p) * 0.5, (1 - p) * 0.3, (1 - p) * 0.2);
    const Matrix4 diag = u * w.cast<Amplitude>().asDiagonal() * u.adjoint();
    const Matrix4 local = kron(haar_unitary(rng), haar_unitary(rng));
    const Matrix4 rho = local * diag * local.adjoint();
    const RelativeEntropyResult r = minimize_relative_entropy(rho);
    EXPECT_NEAR(r.value, 1.0 - oracle::binary_entropy(p), 1e-6) << "p=" << p;
  }
}

TEST(RelativeEntropy, SeparableStateGivesZero) {
  const Matrix4 u = maximally_entangled_columns();
  const Eigen::Vector4d w(0.4, 0.3, 0.2, 0.1);
  const Matrix4 rho = u * w.cast<Amplitude>().asDiagonal() * u.adjoint();
  EXPECT_NEAR(minimize_relative_entropy(rho).value, 0.0, 1e-6);
}

TEST(RelativeEntropy, PureStatesUseEntropyOfEntanglement) {
  Rng rng = make_rng(34);
  for (int i = 0; i < 20; ++i) {
    QuquartParams q = random_ququart(rng);
    q = make_ququart(q.c1, q.b_plus, q.c4, 0.0, Renormalize::kYes);
    const RelativeEntropyResult r = relative_entropy(q);
    EXPECT_EQ(r.method, SrelMethod::kExactPure);
    const Matrix2 red = oracle::reduce_first(oracle::polarization_density_product(q));
    EXPECT_NEAR(r.value, oracle::entropy_bits(red), 1e-10);
  }
}

TEST(RelativeEntropy, BoundedByConcurrenceOnBellMixtures) {
  for (int i = 0; i <= 100; ++i) {
    const QuquartParams q = bell_mixture(i / 100.0);
    EXPECT_LE(relative_entropy(q).value, concurrence_mps(q) + 1e-9) << "i=" << i;
  }
}

TEST(RelativeEntropy, NotConvergedCarriesBound) {
  SeparableSearchOptions opts;
  opts.max_iterations = 1;
  opts.restarts = 1;
  const QuquartParams q = bell_mixture(0.9);
  try {
    minimize_relative_entropy(to_product_basis(mps_density(q)), opts);
    FAIL() << "expected OptimizerNotConverged";
  } catch (const OptimizerNotConverged& e) {
    EXPECT_EQ(e.code(), ErrorCode::kOptimizerNotConverged);
    EXPECT_GE(e.best_bound(), 1.0 - oracle::binary_entropy(0.9) - 1e-9);
  }
}

// ---------- classical correlations ----------

TEST(ClassicalCorrelations, Examples) {
  ClassicalCorrelations c = classical_correlations(make_ququart(1.0, 0.0, 0.0, 0.0));
  EXPECT_NEAR(c.c_cl, 0.0, 1e-12);
  EXPECT_NEAR(c.c_cl_from_k, 0.0, 1e-12);
  EXPECT_NEAR(c.mutual_info, 0.0, 1e-12);

  c = classical_correlations(make_ququart(0.0, 0.0, 0.0, 1.0));
  EXPECT_NEAR(c.c_cl_from_k, 1.0, 1e-12);
  EXPECT_NEAR(c.mutual_info, 2.0, 1e-12);
  EXPECT_NEAR(c.c_cl, 1.0, 1e-12);

  const QuquartParams q = bell_mixture(0.9);
  c = classical_correlations(q);
  EXPECT_NEAR(c.c_cl_from_k, std::sqrt(2 * (1 - 1 / schmidt_K_mps(q))), 1e-15);
  EXPECT_NEAR(c.c_cl, c.c_cl_from_k, 1e-6);
}

TEST(ClassicalCorrelations, PureStatesSplitIntoTwoCoincidingPairs) {
  // For B- = 0 the frequency-averaged state stays pure. S_rel, C_cl and I/2
  // all equal the entropy of entanglement; C-bar and sqrt(2(1 - 1/K)) both
  // equal the concurrence.
  Rng rng = make_rng(35);
  for (int i = 0; i < 100; ++i) {
    QuquartParams q = random_ququart(rng);
    q = make_ququart(q.c1, q.b_plus, q.c4, 0.0, Renormalize::kYes);
    const CorrelationReport r = correlation_report(q);
    EXPECT_NEAR(r.s_rel, r.mutual_info / 2, 1e-9);
    EXPECT_NEAR(r.c_cl, r.mutual_info / 2, 1e-9);
    EXPECT_NEAR(r.c_bar, r.c_cl_from_k, 1e-9);
    // Pure-state link between the pairs.
    const double c = r.c_bar;
    EXPECT_NEAR(r.s_rel, oracle::binary_entropy(0.5 * (1 + std::sqrt(1 - c * c))), 1e-9);
  }
}

TEST(ClassicalCorrelations, FourWayEqualityAtBellPoints) {
  for (const QuquartParams& q :
       {make_ququart(0.0, 1.0, 0.0, 0.0), make_ququart(0.0, 0.0, 0.0, 1.0),
        make_ququart(kInvSqrt2, 0.0, kInvSqrt2, 0.0), make_ququart(1.0, 0.0, 0.0, 0.0)}) {
    const CorrelationReport r = correlation_report(q);
    const double half = r.mutual_info / 2;
    EXPECT_NEAR(r.c_bar, half, 1e-9);
    EXPECT_NEAR(r.s_rel, half, 1e-9);
    EXPECT_NEAR(r.c_cl, half, 1e-9);
    EXPECT_NEAR(r.c_cl_from_k, half, 1e-9);
  }
}

TEST(ClassicalCorrelations, MixedStatesBreakTheKRelation) {
  const QuquartParams q = make_ququart(0.0, kInvSqrt2, 0.0, kInvSqrt2);
  const CorrelationReport r = correlation_report(q);
  EXPECT_NEAR(r.c_bar, 0.0, 1e-12);
  EXPECT_NEAR(std::sqrt(2 * (1 - 1 / r.k_bar)), 1.0, 1e-12);
}

// ---------- two-qubit model ----------

TEST(TwoQubitModel, Examples) {
  TwoQubitMetrics m = two_qubit_model_metrics(make_ququart(1.0, 0.0, 0.0, 0.0));
  EXPECT_NEAR(m.k_2qb, 1.0, 1e-15);
  EXPECT_NEAR(m.c_2qb, 0.0, 1e-15);

  const QuquartParams q = make_ququart(0.0, kInvSqrt2, 0.0, kInvSqrt2);
  m = two_qubit_model_metrics(q);
  EXPECT_NEAR(m.k_2qb, 1.0, 1e-12);
  EXPECT_NEAR(m.c_2qb, 0.0, 1e-12);
  EXPECT_NEAR(schmidt_K_mps(q), 2.0, 1e-12);
  EXPECT_NEAR(concurrence_mps(q), 0.0, 1e-12);

  m = two_qubit_model_metrics(make_ququart(0.0, 0.0, 0.0, 1.0));
  EXPECT_NEAR(m.k_2qb, 2.0, 1e-12);
  EXPECT_NEAR(m.c_2qb, 1.0, 1e-12);
}

TEST(TwoQubitModel, AgreesWithMpsWhenBMinusVanishes) {
  Rng rng = make_rng(36);
  for (int i = 0; i < 1000; ++i) {
    QuquartParams q = random_ququart(rng);
    q = make_ququart(q.c1, q.b_plus, q.c4, 0.0, Renormalize::kYes);
    const TwoQubitMetrics m = two_qubit_model_metrics(q);
    EXPECT_NEAR(m.k_2qb, schmidt_K_mps(q), 1e-12);
    EXPECT_NEAR(m.c_2qb, concurrence_mps(q), 1e-12);
  }
}

TEST(CorrelationReport, PolarizationDegreeIdentity) {
  Rng rng = make_rng(37);
  for (int i = 0; i < 10000; ++i) {
    const QuquartParams q = random_ququart(rng);
    const double p = stokes_and_polarization(reduce_one_photon(mps_density(q))).second;
    ASSERT_NEAR(p * p + 2 * (1 - 1 / schmidt_K_mps(q)), 1.0, 1e-12);
  }
}
