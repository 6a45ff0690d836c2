#pragma once

#include <cstdint>
#include <string_view>

#include "qqlab/density.hpp"
#include "qqlab/state.hpp"

namespace qqlab {

enum class SrelMethod { kClosedFormBellMixture, kNumericMinimization, kExactPure };

std::string_view to_string(SrelMethod method) noexcept;

// Search over separable two-qubit states written as convex mixtures of
// `components` pure product states, each a pair of unit Bloch vectors.
struct SeparableSearchOptions {
  int components = 32;
  int restarts = 20;
  double tolerance = 1e-6;
  int max_iterations = 4000;
  std::uint64_t seed = 20120531;
};

struct RelativeEntropyResult {
  double value = 0.0;  // bits
  SrelMethod method = SrelMethod::kExactPure;
  bool converged = true;
  int iterations = 0;
};

struct ClassicalCorrelations {
  double c_cl = 0.0;         // I - S_rel
  double c_cl_from_k = 0.0;  // sqrt(2 (1 - 1/K))
  double mutual_info = 0.0;  // 2 S(rho_r) - S(rho), bits
};

struct TwoQubitMetrics {
  double k_2qb = 1.0;
  double c_2qb = 0.0;
};

struct CorrelationReport {
  double k_bar = 1.0;
  double c_bar = 0.0;
  double s_rel = 0.0;
  double mutual_info = 0.0;
  double c_cl = 0.0;
  double c_cl_from_k = 0.0;
  double p_bar = 1.0;
  double k_2qb = 1.0;
  double c_2qb = 0.0;
  SrelMethod s_rel_method = SrelMethod::kExactPure;
};

// Binary entropy in bits with the argument clamped to [1e-300, 1 - 1e-300].
double binary_entropy(double p) noexcept;

// K = 2 / (1 + (1 - |B-|^2)^2 - |2 C1 C4 - B+^2|^2).
double schmidt_K_mps(const QuquartParams& q) noexcept;

// C = | |2 C1 C4 - B+^2| - |B-|^2 |.
double concurrence_mps(const QuquartParams& q) noexcept;

// Wootters concurrence max(0, l1 - l2 - l3 - l4). The l_i are obtained as
// singular values of tau = V^T (sy x sy) V with rho = V V^dagger, which
// equal the square roots of the eigenvalues of rho (sy x sy) rho* (sy x sy).
double wootters_concurrence(const MPSDensity& rho);
double wootters_concurrence_product(const Matrix4& rho_product);

// min over separable sigma of Tr[rho (log2 rho - log2 sigma)] by projected
// gradient descent with random restarts. Returns the smallest value found.
// Throws OptimizerNotConverged if no restart met the stopping rule.
RelativeEntropyResult minimize_relative_entropy(
    const Matrix4& rho_product, const SeparableSearchOptions& options = {});

// Relative entropy of entanglement of the mixed polarization state.
// Pure polarization states (B- = 0 or |B-| = 1) use the entropy of
// entanglement; the C1 = C4 = 0 family uses 1 - h(p_max); everything else
// goes through minimize_relative_entropy.
RelativeEntropyResult relative_entropy(const QuquartParams& q,
                                       const SeparableSearchOptions& options = {});

ClassicalCorrelations classical_correlations(const QuquartParams& q,
                                             double s_rel);
ClassicalCorrelations classical_correlations(const QuquartParams& q,
                                             const SeparableSearchOptions& options = {});

// Pure two-qubit model with frequencies treated as fixed labels:
// C = |2 C1 C4 - B+^2 + B-^2|, K = 2 / (2 - C^2).
TwoQubitMetrics two_qubit_model_metrics(const QuquartParams& q) noexcept;

CorrelationReport correlation_report(const QuquartParams& q,
                                     const SeparableSearchOptions& options = {});

}  // namespace qqlab
