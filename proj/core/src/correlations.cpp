#include "qqlab/correlations.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <boost/random/normal_distribution.hpp>
#include <boost/random/uniform_real_distribution.hpp>
#include <fmt/format.h>

#include "qqlab/error.hpp"

namespace qqlab {
namespace {

constexpr double kZeroAmplitude = 1e-12;

// Eigenvalues of sigma below this are floored when taking logarithms.
constexpr double kLogFloor = 1e-13;

// Spin flip sy x sy on the product basis {HH, HV, VH, VV}.
const Matrix4& spin_flip() {
  static const Matrix4 yy = [] {
    Matrix4 m = Matrix4::Zero();
    m(0, 3) = -1.0;
    m(1, 2) = 1.0;
    m(2, 1) = 1.0;
    m(3, 0) = -1.0;
    return m;
  }();
  return yy;
}

Matrix2 qubit_projector(const Eigen::Vector3d& r) {
  Matrix2 m;
  m(0, 0) = 0.5 * (1.0 + r.z());
  m(1, 1) = 0.5 * (1.0 - r.z());
  m(0, 1) = Amplitude(0.5 * r.x(), -0.5 * r.y());
  m(1, 0) = std::conj(m(0, 1));
  return m;
}

Matrix4 kron(const Matrix2& a, const Matrix2& b) {
  Matrix4 m;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      for (int k = 0; k < 2; ++k)
        for (int l = 0; l < 2; ++l) m(2 * i + k, 2 * j + l) = a(i, j) * b(k, l);
  return m;
}

// Re Tr(X sigma_j)/2 for j = x, y, z, i.e. the Bloch-vector gradient of
// Re Tr(X rho(r)).
Eigen::Vector3d bloch_gradient(const Matrix2& x) {
  return {0.5 * (x(0, 1) + x(1, 0)).real(),
          0.5 * (Amplitude(0, 1) * (x(0, 1) - x(1, 0))).real(),
          0.5 * (x(0, 0) - x(1, 1)).real()};
}

void project_to_simplex(Eigen::VectorXd& w) {
  std::vector<double> u(w.data(), w.data() + w.size());
  std::sort(u.begin(), u.end(), std::greater<>());
  double cumulative = 0.0;
  double theta = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    cumulative += u[i];
    const double t = (cumulative - 1.0) / static_cast<double>(i + 1);
    if (u[i] - t > 0.0) theta = t;
  }
  w = (w.array() - theta).max(0.0);
}

struct Mixture {
  Eigen::VectorXd weights;
  std::vector<Eigen::Vector3d> a;
  std::vector<Eigen::Vector3d> b;
};

class SeparableSearch {
 public:
  SeparableSearch(const Matrix4& rho, const SeparableSearchOptions& options)
      : rho_(rho), options_(options) {}

  // -Tr(rho log2 sigma) and, optionally, its gradient with respect to sigma.
  double cross_entropy(const Matrix4& sigma, Matrix4* gradient) const {
    Eigen::SelfAdjointEigenSolver<Matrix4> es(sigma);
    const Eigen::Vector4d s = es.eigenvalues().cwiseMax(kLogFloor);
    const Matrix4& u = es.eigenvectors();
    const Matrix4 rho_eig = u.adjoint() * rho_ * u;
    double value = 0.0;
    for (int i = 0; i < 4; ++i) value -= rho_eig(i, i).real() * std::log2(s(i));
    if (gradient != nullptr) {
      Matrix4 g;
      for (int i = 0; i < 4; ++i) {
        for (int j = 0; j < 4; ++j) {
          const double gap = s(i) - s(j);
          const double divided =
              std::abs(gap) > 1e-12 * std::max(s(i), s(j))
                  ? (std::log(s(i)) - std::log(s(j))) / gap
                  : 1.0 / s(i);
          g(i, j) = rho_eig(i, j) * divided;
        }
      }
      *gradient = -(u * g * u.adjoint()) / std::numbers::ln2;
    }
    return value;
  }

  static Matrix4 assemble(const Mixture& m) {
    Matrix4 sigma = Matrix4::Zero();
    for (Eigen::Index k = 0; k < m.weights.size(); ++k) {
      if (m.weights(k) == 0.0) continue;
      sigma += m.weights(k) * kron(qubit_projector(m.a[k]), qubit_projector(m.b[k]));
    }
    return sigma;
  }

  // Returns the best cross entropy reached; sets converged/iterations.
  double descend(Mixture& m, bool& converged, int& iterations) const {
    const int n = static_cast<int>(m.weights.size());
    Matrix4 grad;
    double f = cross_entropy(assemble(m), &grad);
    double step = 1.0;
    constexpr int kWindow = 50;
    std::vector<double> history;
    history.reserve(static_cast<std::size_t>(options_.max_iterations) + 1);
    history.push_back(f);
    converged = false;

    Eigen::VectorXd gw(n);
    std::vector<Eigen::Vector3d> ga(n), gb(n);
    for (iterations = 0; iterations < options_.max_iterations; ++iterations) {
      for (int k = 0; k < n; ++k) {
        const Matrix2 pa = qubit_projector(m.a[k]);
        const Matrix2 pb = qubit_projector(m.b[k]);
        // Contract the gradient with one factor to get the other's 2x2 slice.
        Matrix2 ga_slice = Matrix2::Zero();
        Matrix2 gb_slice = Matrix2::Zero();
        for (int i = 0; i < 2; ++i)
          for (int j = 0; j < 2; ++j)
            for (int c = 0; c < 2; ++c)
              for (int d = 0; d < 2; ++d) {
                ga_slice(i, j) += grad(2 * i + c, 2 * j + d) * pb(d, c);
                gb_slice(c, d) += grad(2 * i + c, 2 * j + d) * pa(j, i);
              }
        gw(k) = (ga_slice * pa).trace().real();
        ga[k] = bloch_gradient(ga_slice);
        gb[k] = bloch_gradient(gb_slice);
      }

      bool accepted = false;
      step *= 2.0;
      Mixture trial = m;
      double f_trial = f;
      while (step > 1e-14) {
        double moved = 0.0;
        trial.weights = m.weights - step * gw;
        project_to_simplex(trial.weights);
        moved += (trial.weights - m.weights).squaredNorm();
        for (int k = 0; k < n; ++k) {
          trial.a[k] = (m.a[k] - step * ga[k]).normalized();
          trial.b[k] = (m.b[k] - step * gb[k]).normalized();
          moved += (trial.a[k] - m.a[k]).squaredNorm() +
                   (trial.b[k] - m.b[k]).squaredNorm();
        }
        f_trial = cross_entropy(assemble(trial), nullptr);
        if (f_trial <= f - 1e-4 * moved / step && moved > 0.0) {
          accepted = true;
          break;
        }
        step *= 0.5;
      }
      if (!accepted) {
        converged = true;  // no descent direction left at this resolution
        break;
      }
      m = std::move(trial);
      f = cross_entropy(assemble(m), &grad);
      history.push_back(f);
      if (history.size() > kWindow &&
          history[history.size() - 1 - kWindow] - f < 1e-2 * options_.tolerance) {
        converged = true;
        ++iterations;
        break;
      }
    }
    return f;
  }

  RelativeEntropyResult run() const {
    const double entropy = von_neumann_entropy(Eigen::MatrixXcd(rho_));
    Rng rng(options_.seed);
    boost::random::normal_distribution<double> normal;
    boost::random::uniform_real_distribution<double> uniform(0.5, 1.5);
    const int n = std::max(options_.components, 4);

    double best = std::numeric_limits<double>::infinity();
    bool any_converged = false;
    int total_iterations = 0;
    for (int restart = 0; restart < std::max(options_.restarts, 1); ++restart) {
      Mixture m;
      m.weights.resize(n);
      m.a.resize(n);
      m.b.resize(n);
      for (int k = 0; k < n; ++k) {
        m.a[k] = Eigen::Vector3d(normal(rng), normal(rng), normal(rng)).normalized();
        m.b[k] = Eigen::Vector3d(normal(rng), normal(rng), normal(rng)).normalized();
        m.weights(k) = uniform(rng);
      }
      m.weights /= m.weights.sum();
      if (restart == 0) {
        // Start from the dephased state: product-basis diagonal of rho.
        for (int k = 0; k < 4; ++k) {
          m.a[k] = Eigen::Vector3d(0, 0, (k / 2) == 0 ? 1.0 : -1.0);
          m.b[k] = Eigen::Vector3d(0, 0, (k % 2) == 0 ? 1.0 : -1.0);
        }
        for (int k = 0; k < n; ++k) {
          const double diag = k < 4 ? rho_(k, k).real() : 0.0;
          m.weights(k) = 0.9 * diag + 0.1 / n;
        }
      }
      bool converged = false;
      int iterations = 0;
      const double f = descend(m, converged, iterations);
      total_iterations += iterations;
      any_converged = any_converged || converged;
      best = std::min(best, f);
    }
    const double value = std::max(best - entropy, 0.0);
    if (!any_converged) {
      throw OptimizerNotConverged(
          value, fmt::format("separable-state search stopped at {} iterations "
                             "without meeting tolerance; best bound {:.9g}",
                             total_iterations, value));
    }
    return {value, SrelMethod::kNumericMinimization, true, total_iterations};
  }

 private:
  Matrix4 rho_;
  SeparableSearchOptions options_;
};

}  // namespace

std::string_view to_string(SrelMethod method) noexcept {
  switch (method) {
    case SrelMethod::kClosedFormBellMixture: return "closed_form_bell_mixture";
    case SrelMethod::kNumericMinimization: return "numeric_minimization";
    case SrelMethod::kExactPure: return "exact_pure";
  }
  return "unknown";
}

double binary_entropy(double p) noexcept {
  constexpr double kLo = 1e-300;
  const double x = std::clamp(p, kLo, 1.0 - kLo);
  const double y = 1.0 - x;
  return -x * std::log2(x) - (y > 0.0 ? y * std::log2(y) : 0.0);
}

double schmidt_K_mps(const QuquartParams& q) noexcept {
  const double bm2 = std::norm(q.b_minus);
  const Amplitude d = 2.0 * q.c1 * q.c4 - q.b_plus * q.b_plus;
  return 2.0 / (1.0 + (1.0 - bm2) * (1.0 - bm2) - std::norm(d));
}

double concurrence_mps(const QuquartParams& q) noexcept {
  const Amplitude d = 2.0 * q.c1 * q.c4 - q.b_plus * q.b_plus;
  return std::abs(std::abs(d) - std::norm(q.b_minus));
}

double wootters_concurrence_product(const Matrix4& rho_product) {
  Eigen::SelfAdjointEigenSolver<Matrix4> es(rho_product);
  if (es.info() != Eigen::Success) {
    throw Error(ErrorCode::kNumericalFailure, "eigensolver did not converge");
  }
  Matrix4 v = es.eigenvectors();
  for (int k = 0; k < 4; ++k) {
    v.col(k) *= std::sqrt(std::max(es.eigenvalues()(k), 0.0));
  }
  const Matrix4 tau = v.transpose() * spin_flip() * v;
  const Eigen::JacobiSVD<Matrix4> svd(tau);
  const Eigen::Vector4d l = svd.singularValues();
  if (!l.allFinite()) {
    throw Error(ErrorCode::kNumericalFailure, "SVD produced non-finite values");
  }
  return std::max(0.0, l(0) - l(1) - l(2) - l(3));
}

double wootters_concurrence(const MPSDensity& rho) {
  return wootters_concurrence_product(to_product_basis(rho));
}

RelativeEntropyResult minimize_relative_entropy(
    const Matrix4& rho_product, const SeparableSearchOptions& options) {
  return SeparableSearch(rho_product, options).run();
}

RelativeEntropyResult relative_entropy(const QuquartParams& q,
                                       const SeparableSearchOptions& options) {
  const double bm2 = std::norm(q.b_minus);
  if (std::abs(q.b_minus) <= kZeroAmplitude || bm2 >= 1.0 - 1e-12) {
    const double s = von_neumann_entropy(reduce_one_photon(mps_density(q)));
    return {s, SrelMethod::kExactPure, true, 0};
  }
  if (std::abs(q.c1) <= kZeroAmplitude && std::abs(q.c4) <= kZeroAmplitude) {
    const double bp2 = std::norm(q.b_plus);
    const double p = std::max(bp2, bm2) / (bp2 + bm2);
    const double s = p > 0.5 ? 1.0 - binary_entropy(p) : 0.0;
    return {s, SrelMethod::kClosedFormBellMixture, true, 0};
  }
  return minimize_relative_entropy(to_product_basis(mps_density(q)), options);
}

ClassicalCorrelations classical_correlations(const QuquartParams& q,
                                             double s_rel) {
  const MPSDensity rho = mps_density(q);
  const double mutual = 2.0 * von_neumann_entropy(reduce_one_photon(rho)) -
                        von_neumann_entropy(rho);
  const double k = schmidt_K_mps(q);
  return {mutual - s_rel, std::sqrt(std::max(0.0, 2.0 * (1.0 - 1.0 / k))),
          mutual};
}

ClassicalCorrelations classical_correlations(const QuquartParams& q,
                                             const SeparableSearchOptions& options) {
  return classical_correlations(q, relative_entropy(q, options).value);
}

TwoQubitMetrics two_qubit_model_metrics(const QuquartParams& q) noexcept {
  const double c = std::abs(2.0 * q.c1 * q.c4 - q.b_plus * q.b_plus +
                            q.b_minus * q.b_minus);
  return {2.0 / (2.0 - c * c), c};
}

CorrelationReport correlation_report(const QuquartParams& q,
                                     const SeparableSearchOptions& options) {
  CorrelationReport r;
  r.k_bar = schmidt_K_mps(q);
  r.c_bar = concurrence_mps(q);
  const RelativeEntropyResult srel = relative_entropy(q, options);
  r.s_rel = srel.value;
  r.s_rel_method = srel.method;
  const ClassicalCorrelations cc = classical_correlations(q, srel.value);
  r.mutual_info = cc.mutual_info;
  r.c_cl = cc.c_cl;
  r.c_cl_from_k = cc.c_cl_from_k;
  r.p_bar = stokes_and_polarization(reduce_one_photon(mps_density(q))).second;
  const TwoQubitMetrics tq = two_qubit_model_metrics(q);
  r.k_2qb = tq.k_2qb;
  r.c_2qb = tq.c_2qb;
  return r;
}

}  // namespace qqlab
