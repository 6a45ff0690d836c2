#include "qqlab/density.hpp"

#include <cmath>
#include <numbers>

#include <Eigen/Eigenvalues>
#include <fmt/format.h>

#include "qqlab/error.hpp"

namespace qqlab {
namespace {

constexpr double kNegativeEigenvalueLimit = -1e-8;

using PF = PolFreqWaveFunction;

Eigen::Index at(int s1, int w1, int s2, int w2) {
  return static_cast<Eigen::Index>(PF::index(Pol(s1), Freq(w1), Pol(s2), Freq(w2)));
}

}  // namespace

double StokesVector::norm() const noexcept {
  return std::sqrt(s1 * s1 + s2 * s2 + s3 * s3);
}

const Matrix4& bell_basis() noexcept {
  static const Matrix4 u = [] {
    const double h = 1.0 / std::numbers::sqrt2;
    Matrix4 m = Matrix4::Zero();
    m(0, 0) = 1.0;             // Psi_HH
    m(1, 1) = h; m(2, 1) = h;  // Psi+
    m(3, 2) = 1.0;             // Psi_VV
    m(1, 3) = h; m(2, 3) = -h; // Psi-
    return m;
  }();
  return u;
}

DensityMatrix16 full_density(const PolFreqWaveFunction& psi) {
  const auto v = psi.as_vector();
  return {v * v.adjoint()};
}

MPSDensity trace_out_frequency(const DensityMatrix16& rho) {
  const Amplitude tr = rho.entries.trace();
  if (std::abs(tr - 1.0) > 1e-9) {
    throw Error(ErrorCode::kNotTraceOne,
                fmt::format("trace = {:.17g}{:+.17g}i", tr.real(), tr.imag()));
  }
  Matrix4 product = Matrix4::Zero();
  for (int s1 = 0; s1 < 2; ++s1) {
    for (int s2 = 0; s2 < 2; ++s2) {
      for (int t1 = 0; t1 < 2; ++t1) {
        for (int t2 = 0; t2 < 2; ++t2) {
          Amplitude sum = 0.0;
          for (int w1 = 0; w1 < 2; ++w1) {
            for (int w2 = 0; w2 < 2; ++w2) {
              sum += rho.entries(at(s1, w1, s2, w2), at(t1, w1, t2, w2));
            }
          }
          product(2 * s1 + s2, 2 * t1 + t2) = sum;
        }
      }
    }
  }
  return from_product_basis(product);
}

MPSDensity mps_density(const QuquartParams& q) noexcept {
  Eigen::Vector4cd qutrit(q.c1, q.b_plus, q.c4, 0.0);
  MPSDensity rho{qutrit * qutrit.adjoint()};
  rho.entries(3, 3) = std::norm(q.b_minus);
  return rho;
}

Matrix4 to_product_basis(const MPSDensity& rho) noexcept {
  const Matrix4& u = bell_basis();
  return u * rho.entries * u.adjoint();
}

MPSDensity from_product_basis(const Matrix4& rho_product) noexcept {
  const Matrix4& u = bell_basis();
  return {u.adjoint() * rho_product * u};
}

ReducedDensity2 reduce_one_photon(const MPSDensity& rho,
                                  Photon traced) noexcept {
  const Matrix4 p = to_product_basis(rho);
  ReducedDensity2 r;
  for (int a = 0; a < 2; ++a) {
    for (int b = 0; b < 2; ++b) {
      for (int k = 0; k < 2; ++k) {
        if (traced == Photon::kSecond) {
          r.entries(a, b) += p(2 * a + k, 2 * b + k);
        } else {
          r.entries(a, b) += p(2 * k + a, 2 * k + b);
        }
      }
    }
  }
  return r;
}

ReducedDensity2 one_photon_polarization(const DensityMatrix16& rho,
                                        Photon kept) noexcept {
  ReducedDensity2 r;
  for (int a = 0; a < 2; ++a) {
    for (int b = 0; b < 2; ++b) {
      Amplitude sum = 0.0;
      for (int w = 0; w < 2; ++w) {
        for (int s = 0; s < 2; ++s) {
          for (int v = 0; v < 2; ++v) {
            if (kept == Photon::kFirst) {
              sum += rho.entries(at(a, w, s, v), at(b, w, s, v));
            } else {
              sum += rho.entries(at(s, v, a, w), at(s, v, b, w));
            }
          }
        }
      }
      r.entries(a, b) = sum;
    }
  }
  return r;
}

std::pair<StokesVector, double> stokes_and_polarization(
    const ReducedDensity2& rho) noexcept {
  const Matrix2& m = rho.entries;
  StokesVector s{2.0 * m(0, 1).real(), -2.0 * m(0, 1).imag(),
                 m(0, 0).real() - m(1, 1).real()};
  return {s, s.norm()};
}

Eigen::Vector2d eigenvalues_2x2(const Matrix2& m) noexcept {
  const double a = m(0, 0).real();
  const double d = m(1, 1).real();
  const double half_gap = std::hypot(0.5 * (a - d), std::abs(m(0, 1)));
  const double mean = 0.5 * (a + d);
  return {mean - half_gap, mean + half_gap};
}

Eigen::VectorXd hermitian_eigenvalues(const Eigen::MatrixXcd& m) {
  if (m.rows() == 2 && m.cols() == 2) {
    return eigenvalues_2x2(m);
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(m, Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) {
    throw Error(ErrorCode::kNumericalFailure, "Hermitian eigensolver failed");
  }
  return solver.eigenvalues();
}

double entropy_of_spectrum(const Eigen::VectorXd& eigenvalues) {
  double s = 0.0;
  for (double lambda : eigenvalues) {
    if (lambda < kNegativeEigenvalueLimit) {
      throw Error(ErrorCode::kNotPSD,
                  fmt::format("eigenvalue {:.3e} below {:.0e}", lambda,
                              kNegativeEigenvalueLimit));
    }
    if (lambda > 0.0) s -= lambda * std::log2(lambda);
  }
  return std::max(s, 0.0);
}

double von_neumann_entropy(const Eigen::MatrixXcd& rho) {
  return entropy_of_spectrum(hermitian_eigenvalues(rho));
}

double von_neumann_entropy(const ReducedDensity2& rho) {
  return entropy_of_spectrum(eigenvalues_2x2(rho.entries));
}

double von_neumann_entropy(const MPSDensity& rho) {
  return von_neumann_entropy(Eigen::MatrixXcd(rho.entries));
}

double von_neumann_entropy(const DensityMatrix16& rho) {
  return von_neumann_entropy(Eigen::MatrixXcd(rho.entries));
}

double purity(const Eigen::MatrixXcd& rho) {
  return (rho * rho).trace().real();
}

}  // namespace qqlab
