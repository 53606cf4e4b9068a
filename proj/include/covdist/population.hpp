#pragma once

#include <Eigen/Dense>
#include <functional>
#include <utility>
#include <vector>

#include "covdist/errors.hpp"

namespace covdist {

/// Observation field: real data (varsigma = 1) or circularly-symmetric
/// complex data (varsigma = 0).
enum class Field { Real, Complex };

inline int varsigma(Field f) { return f == Field::Real ? 1 : 0; }

/// A known covariance matrix together with its distinct-eigenvalue structure:
/// ascending atoms gamma_1 < ... < gamma_Mbar, multiplicities K_m, and the
/// orthogonal eigenprojections Pi_m.
class PopulationModel {
 public:
  /// Eigenvalues closer than cluster_tol * gamma_max are merged into one atom.
  explicit PopulationModel(Eigen::MatrixXd covariance, Field field = Field::Real,
                           double cluster_tol = 1e-8);

  int dim() const { return static_cast<int>(covariance_.rows()); }
  Field field() const { return field_; }
  const Eigen::MatrixXd& covariance() const { return covariance_; }
  const Eigen::MatrixXd& sqrt_covariance() const { return sqrt_; }

  int num_atoms() const { return static_cast<int>(gamma_.size()); }
  const Eigen::VectorXd& atom_values() const { return gamma_; }
  const Eigen::VectorXi& atom_multiplicities() const { return mult_; }
  double atom_value(int m) const { return gamma_(m); }
  int atom_multiplicity(int m) const { return mult_(m); }

  /// Full spectrum (eigenvalues with multiplicity, ascending) and eigenbasis.
  const Eigen::VectorXd& eigenvalues() const { return lambda_; }
  const Eigen::MatrixXd& eigenvectors() const { return basis_; }

  /// Column range of the eigenvectors spanning atom m: (offset, size).
  std::pair<int, int> atom_block(int m) const {
    return {offset_(m), mult_(m)};
  }

  /// Materialized eigenprojection Pi_m.
  Eigen::MatrixXd projector(int m) const;

  /// f(R) through the eigendecomposition (f applied to the eigenvalues).
  Eigen::MatrixXd apply(const std::function<double(double)>& f) const;

  /// Congruence into the eigenbasis: V^T A V.
  Eigen::MatrixXd to_eigenbasis(const Eigen::MatrixXd& a) const {
    return basis_.transpose() * a * basis_;
  }

  /// tr[Pi_m A] given A already expressed in the eigenbasis.
  double projector_trace(const Eigen::MatrixXd& a_eig, int m) const;

  /// tr[Pi_m A Pi_n B] given A, B already expressed in the eigenbasis.
  double projector_pair_trace(const Eigen::MatrixXd& a_eig,
                              const Eigen::MatrixXd& b_eig, int m, int n) const;

  bool same_population(const PopulationModel& other) const {
    return dim() == other.dim() && covariance_ == other.covariance_;
  }

 private:
  Eigen::MatrixXd covariance_;
  Eigen::MatrixXd sqrt_;
  Eigen::MatrixXd basis_;
  Eigen::VectorXd lambda_;
  Eigen::VectorXd gamma_;
  Eigen::VectorXi mult_;
  Eigen::VectorXi offset_;
  Field field_;
};

/// Symmetric Toeplitz model with first row [1, rho, rho^2, ...]; positive
/// definite for every |rho| < 1.
PopulationModel toeplitz_model(double rho, int M, Field field = Field::Real);

}  // namespace covdist
