#include "covdist/population.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>

namespace covdist {

PopulationModel::PopulationModel(Eigen::MatrixXd covariance, Field field,
                                 double cluster_tol)
    : covariance_(std::move(covariance)), field_(field) {
  const int m = dim();
  if (m < 1 || covariance_.cols() != m)
    throw domain_error("PopulationModel: covariance must be square");
  if (!covariance_.isApprox(covariance_.transpose(), 1e-10))
    throw domain_error("PopulationModel: covariance must be symmetric");

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(covariance_);
  if (eig.info() != Eigen::Success)
    throw numerical_error("PopulationModel: eigendecomposition failed");
  lambda_ = eig.eigenvalues();
  basis_ = eig.eigenvectors();
  if (lambda_(0) <= 0.0)
    throw domain_error("PopulationModel: covariance must be positive definite");

  sqrt_ = basis_ * lambda_.cwiseSqrt().asDiagonal() * basis_.transpose();

  // Cluster numerically repeated eigenvalues into (gamma, K) atoms.
  const double gap = cluster_tol * lambda_(m - 1);
  std::vector<double> gammas;
  std::vector<int> mults;
  std::vector<int> offsets;
  int start = 0;
  for (int i = 1; i <= m; ++i) {
    if (i == m || lambda_(i) - lambda_(i - 1) > gap) {
      gammas.push_back(lambda_.segment(start, i - start).mean());
      mults.push_back(i - start);
      offsets.push_back(start);
      start = i;
    }
  }
  gamma_ = Eigen::Map<Eigen::VectorXd>(gammas.data(), gammas.size());
  mult_ = Eigen::Map<Eigen::VectorXi>(mults.data(), mults.size());
  offset_ = Eigen::Map<Eigen::VectorXi>(offsets.data(), offsets.size());

  // Reconstruction check: sum_m gamma_m Pi_m must reproduce R.
  Eigen::VectorXd rounded(m);
  for (int a = 0; a < num_atoms(); ++a)
    rounded.segment(offset_(a), mult_(a)).setConstant(gamma_(a));
  const Eigen::MatrixXd recon =
      basis_ * rounded.asDiagonal() * basis_.transpose();
  if ((recon - covariance_).norm() > 1e-10 * std::max(1.0, covariance_.norm()))
    throw internal_consistency_error(
        "PopulationModel: atom reconstruction exceeds tolerance");
}

Eigen::MatrixXd PopulationModel::projector(int m) const {
  const auto [off, size] = atom_block(m);
  const auto block = basis_.middleCols(off, size);
  return block * block.transpose();
}

Eigen::MatrixXd PopulationModel::apply(
    const std::function<double(double)>& f) const {
  Eigen::VectorXd mapped(dim());
  for (int a = 0; a < num_atoms(); ++a)
    mapped.segment(offset_(a), mult_(a)).setConstant(f(gamma_(a)));
  return basis_ * mapped.asDiagonal() * basis_.transpose();
}

double PopulationModel::projector_trace(const Eigen::MatrixXd& a_eig,
                                        int m) const {
  const auto [off, size] = atom_block(m);
  return a_eig.diagonal().segment(off, size).sum();
}

double PopulationModel::projector_pair_trace(const Eigen::MatrixXd& a_eig,
                                             const Eigen::MatrixXd& b_eig,
                                             int m, int n) const {
  const auto [off_m, size_m] = atom_block(m);
  const auto [off_n, size_n] = atom_block(n);
  return a_eig.block(off_m, off_n, size_m, size_n)
      .cwiseProduct(b_eig.block(off_n, off_m, size_n, size_m).transpose())
      .sum();
}

PopulationModel toeplitz_model(double rho, int M, Field field) {
  if (!(std::fabs(rho) < 1.0))
    throw domain_error("toeplitz_model: |rho| must be < 1");
  if (M < 1) throw domain_error("toeplitz_model: M must be positive");
  Eigen::MatrixXd r(M, M);
  for (int i = 0; i < M; ++i)
    for (int j = 0; j < M; ++j) r(i, j) = std::pow(rho, std::abs(i - j));
  return PopulationModel(std::move(r), field);
}

}  // namespace covdist
