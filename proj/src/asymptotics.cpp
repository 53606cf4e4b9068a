#include "covdist/asymptotics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <tuple>

#include "covdist/estimators.hpp"

namespace covdist {

namespace {

using Complex = std::complex<double>;

double checked_real(Complex v, const char* who) {
  if (std::abs(v.imag()) > 1e-8 * std::max(1.0, std::abs(v.real())))
    throw internal_consistency_error(
        std::string(who) + ": imaginary residual above tolerance");
  return v.real();
}

const AnalyticFn& term_fn(const MetricSpec& metric, int slot, int l) {
  return slot == 0 ? metric.terms[l].f1 : metric.terms[l].f2;
}

}  // namespace

void PairSystem::validate() const {
  if (models.empty()) throw domain_error("PairSystem: no models");
  if (models.size() != sample_counts.size())
    throw domain_error("PairSystem: one sample count per model");
  const int m = models.front().dim();
  for (const auto& model : models)
    if (model.dim() != m) throw domain_error("PairSystem: mixed dimensions");
  if (pairs.empty()) throw domain_error("PairSystem: no pairs");
  const int j = static_cast<int>(models.size());
  for (auto [a, b] : pairs) {
    if (a < 0 || b < 0 || a >= j || b >= j)
      throw domain_error("PairSystem: pair index out of range");
    if (a == b) throw domain_error("PairSystem: pair links a set to itself");
  }
  if (metric.oversampled_only)
    for (int n : sample_counts)
      if (n <= m)
        throw unsupported_regime_error(
            "PairSystem: metric requires N_j > M for every set");
}

// ---------------------------------------------------------------------------
// Closed-form means
// ---------------------------------------------------------------------------

Eigen::VectorXd mean_euclidean(const PairSystem& system) {
  system.validate();
  const double sig = varsigma(system.field);
  Eigen::VectorXd out(system.pairs.size());
  for (std::size_t r = 0; r < system.pairs.size(); ++r) {
    const auto [a, b] = system.pairs[r];
    const double t1 = system.models[a].covariance().squaredNorm();
    const double t2 = system.models[b].covariance().squaredNorm();
    out(r) = sig * (t1 / system.sample_counts[a] + t2 / system.sample_counts[b]);
  }
  return out;
}

Eigen::VectorXd mean_kl(const PairSystem& system) {
  system.validate();
  const double sig = varsigma(system.field);
  const int m = system.dim();
  Eigen::VectorXd out(system.pairs.size());
  for (std::size_t r = 0; r < system.pairs.size(); ++r) {
    const auto [a, b] = system.pairs[r];
    const Eigen::MatrixXd inv_a = system.models[a].apply([](double x) {
      return 1.0 / x;
    });
    const Eigen::MatrixXd inv_b = system.models[b].apply([](double x) {
      return 1.0 / x;
    });
    const double tr_ab = (inv_a * system.models[b].covariance()).trace();
    const double tr_ba = (system.models[a].covariance() * inv_b).trace();
    out(r) = 0.5 * sig *
             (tr_ab / (system.sample_counts[a] - m) +
              tr_ba / (system.sample_counts[b] - m));
  }
  return out;
}

namespace {

// One half of the log-Euclidean mean: the contribution of side `a` against
// side `b`, i.e. the eigenprojection term plus the residues at the zeros of
// z'_a. log_b / log2_b are log(R_b) and log^2(R_b) in a's eigenbasis.
Complex mean_le_half(const PopulationModel& ma, int na,
                     const Eigen::MatrixXd& log_b_eig,
                     const Eigen::MatrixXd& log2_b_eig) {
  Complex half{0.0, 0.0};
  for (int m = 0; m < ma.num_atoms(); ++m) {
    const double km = ma.atom_multiplicity(m);
    const double lg = std::log(ma.atom_value(m));
    const double quad = ma.projector_trace(log2_b_eig, m) -
                        2.0 * lg * ma.projector_trace(log_b_eig, m) +
                        lg * lg * km;
    half -= quad / km;
  }
  const Eigen::VectorXcd zeros = z_prime_zeros(ma, na);
  for (int t = 0; t < zeros.size(); ++t) {
    const Complex theta = zeros(t);
    const Complex ltheta = std::log(theta);
    Complex num{0.0, 0.0};
    Complex den{0.0, 0.0};
    for (int k = 0; k < ma.num_atoms(); ++k) {
      const double g = ma.atom_value(k);
      const Complex cube = (g - theta) * (g - theta) * (g - theta);
      const double kk = ma.atom_multiplicity(k);
      num += g * g *
             (ma.projector_trace(log2_b_eig, k) -
              2.0 * ltheta * ma.projector_trace(log_b_eig, k) +
              ltheta * ltheta * kk) /
             cube;
      den += g * g * kk / cube;
    }
    half += 0.5 * num / den;
  }
  return half;
}

}  // namespace

Eigen::VectorXd mean_le(const PairSystem& system) {
  system.validate();
  const double sig = varsigma(system.field);
  Eigen::VectorXd out(system.pairs.size());
  if (sig == 0.0) {
    out.setZero();
    return out;
  }
  for (std::size_t r = 0; r < system.pairs.size(); ++r) {
    const auto [a, b] = system.pairs[r];
    const auto& ma = system.models[a];
    const auto& mb = system.models[b];
    const auto log_fn = [](double x) { return std::log(x); };
    const auto log2_fn = [](double x) {
      const double l = std::log(x);
      return l * l;
    };
    const Complex v =
        mean_le_half(ma, system.sample_counts[a], ma.to_eigenbasis(mb.apply(log_fn)),
                     ma.to_eigenbasis(mb.apply(log2_fn))) +
        mean_le_half(mb, system.sample_counts[b], mb.to_eigenbasis(ma.apply(log_fn)),
                     mb.to_eigenbasis(ma.apply(log2_fn)));
    out(r) = sig * checked_real(v, "mean_le");
  }
  return out;
}

// ---------------------------------------------------------------------------
// Omega-domain contours
// ---------------------------------------------------------------------------

namespace {

struct OmegaDomain {
  Eigen::VectorXcd zeros;  // zeros of z'
  Contour contour;
};

OmegaDomain omega_domain(const PopulationModel& model, int n, double mu_inf,
                         int nodes) {
  OmegaDomain dom;
  dom.zeros = z_prime_zeros(model, n);
  double lo = model.atom_value(0);
  double hi = model.atom_value(model.num_atoms() - 1);
  double im = 0.0;
  double arg = 0.0;
  for (int i = 0; i < dom.zeros.size(); ++i) {
    lo = std::min(lo, dom.zeros(i).real());
    hi = std::max(hi, dom.zeros(i).real());
    im = std::max(im, std::fabs(dom.zeros(i).imag()));
    arg = std::max(arg, std::fabs(std::arg(dom.zeros(i))));
  }
  if (lo > 0.0) {
    // Enclosed poles span decades for correlated models; drawing the ellipse
    // in log coordinates keeps the trapezoidal rule spectrally accurate.
    const double angle = std::min(2.6, std::max(0.9, 1.5 * arg));
    dom.contour = make_log_ellipse(0.45 * lo, 1.25 * hi, angle, nodes);
  } else {
    // Undersampled case: the leftmost zero is negative, the functions in
    // play are entire, and a plain ellipse enclosing zero works.
    Contour c = make_ellipse(1.1 * lo, 1.25 * hi, 0.5, nodes);
    c.semi_y = std::max(c.semi_y, 2.0 * im);
    dom.contour = c;
  }
  validate_contour(dom.contour, mu_inf);
  return dom;
}

// Spec'd proximity guard: nodes within 1e-10 of a pole force a 3% dilation.
bool nodes_clear_of(const Contour& c, const Eigen::VectorXd& gamma,
                    const Eigen::VectorXcd& zeros) {
  for (int q = 0; q < c.nodes; ++q) {
    const Complex w = c.point(q);
    for (int m = 0; m < gamma.size(); ++m)
      if (std::abs(w - gamma(m)) < 1e-10) return false;
    for (int m = 0; m < zeros.size(); ++m)
      if (std::abs(w - zeros(m)) < 1e-10) return false;
  }
  return true;
}

}  // namespace

// ---------------------------------------------------------------------------
// Generic second-order mean by quadrature
// ---------------------------------------------------------------------------

Eigen::VectorXd mean_generic_oracle(const PairSystem& system,
                                    const QuadratureOptions& quad) {
  system.validate();
  const double sig = varsigma(system.field);
  Eigen::VectorXd out = Eigen::VectorXd::Zero(system.pairs.size());
  if (sig == 0.0) return out;
  const auto& metric = system.metric;

  for (std::size_t r = 0; r < system.pairs.size(); ++r) {
    double total = 0.0;
    for (int side = 0; side < 2; ++side) {
      const int self = side == 0 ? system.pairs[r].first : system.pairs[r].second;
      const int other = side == 0 ? system.pairs[r].second : system.pairs[r].first;
      const int self_slot = side == 0 ? 0 : 1;
      const auto& model = system.models[self];
      const int n = system.sample_counts[self];

      OmegaDomain dom = omega_domain(model, n, metric.mu_inf(), quad.initial_nodes);
      for (int retry = 0; retry < 5 && !nodes_clear_of(dom.contour, model.atom_values(), dom.zeros); ++retry)
        dom.contour = dom.contour.dilated(1.03);

      // tr[Pi_k f_other(R_other)] for every term.
      const int mbar = model.num_atoms();
      Eigen::MatrixXd coeff(mbar, metric.terms.size());
      for (std::size_t l = 0; l < metric.terms.size(); ++l) {
        const AnalyticFn& fo = term_fn(metric, 1 - self_slot, l);
        const Eigen::MatrixXd other_eig = model.to_eigenbasis(
            system.models[other].apply([&](double x) { return fo.real_at(x); }));
        for (int k = 0; k < mbar; ++k)
          coeff(k, l) = model.projector_trace(other_eig, k);
      }

      const auto integrand = [&](Complex w) {
        Complex acc{0.0, 0.0};
        const Complex zp = z_prime(model, n, w);
        for (std::size_t l = 0; l < metric.terms.size(); ++l) {
          Complex tr{0.0, 0.0};
          for (int k = 0; k < mbar; ++k) {
            const double g = model.atom_value(k);
            const Complex d = g - w;
            tr += g * g * coeff(k, l) / (d * d * d);
          }
          acc += term_fn(metric, self_slot, l).value(w) * tr;
        }
        return acc / (static_cast<double>(n) * zp);
      };

      double prev = 0.0;
      bool have_prev = false, converged = false;
      for (int q = dom.contour.nodes; q <= quad.max_nodes; q *= 2) {
        const double v = checked_real(
            contour_integral(dom.contour.with_nodes(q), integrand),
            "mean_generic_oracle");
        if (have_prev &&
            std::fabs(v - prev) <= quad.rel_tol * std::max(1.0, std::fabs(v))) {
          prev = v;
          converged = true;
          break;
        }
        prev = v;
        have_prev = true;
      }
      if (!converged)
        throw numerical_error("mean_generic_oracle: quadrature did not converge");
      total += prev;
    }
    out(r) = sig * total;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Closed-form variances
// ---------------------------------------------------------------------------

double var_euclidean_pair(const PopulationModel& m1, int n1,
                          const PopulationModel& m2, int n2, Field field) {
  const Eigen::MatrixXd& r1 = m1.covariance();
  const Eigen::MatrixXd& r2 = m2.covariance();
  const Eigen::MatrixXd delta = r1 - r2;
  const double t1 = r1.squaredNorm();  // tr[R1^2]
  const double t2 = r2.squaredNorm();
  const double d1 = (r1 * delta * r1 * delta).trace();
  const double d2 = (r2 * delta * r2 * delta).trace();
  const double cross = (r1 * r2).trace();
  const double value = 2.0 * (t1 / n1) * (t1 / n1) + 4.0 * d1 / n1 +
                       2.0 * (t2 / n2) * (t2 / n2) + 4.0 * d2 / n2 +
                       4.0 * cross * cross / (static_cast<double>(n1) * n2);
  return (1.0 + varsigma(field)) * value;
}

double var_kl_pair(const PopulationModel& m1, int n1, const PopulationModel& m2,
                   int n2, Field field) {
  const int m = m1.dim();
  if (n1 <= m || n2 <= m)
    throw unsupported_regime_error("var_kl_pair: requires N > M");
  const Eigen::MatrixXd& r1 = m1.covariance();
  const Eigen::MatrixXd inv1 = m1.apply([](double x) { return 1.0 / x; });
  const Eigen::MatrixXd inv2 = m2.apply([](double x) { return 1.0 / x; });
  const Eigen::MatrixXd r12 = r1 * inv2;          // R1 R2^{-1}
  const Eigen::MatrixXd r21 = inv1 * m2.covariance();  // R1^{-1} R2
  const double tr_12 = r12.trace();
  const double tr_21 = r21.trace();
  const double tr_1212 = (r12 * r12).trace();
  const double tr_2121 = (r21 * r21).trace();
  const double dn1 = n1, dn2 = n2, dm = m;
  double value = -dm / (2.0 * dn1 * dn2);
  value += tr_1212 / (4.0 * (dn2 - dm) * dn1);
  value += tr_2121 / (4.0 * (dn1 - dm) * dn2);
  value += (tr_12 / (dn2 - dm)) * (tr_12 / (dn2 - dm)) / (4.0 * dn1);
  value += (tr_21 / (dn1 - dm)) * (tr_21 / (dn1 - dm)) / (4.0 * dn2);
  return (1.0 + varsigma(field)) * (dn1 + dn2 - dm) * value;
}

namespace {

Eigen::MatrixXd closed_form_var(const PairSystem& system,
                                double (*pair_var)(const PopulationModel&, int,
                                                   const PopulationModel&, int,
                                                   Field)) {
  system.validate();
  const std::size_t r = system.pairs.size();
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = i + 1; j < r; ++j) {
      const auto& p = system.pairs[i];
      const auto& q = system.pairs[j];
      if (p.first == q.first || p.first == q.second || p.second == q.first ||
          p.second == q.second)
        throw domain_error(
            "closed-form variance: pairs share a set; use var_general");
    }
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(r, r);
  for (std::size_t i = 0; i < r; ++i) {
    const auto [a, b] = system.pairs[i];
    out(i, i) = pair_var(system.models[a], system.sample_counts[a],
                         system.models[b], system.sample_counts[b], system.field);
  }
  return out;
}

}  // namespace

Eigen::MatrixXd var_euclidean(const PairSystem& system) {
  return closed_form_var(system, var_euclidean_pair);
}

Eigen::MatrixXd var_kl(const PairSystem& system) {
  return closed_form_var(system, var_kl_pair);
}

// ---------------------------------------------------------------------------
// Single-integral variance machinery
// ---------------------------------------------------------------------------

namespace {

// Per-node spectral data shared by every function pair of one population.
struct NodeData {
  Complex omega;
  Complex weight;  // tangent / (i Q)
  Complex zp, zs;  // z'(omega), z''(omega)
  Eigen::VectorXcd phi;
  Eigen::VectorXcd zp_phi;
};

// Quadrature node too close to a pole; the driver reacts by dilating.
struct proximity_signal {};

struct MatPair {
  // Weighted forms: curly(k,r)  = gamma_k gamma_r / N * curly-I(k,r) and
  // curly_tilde(k,r) = (gamma_k gamma_r)^2 / N^2 * curly-I-tilde(k,r);
  // scale-free and exactly the weights the assembly needs.
  Eigen::MatrixXcd curly;
  Eigen::MatrixXcd curly_tilde;
};

class GroupEngine {
 public:
  GroupEngine(const PopulationModel& model, int n, const MetricSpec& metric,
              const QuadratureOptions& quad)
      : model_(model), n_(n), metric_(metric), quad_(quad) {
    dom_ = omega_domain(model, n, metric.mu_inf(), quad.initial_nodes);
    for (int retry = 0;; ++retry) {
      try {
        level(dom_.contour.nodes);
        return;
      } catch (const proximity_signal&) {
        if (retry >= 5)
          throw numerical_error(
              "var_general: could not keep quadrature nodes clear of poles");
        levels_.clear();
        dom_.contour = dom_.contour.dilated(1.03);
      }
    }
  }

  const PopulationModel& model() const { return model_; }
  int sample_count() const { return n_; }

  /// Converged matrices for f keyed (slot_a, l_a) at omega and g keyed
  /// (slot_b, l_b) at omega-tilde.
  const MatPair& matrices(int slot_a, int l_a, int slot_b, int l_b) {
    const auto key = std::make_tuple(slot_a, l_a, slot_b, l_b);
    auto hit = cache_.find(key);
    if (hit != cache_.end()) return hit->second;

    const AnalyticFn& f = term_fn(metric_, slot_a, l_a);
    const AnalyticFn& g = term_fn(metric_, slot_b, l_b);
    MatPair prev = assemble(f, g, level(dom_.contour.nodes));
    bool converged = false;
    for (int q = 2 * dom_.contour.nodes; q <= quad_.max_nodes; q *= 2) {
      MatPair next = assemble(f, g, level(q));
      const double scale =
          std::max({1.0, prev.curly.cwiseAbs().maxCoeff(),
                    prev.curly_tilde.cwiseAbs().maxCoeff()});
      const double delta =
          std::max((next.curly - prev.curly).cwiseAbs().maxCoeff(),
                   (next.curly_tilde - prev.curly_tilde).cwiseAbs().maxCoeff());
      prev = std::move(next);
      if (delta <= quad_.rel_tol * scale) {
        converged = true;
        break;
      }
    }
    if (!converged)
      throw numerical_error("var_general: quadrature did not converge");
    return cache_.emplace(key, std::move(prev)).first->second;
  }

 private:
  const std::vector<NodeData>& level(int q) {
    auto hit = levels_.find(q);
    if (hit != levels_.end()) return hit->second;
    std::vector<NodeData> nodes(q);
    const Contour c = dom_.contour.with_nodes(q);
    const bool base_level = levels_.empty();
    for (int i = 0; i < q; ++i) {
      NodeData& nd = nodes[i];
      nd.omega = c.point(i);
      nd.weight = c.tangent(i) / Complex(0.0, static_cast<double>(q));
      if (base_level) {
        for (int m = 0; m < model_.num_atoms(); ++m)
          if (std::abs(nd.omega - model_.atom_value(m)) < 1e-10)
            throw proximity_signal{};
        for (int m = 0; m < dom_.zeros.size(); ++m)
          if (std::abs(nd.omega - dom_.zeros(m)) < 1e-10)
            throw proximity_signal{};
      }
      nd.zp = z_prime(model_, n_, nd.omega);
      nd.zs = z_second(model_, n_, nd.omega);
      nd.phi = phi_roots(model_, n_, nd.omega);
      nd.zp_phi.resize(nd.phi.size());
      for (int m = 0; m < nd.phi.size(); ++m) {
        nd.zp_phi(m) = z_prime(model_, n_, nd.phi(m));
        if (base_level && std::abs(nd.zp_phi(m)) < 1e-10)
          throw proximity_signal{};
      }
    }
    return levels_.emplace(q, std::move(nodes)).first->second;
  }

  MatPair assemble(const AnalyticFn& f, const AnalyticFn& g,
                   const std::vector<NodeData>& nodes) {
    const int mbar = model_.num_atoms();
    const Eigen::VectorXd& gamma = model_.atom_values();
    MatPair out;
    out.curly = Eigen::MatrixXcd::Zero(mbar, mbar);
    out.curly_tilde = Eigen::MatrixXcd::Zero(mbar, mbar);

    Eigen::VectorXcd ta(mbar), ua(mbar), va(mbar), tb(mbar), ub(mbar), vb(mbar);
    Eigen::VectorXcd b(mbar), b2(mbar), dk(mbar);
    for (const NodeData& nd : nodes) {
      for (int m = 0; m < mbar; ++m) {
        const Complex diff = nd.omega - nd.phi(m);
        b(m) = g.value(nd.phi(m)) * diff / nd.zp_phi(m);
        b2(m) = b(m) * diff;
      }
      for (int a = 0; a < mbar; ++a) {
        Complex t{0, 0}, u{0, 0}, v{0, 0}, t2{0, 0}, u2{0, 0}, v2{0, 0};
        for (int m = 0; m < mbar; ++m) {
          const Complex d = gamma(a) - nd.phi(m);
          const Complex inv = 1.0 / d;
          const Complex inv2 = inv * inv;
          t += b(m) * inv;
          u += b(m) * inv2;
          v += b(m) * inv2 * inv;
          t2 += b2(m) * inv;
          u2 += b2(m) * inv2;
          v2 += b2(m) * inv2 * inv;
        }
        ta(a) = t;
        ua(a) = u;
        va(a) = v;
        tb(a) = t2;
        ub(a) = u2;
        vb(a) = v2;
      }
      const Complex fv = f.value(nd.omega);
      const Complex fd = f.deriv(nd.omega);
      const Complex two_over_zp = 2.0 / nd.zp;
      const Complex zs_over_zp2 = nd.zs / (nd.zp * nd.zp);
      for (int k = 0; k < mbar; ++k) dk(k) = 1.0 / (gamma(k) - nd.omega);

      for (int k = 0; k < mbar; ++k) {
        for (int r = 0; r < mbar; ++r) {
          Complex s_plain, s0, s1;
          if (k == r) {
            s_plain = ua(k);
            s0 = va(k);
            s1 = vb(k);
          } else {
            const double d = gamma(r) - gamma(k);
            s_plain = (ta(k) - ta(r)) / d;
            s0 = (ta(k) - ta(r)) / (d * d) - ua(r) / d;
            s1 = (tb(k) - tb(r)) / (d * d) - ub(r) / d;
          }
          // curly-I node value: f(w) / ((g_k - w)(g_r - w)) * sum_m ...
          out.curly(k, r) += nd.weight * fv * dk(k) * dk(r) * s_plain;

          // curly-I-tilde: p = f/((g_k - w)^2 (g_r - w)), p' its derivative.
          const Complex p = fv * dk(k) * dk(k) * dk(r);
          const Complex dp = fd * dk(k) * dk(k) * dk(r) +
                             fv * (2.0 * dk(k) * dk(k) * dk(k) * dk(r) +
                                   dk(k) * dk(k) * dk(r) * dk(r));
          out.curly_tilde(k, r) +=
              nd.weight *
              ((two_over_zp * p) * s0 + (dp / nd.zp - zs_over_zp2 * p) * s1);
        }
      }
    }

    // Closed residue contributions on the diagonal.
    for (int k = 0; k < mbar; ++k) {
      const double gk = gamma(k);
      const double prod = f.real_at(gk) * g.real_at(gk);
      const double ratio = static_cast<double>(n_) / model_.atom_multiplicity(k);
      out.curly(k, k) += -ratio * prod / (gk * gk);
      out.curly_tilde(k, k) += ratio * ratio * prod / (gk * gk * gk * gk);
    }

    // Fold in the assembly weights, which also normalizes the wild magnitude
    // spread the raw integrals carry across atom pairs.
    const Eigen::VectorXcd w1 = (gamma / std::sqrt(static_cast<double>(n_)))
                                    .cast<Complex>();
    const Eigen::VectorXcd w2 =
        (gamma.cwiseProduct(gamma) / static_cast<double>(n_)).cast<Complex>();
    out.curly = w1.asDiagonal() * out.curly * w1.asDiagonal();
    out.curly_tilde = w2.asDiagonal() * out.curly_tilde * w2.asDiagonal();
    return out;
  }

  const PopulationModel& model_;
  int n_;
  const MetricSpec& metric_;
  QuadratureOptions quad_;
  OmegaDomain dom_;
  std::map<int, std::vector<NodeData>> levels_;
  std::map<std::tuple<int, int, int, int>, MatPair> cache_;
};

// Assembles I_j(f_a, f_b; A, B) from the weighted matrices:
//   sum_{k,r} tr[Pi_k A Pi_r B] curly(k,r) + tr[Pi_k A] tr[Pi_r B] tilde(k,r).
Complex assemble_I(GroupEngine& eng, int slot_a, int l_a, int slot_b, int l_b,
                   const Eigen::MatrixXd& a_eig, const Eigen::MatrixXd& b_eig) {
  const MatPair& mats = eng.matrices(slot_a, l_a, slot_b, l_b);
  const PopulationModel& model = eng.model();
  const int mbar = model.num_atoms();
  Eigen::VectorXd tr_a(mbar), tr_b(mbar);
  for (int k = 0; k < mbar; ++k) {
    tr_a(k) = model.projector_trace(a_eig, k);
    tr_b(k) = model.projector_trace(b_eig, k);
  }
  Complex total{0.0, 0.0};
  for (int k = 0; k < mbar; ++k)
    for (int r = 0; r < mbar; ++r) {
      total += model.projector_pair_trace(a_eig, b_eig, k, r) * mats.curly(k, r);
      total += tr_a(k) * tr_b(r) * mats.curly_tilde(k, r);
    }
  return total;
}

// J term: the product of the two weighted curly-I matrices folded through
// the cross-projector traces.
Complex assemble_J(GroupEngine& eng_i, GroupEngine& eng_j,
                   const Eigen::MatrixXd& cross,  // tr[Pi_m^{(i)} Pi_k^{(j)}]
                   int slot_ai, int l_a, int slot_bi, int l_b, int slot_aj,
                   int slot_bj) {
  const MatPair& mi = eng_i.matrices(slot_ai, l_a, slot_bi, l_b);
  const MatPair& mj = eng_j.matrices(slot_aj, l_a, slot_bj, l_b);
  const Eigen::MatrixXcd folded =
      cross.cast<Complex>() * mj.curly * cross.transpose().cast<Complex>();
  return (mi.curly.array() * folded.array()).sum();
}

// Cross-projector trace matrix between two populations.
Eigen::MatrixXd cross_projector_traces(const PopulationModel& mi,
                                       const PopulationModel& mj) {
  const Eigen::MatrixXd sq =
      (mi.eigenvectors().transpose() * mj.eigenvectors()).cwiseAbs2();
  Eigen::MatrixXd out(mi.num_atoms(), mj.num_atoms());
  for (int m = 0; m < mi.num_atoms(); ++m) {
    const auto [mo, ms] = mi.atom_block(m);
    for (int k = 0; k < mj.num_atoms(); ++k) {
      const auto [ko, ks] = mj.atom_block(k);
      out(m, k) = sq.block(mo, ko, ms, ks).sum();
    }
  }
  return out;
}

}  // namespace

std::pair<std::complex<double>, std::complex<double>> cal_I(
    const PopulationModel& model, int N, const AnalyticFn& f,
    const AnalyticFn& g, int k, int r, const QuadratureOptions& quad) {
  if (k < 0 || r < 0 || k >= model.num_atoms() || r >= model.num_atoms())
    throw domain_error("cal_I: atom index out of range");
  MetricSpec probe;
  probe.terms = {{f, g}};
  GroupEngine eng(model, N, probe, quad);
  const MatPair& mats = eng.matrices(0, 0, 1, 0);
  const double gk = model.atom_value(k);
  const double gr = model.atom_value(r);
  const double n = N;
  return {mats.curly(k, r) * n / (gk * gr),
          mats.curly_tilde(k, r) * n * n / (gk * gk * gr * gr)};
}

Eigen::MatrixXd var_general(const PairSystem& system,
                            const QuadratureOptions& quad) {
  system.validate();
  const auto& metric = system.metric;
  const int nsets = static_cast<int>(system.models.size());
  const int npairs = static_cast<int>(system.pairs.size());
  const int nterms = static_cast<int>(metric.terms.size());

  // Group the sets by (population, sample count); engines are per group.
  std::vector<int> group_of(nsets, -1);
  std::vector<std::pair<int, int>> groups;  // representative set, N
  for (int j = 0; j < nsets; ++j) {
    for (std::size_t g = 0; g < groups.size(); ++g)
      if (system.sample_counts[j] == groups[g].second &&
          system.models[j].same_population(system.models[groups[g].first]))
        group_of[j] = static_cast<int>(g);
    if (group_of[j] < 0) {
      group_of[j] = static_cast<int>(groups.size());
      groups.emplace_back(j, system.sample_counts[j]);
    }
  }
  std::vector<std::unique_ptr<GroupEngine>> engines;
  for (auto [rep, n] : groups)
    engines.push_back(
        std::make_unique<GroupEngine>(system.models[rep], n, metric, quad));

  // f(R) matrices expressed in each group's eigenbasis:
  // key (target group, source group, slot, l).
  std::map<std::tuple<int, int, int, int>, Eigen::MatrixXd> fn_eig;
  const auto fn_in_basis = [&](int target, int source, int slot,
                               int l) -> const Eigen::MatrixXd& {
    const auto key = std::make_tuple(target, source, slot, l);
    auto hit = fn_eig.find(key);
    if (hit != fn_eig.end()) return hit->second;
    const AnalyticFn& fn = term_fn(metric, slot, l);
    const auto& target_model = system.models[groups[target].first];
    const auto& source_model = system.models[groups[source].first];
    Eigen::MatrixXd mat = target_model.to_eigenbasis(
        source_model.apply([&](double x) { return fn.real_at(x); }));
    return fn_eig.emplace(key, std::move(mat)).first->second;
  };

  std::map<std::pair<int, int>, Eigen::MatrixXd> cross_cache;
  const auto cross = [&](int gi, int gj) -> const Eigen::MatrixXd& {
    const auto key = std::make_pair(gi, gj);
    auto hit = cross_cache.find(key);
    if (hit != cross_cache.end()) return hit->second;
    Eigen::MatrixXd mat = cross_projector_traces(
        system.models[groups[gi].first], system.models[groups[gj].first]);
    return cross_cache.emplace(key, std::move(mat)).first->second;
  };

  const double prefactor = 1.0 + varsigma(system.field);
  Eigen::MatrixXd sigma(npairs, npairs);
  for (int r = 0; r < npairs; ++r) {
    const int sets_r[2] = {system.pairs[r].first, system.pairs[r].second};
    for (int s = 0; s < npairs; ++s) {
      const int sets_s[2] = {system.pairs[s].first, system.pairs[s].second};
      Complex entry{0.0, 0.0};
      for (int lr = 0; lr < nterms; ++lr) {
        for (int ls = 0; ls < nterms; ++ls) {
          // sigma-bar terms: one for every coincidence of a set of pair r
          // with a set of pair s.
          for (int ar = 0; ar < 2; ++ar) {
            for (int as = 0; as < 2; ++as) {
              if (sets_r[ar] != sets_s[as]) continue;
              const int shared = sets_r[ar];
              const int other_r = sets_r[1 - ar];
              const int other_s = sets_s[1 - as];
              GroupEngine& eng = *engines[group_of[shared]];
              const Eigen::MatrixXd& a_eig = fn_in_basis(
                  group_of[shared], group_of[other_r], 1 - ar, lr);
              const Eigen::MatrixXd& b_eig = fn_in_basis(
                  group_of[shared], group_of[other_s], 1 - as, ls);
              entry += assemble_I(eng, ar, lr, as, ls, a_eig, b_eig);
            }
          }
          // rho terms: both sets coincide, in either orientation.
          if (sets_r[0] == sets_s[0] && sets_r[1] == sets_s[1])
            entry += assemble_J(*engines[group_of[sets_r[0]]],
                                *engines[group_of[sets_r[1]]],
                                cross(group_of[sets_r[0]], group_of[sets_r[1]]),
                                0, lr, 0, ls, 1, 1);
          if (sets_r[0] == sets_s[1] && sets_r[1] == sets_s[0])
            entry += assemble_J(*engines[group_of[sets_r[0]]],
                                *engines[group_of[sets_r[1]]],
                                cross(group_of[sets_r[0]], group_of[sets_r[1]]),
                                0, lr, 1, ls, 1, 0);
        }
      }
      sigma(r, s) = prefactor * checked_real(entry, "var_general");
    }
  }

  const double scale = std::max(1.0, sigma.cwiseAbs().maxCoeff());
  if ((sigma - sigma.transpose()).cwiseAbs().maxCoeff() > 1e-8 * scale)
    throw internal_consistency_error("var_general: asymmetry above tolerance");
  sigma = 0.5 * (sigma + sigma.transpose()).eval();
  return sigma;
}

AsymptoticLaw asymptotic_law(const PairSystem& system,
                             const QuadratureOptions& quad) {
  system.validate();
  AsymptoticLaw law;
  law.dim = system.dim();
  law.distance.resize(system.pairs.size());
  for (std::size_t r = 0; r < system.pairs.size(); ++r)
    law.distance(r) =
        true_distance(system.models[system.pairs[r].first],
                      system.models[system.pairs[r].second], system.metric);

  switch (system.metric.id) {
    case MetricId::Euclidean:
      law.second_order_mean = mean_euclidean(system);
      break;
    case MetricId::SymKL:
      law.second_order_mean = mean_kl(system);
      break;
    case MetricId::LogEuclidean:
      law.second_order_mean = mean_le(system);
      break;
    case MetricId::Custom:
      law.second_order_mean = mean_generic_oracle(system, quad);
      break;
  }

  bool disjoint = true;
  for (std::size_t i = 0; i < system.pairs.size() && disjoint; ++i)
    for (std::size_t j = i + 1; j < system.pairs.size() && disjoint; ++j) {
      const auto& p = system.pairs[i];
      const auto& q = system.pairs[j];
      if (p.first == q.first || p.first == q.second || p.second == q.first ||
          p.second == q.second)
        disjoint = false;
    }

  if (disjoint && system.metric.id == MetricId::Euclidean)
    law.covariance = var_euclidean(system);
  else if (disjoint && system.metric.id == MetricId::SymKL)
    law.covariance = var_kl(system);
  else
    law.covariance = var_general(system, quad);

  // Positive semidefiniteness up to numerical tolerance.
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(law.covariance);
  const double scale = std::max(1.0, law.covariance.cwiseAbs().maxCoeff());
  if (eig.eigenvalues()(0) < -1e-8 * scale)
    throw internal_consistency_error(
        "asymptotic_law: covariance has a significantly negative eigenvalue");
  return law;
}

}  // namespace covdist
