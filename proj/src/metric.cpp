#include "covdist/metric.hpp"

namespace covdist {

MetricSpec euclidean_metric() {
  MetricSpec m;
  m.id = MetricId::Euclidean;
  m.name = "eu";
  m.terms = {{fns::square(), fns::constant(1.0)},
             {fns::identity(-2.0), fns::identity()},
             {fns::constant(1.0), fns::square()}};
  m.oversampled_only = false;
  return m;
}

MetricSpec sym_kl_metric() {
  MetricSpec m;
  m.id = MetricId::SymKL;
  m.name = "kl";
  m.terms = {{fns::inverse(0.5), fns::identity()},
             {fns::identity(0.5), fns::inverse()},
             {fns::constant(-1.0), fns::constant(1.0)}};
  m.oversampled_only = true;
  return m;
}

MetricSpec log_euclidean_metric() {
  MetricSpec m;
  m.id = MetricId::LogEuclidean;
  m.name = "le";
  m.terms = {{fns::log_squared(), fns::constant(1.0)},
             {fns::log(-2.0), fns::log()},
             {fns::constant(1.0), fns::log_squared()}};
  m.oversampled_only = true;
  return m;
}

MetricSpec metric_by_name(const std::string& name) {
  if (name == "eu" || name == "euclidean") return euclidean_metric();
  if (name == "kl" || name == "jeffreys") return sym_kl_metric();
  if (name == "le" || name == "log-euclidean") return log_euclidean_metric();
  throw config_error("unknown metric '" + name + "' (expected eu|kl|le)");
}

}  // namespace covdist
