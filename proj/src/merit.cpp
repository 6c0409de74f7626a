#include "madspip/merit.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace madspip {

Partition::Partition(std::size_t m) : interior_flag_(m, false) { rebuild(); }

Partition::Partition(std::size_t m, std::vector<std::size_t> interior)
    : interior_flag_(m, false) {
  for (std::size_t l : interior) {
    if (l >= m) throw std::out_of_range("partition index out of range");
    interior_flag_[l] = true;
  }
  rebuild();
}

bool Partition::move_to_interior(std::size_t l) {
  if (interior_flag_.at(l)) return false;
  interior_flag_[l] = true;
  rebuild();
  return true;
}

void Partition::rebuild() {
  interior_.clear();
  exterior_.clear();
  for (std::size_t l = 0; l < interior_flag_.size(); ++l) {
    (interior_flag_[l] ? interior_ : exterior_).push_back(l);
  }
}

double phi_prox(std::span<const double> g_int_values) {
  double value = -kInf;
  for (double g : g_int_values) {
    if (std::isnan(g)) return kInf;
    value = std::max(value, g);
  }
  return value;
}

double c_int(std::span<const double> g_int_values) {
  const double phi = phi_prox(g_int_values);
  if (phi > 0.0) return phi;
  double product = 1.0;
  for (double g : g_int_values) product *= std::min(MeritParams::log_threshold, -g);
  return -product;
}

double c_ext(std::span<const double> g_ext_values,
             std::span<const double> h_values) {
  double total = 0.0;
  for (double g : g_ext_values) {
    if (!std::isfinite(g)) return kInf;
    const double v = std::max(0.0, g);
    total += v * v;
  }
  for (double h : h_values) {
    if (!std::isfinite(h)) return kInf;
    total += h * h;
  }
  return total;
}

double merit(double f, double cint, double cext, const MeritParams& params) {
  if (!(params.rho > 0.0)) throw std::invalid_argument("rho must be positive");
  if (!(cint < 0.0) || !std::isfinite(f) || !std::isfinite(cext)) return kInf;
  return f - params.b_int * params.rho * std::log(-cint) +
         (params.b_ext / params.rho) * cext;
}

double compute_b_ext(double f0) {
  if (!std::isfinite(f0)) {
    throw std::invalid_argument("b_ext needs a finite objective at x0");
  }
  if (f0 == 0.0) return 1.0;
  const double exponent = std::floor(std::log10(std::abs(f0)));
  return std::max(1.0, std::pow(10.0, exponent));
}

bool penalty_update_check(double delta_next, double phi_prox_value,
                          const MeritParams& params, bool has_interior) {
  double bound = params.b_rho * std::pow(params.rho, params.beta);
  if (has_interior) {
    bound = std::min(bound, params.b_c * phi_prox_value * phi_prox_value);
  }
  return delta_next <= bound;
}

ViolationSummary summarize(double f, const Eigen::VectorXd& g,
                           const Eigen::VectorXd& h, bool failed,
                           const Partition& partition,
                           const MeritParams& params) {
  std::vector<double> g_int;
  std::vector<double> g_ext;
  g_int.reserve(partition.interior().size());
  g_ext.reserve(partition.exterior().size());
  for (std::size_t l : partition.interior()) g_int.push_back(g(Eigen::Index(l)));
  for (std::size_t l : partition.exterior()) g_ext.push_back(g(Eigen::Index(l)));

  ViolationSummary s;
  s.phi_prox = phi_prox(g_int);
  s.c_int = c_int(g_int);
  s.c_ext = c_ext(g_ext, std::span<const double>(h.data(), std::size_t(h.size())));
  s.merit = failed ? kInf : merit(f, s.c_int, s.c_ext, params);
  return s;
}

}  // namespace madspip
