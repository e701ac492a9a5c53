#include "pertl/perturbation.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace pertl {

double CosineForcing::operator()(double t) const {
  return amplitude * std::cos(frequency * t);
}

void PolynomialNonlinearODE::validate() const {
  if (g.size() < 2) {
    throw std::invalid_argument("operator needs at least g_0 and g_1 (m >= 1)");
  }
  if (g.back() == 0.0) {
    throw std::invalid_argument("leading operator coefficient g_m must be nonzero");
  }
  if (q < 2) {
    throw std::invalid_argument("nonlinearity degree q must be >= 2");
  }
  if (static_cast<int>(bc_derivatives.size()) != order() - 1) {
    throw std::invalid_argument("expected m-1 derivative boundary values");
  }
}

std::vector<double> PolynomialNonlinearODE::boundary_vector() const {
  std::vector<double> u{bc_value};
  u.insert(u.end(), bc_derivatives.begin(), bc_derivatives.end());
  return u;
}

namespace {

void enumerate_rec(int pos, int p, int remaining, int weight_left,
                   std::vector<int>& current,
                   std::vector<std::vector<int>>& out) {
  if (pos == p) {
    // Last slot takes whatever count is left.
    if (static_cast<long>(remaining) * pos == weight_left) {
      current[pos] = remaining;
      out.push_back(current);
      current[pos] = 0;
    }
    return;
  }
  for (int k = 0; k <= remaining; ++k) {
    const int used = k * pos;
    if (used > weight_left) break;
    current[pos] = k;
    enumerate_rec(pos + 1, p, remaining - k, weight_left - used, current, out);
  }
  current[pos] = 0;
}

double integer_power(double x, int k) {
  double r = 1.0;
  for (int i = 0; i < k; ++i) r *= x;
  return r;
}

}  // namespace

std::vector<std::vector<int>> enumerate_multi_indices(int q, int p, int j) {
  if (q < 2 || p < 0 || j < 1 || j > p) {
    throw std::invalid_argument("enumerate_multi_indices: need q >= 2 and 1 <= j <= p");
  }
  std::vector<std::vector<int>> out;
  std::vector<int> current(p + 1, 0);
  enumerate_rec(0, p, q, j - 1, current, out);
  return out;
}

long long multinomial_coefficient(int q, std::span<const int> exponents) {
  if (q < 0 || q > 20) {
    throw std::invalid_argument("multinomial coefficient limited to q <= 20");
  }
  // Build q!/prod k_i! as a product of binomials to stay within 64 bits.
  long long result = 1;
  int placed = 0;
  for (int k : exponents) {
    if (k < 0) throw std::invalid_argument("negative exponent");
    for (int i = 1; i <= k; ++i) {
      ++placed;
      result = result * placed / i;
    }
  }
  if (placed != q) throw std::invalid_argument("exponents do not sum to q");
  return result;
}

CascadeSpec build_cascade(const PolynomialNonlinearODE& ode, int p) {
  if (p < 0) throw std::invalid_argument("truncation order p must be >= 0");
  if (ode.q < 2 || ode.q > 20) {
    throw std::invalid_argument("nonlinearity degree q must be in [2, 20]");
  }

  double eps_sum = 0.0;
  double eps_pow = 1.0;
  for (int i = 0; i <= p; ++i) {
    eps_sum += eps_pow;
    eps_pow *= ode.epsilon;
  }
  if (eps_sum == 0.0 || !std::isfinite(eps_sum)) {
    throw std::invalid_argument("sum of eps^i vanishes or overflows; boundary split undefined");
  }

  CascadeSpec spec;
  spec.p = p;
  spec.q = ode.q;
  spec.epsilon = ode.epsilon;
  spec.bc_scale = 1.0 / eps_sum;
  spec.terms.resize(p + 1);
  for (int j = 1; j <= p; ++j) {
    for (auto& k : enumerate_multi_indices(ode.q, p, j)) {
      const auto c = multinomial_coefficient(ode.q, k);
      spec.terms[j].push_back({-static_cast<double>(c), std::move(k)});
    }
  }
  if (std::abs(ode.epsilon) >= 1.0) {
    std::ostringstream os;
    os << "|epsilon| = " << std::abs(ode.epsilon)
       << " >= 1: truncated perturbation series is not expected to converge";
    spec.warnings.push_back(os.str());
  }
  return spec;
}

std::vector<double> evaluate_forcing_values(
    const CascadeSpec& spec, int j, std::span<const std::vector<double>> solved) {
  if (j < 1 || j > spec.p) {
    throw std::invalid_argument("forcing order out of range");
  }
  if (static_cast<int>(solved.size()) < j) {
    throw std::invalid_argument("forcing f_" + std::to_string(j) +
                                " requires orders 0.." + std::to_string(j - 1));
  }
  const std::size_t n = solved[0].size();
  for (int i = 1; i < j; ++i) {
    if (solved[i].size() != n) throw std::invalid_argument("solved orders have mismatched lengths");
  }

  std::vector<double> out(n, 0.0);
  for (std::size_t t = 0; t < n; ++t) {
    double acc = 0.0;
    for (const auto& term : spec.terms[j]) {
      double prod = term.coefficient;
      // exponents at index >= j are zero by construction
      for (int i = 0; i < j; ++i) {
        if (term.exponents[i] != 0) prod *= integer_power(solved[i][t], term.exponents[i]);
      }
      acc += prod;
    }
    out[t] = acc;
  }
  return out;
}

std::vector<double> evaluate_forcing(const CascadeSpec& spec, int j,
                                     std::span<const OrderEvaluator> solved,
                                     std::span<const double> t_batch) {
  if (static_cast<int>(solved.size()) < j) {
    throw std::invalid_argument("forcing f_" + std::to_string(j) + " requires " +
                                std::to_string(j) + " solved orders");
  }
  std::vector<std::vector<double>> values(j);
  for (int i = 0; i < j; ++i) {
    if (!solved[i]) {
      throw std::invalid_argument("order " + std::to_string(i) + " has not been solved");
    }
    values[i].reserve(t_batch.size());
    for (double t : t_batch) values[i].push_back(solved[i](t));
  }
  return evaluate_forcing_values(spec, j, values);
}

std::vector<std::vector<double>> split_boundary(const PolynomialNonlinearODE& ode,
                                                const CascadeSpec& spec) {
  auto u = ode.boundary_vector();
  for (double& v : u) v *= spec.bc_scale;
  return std::vector<std::vector<double>>(spec.p + 1, u);
}

std::vector<double> compose_values(std::span<const std::vector<double>> solutions,
                                   double epsilon, int p) {
  if (static_cast<int>(solutions.size()) != p + 1) {
    throw std::invalid_argument("compose_solution expects exactly p+1 orders");
  }
  const std::size_t n = solutions[0].size();
  std::vector<double> out(n, 0.0);
  double w = 1.0;
  for (int i = 0; i <= p; ++i) {
    if (solutions[i].size() != n) throw std::invalid_argument("orders have mismatched lengths");
    for (std::size_t t = 0; t < n; ++t) out[t] += w * solutions[i][t];
    w *= epsilon;
  }
  return out;
}

std::vector<double> compose_solution(std::span<const OrderEvaluator> solutions,
                                     double epsilon, int p,
                                     std::span<const double> t_batch) {
  if (static_cast<int>(solutions.size()) != p + 1) {
    throw std::invalid_argument("compose_solution expects exactly p+1 orders");
  }
  std::vector<std::vector<double>> values(p + 1);
  for (int i = 0; i <= p; ++i) {
    if (!solutions[i]) throw std::invalid_argument("missing order evaluator");
    for (double t : t_batch) values[i].push_back(solutions[i](t));
  }
  return compose_values(values, epsilon, p);
}

std::string cascade_to_text(const CascadeSpec& spec) {
  nlohmann::ordered_json j;
  j["format"] = "pertl-cascade/1";
  j["q"] = spec.q;
  j["p"] = spec.p;
  j["epsilon"] = spec.epsilon;
  j["bc_scale"] = spec.bc_scale;
  auto orders = nlohmann::ordered_json::array();
  for (int o = 1; o <= spec.p; ++o) {
    auto terms = nlohmann::ordered_json::array();
    for (const auto& t : spec.terms[o]) {
      terms.push_back({{"coefficient", t.coefficient}, {"exponents", t.exponents}});
    }
    orders.push_back({{"order", o}, {"terms", terms}});
  }
  j["orders"] = orders;
  j["warnings"] = spec.warnings;
  return j.dump(2) + "\n";
}

CascadeSpec cascade_from_text(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  if (j.at("format").get<std::string>() != "pertl-cascade/1") {
    throw std::invalid_argument("not a pertl-cascade/1 document");
  }
  CascadeSpec spec;
  spec.q = j.at("q").get<int>();
  spec.p = j.at("p").get<int>();
  spec.epsilon = j.at("epsilon").get<double>();
  spec.bc_scale = j.at("bc_scale").get<double>();
  spec.terms.resize(spec.p + 1);
  for (const auto& o : j.at("orders")) {
    const int order = o.at("order").get<int>();
    if (order < 1 || order > spec.p) throw std::invalid_argument("cascade order out of range");
    for (const auto& t : o.at("terms")) {
      spec.terms[order].push_back(
          {t.at("coefficient").get<double>(), t.at("exponents").get<std::vector<int>>()});
    }
  }
  if (j.contains("warnings")) spec.warnings = j["warnings"].get<std::vector<std::string>>();
  return spec;
}

}  // namespace pertl
