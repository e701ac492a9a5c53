#pragma once

// Perturbation cascade for Dx + eps * x^q = f(t).
//
// Substituting x = sum_{i=0..p} eps^i x_i and matching powers of eps turns the
// nonlinear equation into p+1 linear equations D x_j = f_j, where f_0 = f and
// f_j (j >= 1) is a signed multinomial polynomial in x_0..x_{j-1}:
//
//   f_j = - sum_{k : sum k_i = q, sum i*k_i = j-1} q!/(k_0! ... k_p!) prod x_i^k_i

#include <functional>
#include <span>
#include <string>
#include <vector>

namespace pertl {

/// f(t) = amplitude * cos(frequency * t).
struct CosineForcing {
  double amplitude = 0.0;
  double frequency = 0.0;

  double operator()(double t) const;
};

/// Dx + eps x^q = f with D = sum_j g_j d^j/dt^j and initial values
/// x(0) = bc_value, x^(j)(0) = bc_derivatives[j-1] for j = 1..m-1.
struct PolynomialNonlinearODE {
  std::vector<double> g;
  int q = 2;
  double epsilon = 0.0;
  CosineForcing forcing;
  double bc_value = 0.0;
  std::vector<double> bc_derivatives;

  /// Operator order m (g has m+1 entries).
  int order() const { return static_cast<int>(g.size()) - 1; }

  /// Throws std::invalid_argument when the instance is malformed.
  void validate() const;

  /// [x*, x^(1)*, ..., x^(m-1)*]
  std::vector<double> boundary_vector() const;
};

struct ForcingTerm {
  double coefficient = 0.0;  // sign already folded in
  std::vector<int> exponents;  // k_0..k_p

  bool operator==(const ForcingTerm&) const = default;
};

struct CascadeSpec {
  int p = 0;
  int q = 2;
  double epsilon = 0.0;
  // terms[0] is empty (order 0 is forced by f itself); terms[j] for j = 1..p.
  std::vector<std::vector<ForcingTerm>> terms;
  double bc_scale = 1.0;
  std::vector<std::string> warnings;

  bool operator==(const CascadeSpec&) const = default;
};

/// All (k_0..k_p) >= 0 with sum k_i = q and sum i*k_i = j-1, lexicographic.
std::vector<std::vector<int>> enumerate_multi_indices(int q, int p, int j);

/// Exact q! / prod k_i!; requires q <= 20.
long long multinomial_coefficient(int q, std::span<const int> exponents);

CascadeSpec build_cascade(const PolynomialNonlinearODE& ode, int p);

/// One solved order, evaluated at a time point. An empty function marks an
/// order that has not been solved.
using OrderEvaluator = std::function<double(double)>;

/// f_j(t) over a time batch; requires evaluators for orders 0..j-1.
std::vector<double> evaluate_forcing(const CascadeSpec& spec, int j,
                                     std::span<const OrderEvaluator> solved,
                                     std::span<const double> t_batch);

/// Same as evaluate_forcing, with solved[i] holding x_i already sampled on
/// the batch. Every solved[i] must have the same length.
std::vector<double> evaluate_forcing_values(
    const CascadeSpec& spec, int j,
    std::span<const std::vector<double>> solved);

/// Per-order boundary vectors (p+1 identical copies of the scaled vector).
std::vector<std::vector<double>> split_boundary(const PolynomialNonlinearODE& ode,
                                                const CascadeSpec& spec);

/// sum_{i=0..p} eps^i x_i(t).
std::vector<double> compose_solution(std::span<const OrderEvaluator> solutions,
                                     double epsilon, int p,
                                     std::span<const double> t_batch);

std::vector<double> compose_values(std::span<const std::vector<double>> solutions,
                                   double epsilon, int p);

/// JSON text form of a cascade (see docs/file_formats.md).
std::string cascade_to_text(const CascadeSpec& spec);
CascadeSpec cascade_from_text(const std::string& text);

}  // namespace pertl
