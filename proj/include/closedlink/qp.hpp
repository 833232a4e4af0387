#pragma once

#include <limits>
#include <vector>

#include "closedlink/common.hpp"
#include "closedlink/errors.hpp"

namespace closedlink {

/// Weighted least-squares objective term w * ||A x - b||^2.
struct LeastSquaresTerm {
  MatX a;
  VecX b;
  double weight = 1.0;
};

/// minimize sum_k w_k ||A_k x - b_k||^2
/// subject to C x = d, lower <= G x <= upper (either bound may be infinite).
class QuadraticProgram {
 public:
  explicit QuadraticProgram(int variables);

  int variables() const { return n_; }
  void add_term(const MatX& a, const VecX& b, double weight = 1.0);
  /// Adds weight * ||x_[offset, offset+size)||^2.
  void add_regularization(int offset, int size, double weight);
  void add_equality(const MatX& c, const VecX& d);
  void add_inequality(const MatX& g, const VecX& upper,
                      const VecX& lower = VecX());  // empty lower means -inf

  const std::vector<LeastSquaresTerm>& terms() const { return terms_; }
  const MatX& equality_matrix() const { return eq_matrix_; }
  const VecX& equality_vector() const { return eq_vector_; }
  const MatX& inequality_matrix() const { return ineq_matrix_; }
  const VecX& inequality_upper() const { return ineq_upper_; }
  const VecX& inequality_lower() const { return ineq_lower_; }

  /// Hessian 2 sum w A^T A and linear term -2 sum w A^T b.
  MatX hessian() const;
  VecX linear_term() const;
  double objective(const VecX& x) const;
  VecX gradient(const VecX& x) const;

 private:
  int n_;
  std::vector<LeastSquaresTerm> terms_;
  MatX eq_matrix_;
  VecX eq_vector_;
  MatX ineq_matrix_;
  VecX ineq_upper_;
  VecX ineq_lower_;
};

/// One side of one inequality row.
struct ActiveBound {
  int row = 0;
  bool lower = false;
  bool operator==(const ActiveBound&) const = default;
};

struct KktResiduals {
  double stationarity = 0.0;
  double primal = 0.0;
  double dual = 0.0;  // largest negative multiplier magnitude
  double complementarity = 0.0;
  double max() const;
};

struct QpSolution {
  VecX x;
  VecX equality_multipliers;
  /// Multipliers of G x <= upper and of G x >= lower, both non-negative.
  VecX upper_multipliers;
  VecX lower_multipliers;
  std::vector<ActiveBound> active_set;
  KktResiduals residuals;
  int iterations = 0;
  /// Objective value of every accepted primal iterate.
  std::vector<double> objective_history;
};

struct QpOptions {
  int max_iterations = 500;
  double tolerance = 1e-9;
};

/// The inequality (or equality) system admits no point.
class Infeasible : public Error {
 public:
  Infeasible(const std::string& message, std::vector<ActiveBound> violated, double certificate_residual);
  /// Constraints combined by the infeasibility certificate.
  const std::vector<ActiveBound>& violated() const { return violated_; }
  /// Normalized residual of the Farkas combination (near zero for a valid certificate).
  double certificate_residual() const { return certificate_residual_; }

 private:
  std::vector<ActiveBound> violated_;
  double certificate_residual_;
};

/// Primal active-set solver on the equality-eliminated problem.
QpSolution solve(const QuadraticProgram& qp, const QpOptions& options = {});

/// KKT residuals evaluated from the problem data alone.
KktResiduals check_kkt(const QuadraticProgram& qp, const VecX& x, const VecX& equality_multipliers,
                       const VecX& upper_multipliers, const VecX& lower_multipliers);

}  // namespace closedlink
