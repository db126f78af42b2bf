#pragma once

#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace manibox::scaling {

enum class Family { MichaelisMenten, PowerLaw, Gaussian, ExpOffset, LogFit };

std::string to_string(Family f);
Family family_from_string(const std::string& name);
/// Parameter names in storage order, e.g. {"Vmax", "Km"}.
std::vector<std::string> parameter_names(Family f);

/// A curve family with its parameters in `parameter_names` order:
///   MichaelisMenten  Vmax * x / (Km + x)
///   PowerLaw         a * x^b
///   Gaussian         a * exp(-(x - b)^2 / (2 c^2))
///   ExpOffset        a * exp(k x) + c
///   LogFit           a * ln(b x) + c
struct CurveModel {
  Family family = Family::MichaelisMenten;
  Eigen::VectorXd params;

  static CurveModel michaelis_menten(double vmax, double km);
  static CurveModel power_law(double a, double b);
  static CurveModel gaussian(double a, double b, double c);
  static CurveModel exp_offset(double a, double k, double c);
  static CurveModel log_fit(double a, double b, double c);

  /// True when the parameters satisfy the family's constraints.
  bool valid() const;
};

/// Throws DomainError outside the family's domain (x <= 0 for PowerLaw and LogFit).
double eval_curve(const CurveModel& model, double x);

/// d model / d params at x.
Eigen::VectorXd curve_jacobian(const CurveModel& model, double x);

struct Point {
  double x = 0.0;
  double y = 0.0;
};

enum class FitStatus { Converged, NonConvergence, AtBound };

struct FitResult {
  CurveModel model;
  double sse = 0.0;
  double r2 = 0.0;
  int iterations = 0;
  bool converged = false;
  FitStatus status = FitStatus::NonConvergence;
  double grad_norm = 0.0;         // |grad SSE|
  double scaled_grad_norm = 0.0;  // see `optimality_measure`
};

struct LmOptions {
  double tol = 1e-10;
  int max_iter = 200;
  double grad_tol = 1e-8;
};

/// Levenberg-Marquardt on the sum of squared residuals with analytic
/// Jacobians and Marquardt (diagonal) scaling. Steps leaving the family's
/// valid region are rejected. Throws InvalidArgument for too few points and
/// SingularNormalMatrix when the damped system cannot be solved.
FitResult lm_fit(const CurveModel& init, std::span<const Point> points, const LmOptions& opts = {});

/// Fit from the documented deterministic starting point for the family.
FitResult lm_fit(Family family, std::span<const Point> points, const LmOptions& opts = {});

CurveModel default_init(Family family, std::span<const Point> points);

double sse(const CurveModel& model, std::span<const Point> points);
Eigen::VectorXd sse_gradient(const CurveModel& model, std::span<const Point> points);

/// Dimensionless stationarity measure: |p_j| dSSE/dp_j (with |p_j| floored
/// at 1) divided by sum(y^2). Certificate: <= grad_tol * (1 + SSE / sum(y^2)).
double optimality_measure(const CurveModel& model, std::span<const Point> points);

/// Smallest data volume reaching `target` on a Michaelis-Menten curve.
/// Throws Unreachable when Vmax <= target.
double data_for_success(const CurveModel& mm, double target = 80.0);

struct VcBoundQuery {
  double k = 1.0;    // shared classifiers
  double d = 1.0;    // VC dimension of the single-point hypothesis class
  double b = 1.0;    // cube side
  double eps = 1.0;  // coverage radius, same unit as b
};

/// k d ln(3 b^3 k d / (4 pi eps^3)). Throws DomainError when the log argument <= 1.
double vc_bound(const VcBoundQuery& q);

}  // namespace manibox::scaling
