#include "manibox/scalinglaw.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "manibox/error.hpp"

namespace manibox::scaling {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double sum_y2(std::span<const Point> pts) {
  double s = 0.0;
  for (const auto& p : pts) s += p.y * p.y;
  return s;
}

double max_abs_x(std::span<const Point> pts) {
  double m = 0.0;
  for (const auto& p : pts) m = std::max(m, std::abs(p.x));
  return m;
}

double max_abs_y(std::span<const Point> pts) {
  double m = 0.0;
  for (const auto& p : pts) m = std::max(m, std::abs(p.y));
  return m;
}

// Lower bounds for parameters the family requires to be positive; -inf elsewhere.
Eigen::VectorXd lower_bounds(Family f, std::span<const Point> pts) {
  const double xs = std::max(max_abs_x(pts), 1e-300);
  const double ys = std::max(max_abs_y(pts), 1e-300);
  switch (f) {
    case Family::MichaelisMenten: return Eigen::Vector2d(1e-9 * ys, 1e-8 * xs);
    case Family::PowerLaw: return Eigen::Vector2d(1e-9 * ys, -kInf);
    case Family::Gaussian: return Eigen::Vector3d(1e-9 * ys, -kInf, -kInf);
    case Family::ExpOffset: return Eigen::Vector3d(-kInf, -kInf, -kInf);
    case Family::LogFit: return Eigen::Vector3d(-kInf, 1e-9 / xs, -kInf);
  }
  return {};
}

Eigen::Index param_count(Family f) {
  return (f == Family::MichaelisMenten || f == Family::PowerLaw) ? 2 : 3;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// Ordinary least squares y = slope * x + intercept.
std::pair<double, double> linear_fit(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  const double slope = sxx > 0.0 ? sxy / sxx : 0.0;
  return {slope, my - slope * mx};
}

double r_squared(double sse_value, std::span<const Point> pts) {
  double mean = 0.0;
  for (const auto& p : pts) mean += p.y;
  mean /= static_cast<double>(pts.size());
  double sst = 0.0;
  for (const auto& p : pts) sst += (p.y - mean) * (p.y - mean);
  if (sst == 0.0) return sse_value == 0.0 ? 1.0 : 0.0;
  return 1.0 - sse_value / sst;
}

bool finite_sse(const CurveModel& m, std::span<const Point> pts, double& out) {
  try {
    out = sse(m, pts);
  } catch (const Error&) {
    return false;
  }
  return std::isfinite(out);
}

}  // namespace

std::string to_string(Family f) {
  switch (f) {
    case Family::MichaelisMenten: return "MichaelisMenten";
    case Family::PowerLaw: return "PowerLaw";
    case Family::Gaussian: return "Gaussian";
    case Family::ExpOffset: return "ExpOffset";
    case Family::LogFit: return "LogFit";
  }
  return "?";
}

Family family_from_string(const std::string& name) {
  for (Family f : {Family::MichaelisMenten, Family::PowerLaw, Family::Gaussian, Family::ExpOffset, Family::LogFit})
    if (to_string(f) == name) return f;
  if (name == "mm") return Family::MichaelisMenten;
  if (name == "power") return Family::PowerLaw;
  if (name == "gaussian") return Family::Gaussian;
  if (name == "exp") return Family::ExpOffset;
  if (name == "log") return Family::LogFit;
  throw Error(ErrorKind::InvalidArgument, "unknown curve family '" + name + "'");
}

std::vector<std::string> parameter_names(Family f) {
  switch (f) {
    case Family::MichaelisMenten: return {"Vmax", "Km"};
    case Family::PowerLaw: return {"a", "b"};
    case Family::Gaussian: return {"a", "b", "c"};
    case Family::ExpOffset: return {"a", "k", "c"};
    case Family::LogFit: return {"a", "b", "c"};
  }
  return {};
}

CurveModel CurveModel::michaelis_menten(double vmax, double km) {
  return {Family::MichaelisMenten, Eigen::Vector2d(vmax, km)};
}
CurveModel CurveModel::power_law(double a, double b) { return {Family::PowerLaw, Eigen::Vector2d(a, b)}; }
CurveModel CurveModel::gaussian(double a, double b, double c) { return {Family::Gaussian, Eigen::Vector3d(a, b, c)}; }
CurveModel CurveModel::exp_offset(double a, double k, double c) {
  return {Family::ExpOffset, Eigen::Vector3d(a, k, c)};
}
CurveModel CurveModel::log_fit(double a, double b, double c) { return {Family::LogFit, Eigen::Vector3d(a, b, c)}; }

bool CurveModel::valid() const {
  if (params.size() != param_count(family) || !params.allFinite()) return false;
  const auto& p = params;
  switch (family) {
    case Family::MichaelisMenten: return p(0) > 0.0 && p(1) > 0.0;
    case Family::PowerLaw: return p(0) > 0.0;
    case Family::Gaussian: return p(0) > 0.0 && p(2) != 0.0;
    case Family::ExpOffset: return p(0) != 0.0;
    case Family::LogFit: return p(1) > 0.0;
  }
  return false;
}

double eval_curve(const CurveModel& m, double x) {
  if (m.params.size() != param_count(m.family)) throw Error(ErrorKind::ShapeMismatch, "wrong parameter count");
  const auto& p = m.params;
  switch (m.family) {
    case Family::MichaelisMenten: return p(0) * (x / (p(1) + x));
    case Family::PowerLaw:
      if (!(x > 0.0)) throw Error(ErrorKind::DomainError, "power law needs x > 0");
      return p(0) * std::pow(x, p(1));
    case Family::Gaussian: {
      const double d = x - p(1);
      return p(0) * std::exp(-d * d / (2.0 * p(2) * p(2)));
    }
    case Family::ExpOffset: return p(0) * std::exp(p(1) * x) + p(2);
    case Family::LogFit:
      if (!(p(1) * x > 0.0)) throw Error(ErrorKind::DomainError, "log fit needs b * x > 0");
      return p(0) * std::log(p(1) * x) + p(2);
  }
  return 0.0;
}

Eigen::VectorXd curve_jacobian(const CurveModel& m, double x) {
  const auto& p = m.params;
  switch (m.family) {
    case Family::MichaelisMenten: {
      const double den = p(1) + x;
      return Eigen::Vector2d(x / den, -p(0) * x / (den * den));
    }
    case Family::PowerLaw: {
      if (!(x > 0.0)) throw Error(ErrorKind::DomainError, "power law needs x > 0");
      const double xb = std::pow(x, p(1));
      return Eigen::Vector2d(xb, p(0) * xb * std::log(x));
    }
    case Family::Gaussian: {
      const double d = x - p(1);
      const double c2 = p(2) * p(2);
      const double e = std::exp(-d * d / (2.0 * c2));
      return Eigen::Vector3d(e, p(0) * e * d / c2, p(0) * e * d * d / (c2 * p(2)));
    }
    case Family::ExpOffset: {
      const double e = std::exp(p(1) * x);
      return Eigen::Vector3d(e, p(0) * x * e, 1.0);
    }
    case Family::LogFit:
      if (!(p(1) * x > 0.0)) throw Error(ErrorKind::DomainError, "log fit needs b * x > 0");
      return Eigen::Vector3d(std::log(p(1) * x), p(0) / p(1), 1.0);
  }
  return {};
}

double sse(const CurveModel& m, std::span<const Point> pts) {
  double s = 0.0;
  for (const auto& p : pts) {
    const double r = p.y - eval_curve(m, p.x);
    s += r * r;
  }
  return s;
}

Eigen::VectorXd sse_gradient(const CurveModel& m, std::span<const Point> pts) {
  Eigen::VectorXd g = Eigen::VectorXd::Zero(m.params.size());
  for (const auto& p : pts) g -= 2.0 * (p.y - eval_curve(m, p.x)) * curve_jacobian(m, p.x);
  return g;
}

double optimality_measure(const CurveModel& m, std::span<const Point> pts) {
  const double energy = std::max(sum_y2(pts), std::numeric_limits<double>::min());
  const Eigen::VectorXd scale = m.params.cwiseAbs().cwiseMax(1.0);
  return sse_gradient(m, pts).cwiseProduct(scale).norm() / energy;
}

CurveModel default_init(Family family, std::span<const Point> pts) {
  if (pts.empty()) throw Error(ErrorKind::InvalidArgument, "no points");
  std::vector<double> xs, ys;
  for (const auto& p : pts) {
    xs.push_back(p.x);
    ys.push_back(p.y);
  }
  const auto [ymin_it, ymax_it] = std::minmax_element(ys.begin(), ys.end());
  const double ymin = *ymin_it, ymax = *ymax_it;
  const auto [xmin_it, xmax_it] = std::minmax_element(xs.begin(), xs.end());
  const double xrange = *xmax_it - *xmin_it;

  switch (family) {
    case Family::MichaelisMenten:
      return CurveModel::michaelis_menten(std::max(ymax, 1e-9), std::max(median(xs), 1e-9));
    case Family::PowerLaw: {
      std::vector<double> lx, ly;
      for (const auto& p : pts)
        if (p.x > 0.0 && p.y > 0.0) {
          lx.push_back(std::log(p.x));
          ly.push_back(std::log(p.y));
        }
      if (lx.size() < 2) return CurveModel::power_law(std::max(ymax, 1.0), 1.0);
      const auto [slope, intercept] = linear_fit(lx, ly);
      return CurveModel::power_law(std::exp(intercept), slope);
    }
    case Family::Gaussian: {
      const double peak_x = xs[static_cast<std::size_t>(ymax_it - ys.begin())];
      return CurveModel::gaussian(std::max(ymax, 1e-9), peak_x, xrange > 0.0 ? xrange / 4.0 : 1.0);
    }
    case Family::ExpOffset: {
      // y(0) is read at the smallest x; k takes the sign of the trend.
      const std::size_t lo = static_cast<std::size_t>(xmin_it - xs.begin());
      const std::size_t hi = static_cast<std::size_t>(xmax_it - xs.begin());
      const double amp = ys[lo] - ymin;
      return CurveModel::exp_offset(amp == 0.0 ? 1.0 : amp, ys[hi] >= ys[lo] ? 1.0 : -1.0, ymin);
    }
    case Family::LogFit: {
      std::vector<double> lx, yy;
      for (const auto& p : pts)
        if (p.x > 0.0) {
          lx.push_back(std::log(p.x));
          yy.push_back(p.y);
        }
      if (lx.size() < 2) return CurveModel::log_fit(1.0, 1.0, 0.0);
      const auto [slope, intercept] = linear_fit(lx, yy);
      return CurveModel::log_fit(slope == 0.0 ? 1.0 : slope, 1.0, intercept);
    }
  }
  return {};
}

FitResult lm_fit(const CurveModel& init, std::span<const Point> points, const LmOptions& opts) {
  const Eigen::Index m = param_count(init.family);
  if (static_cast<Eigen::Index>(points.size()) < m + 1)
    throw Error(ErrorKind::InvalidArgument, "need at least params + 1 points");
  if (!init.valid()) throw Error(ErrorKind::InvalidArgument, "initial parameters outside the family's valid region");

  const Eigen::VectorXd lb = lower_bounds(init.family, points);
  CurveModel cur = init;
  cur.params = cur.params.cwiseMax(lb);
  double cur_sse = 0.0;
  if (!finite_sse(cur, points, cur_sse)) throw Error(ErrorKind::DomainError, "initial model not evaluable on the data");

  const double energy = std::max(sum_y2(points), std::numeric_limits<double>::min());
  double lambda = 1e-3;
  int iter = 0;
  bool singular = false;

  Eigen::MatrixXd jac(points.size(), m);
  Eigen::VectorXd res(points.size());
  for (; iter < opts.max_iter; ++iter) {
    for (std::size_t i = 0; i < points.size(); ++i) {
      res(i) = points[i].y - eval_curve(cur, points[i].x);
      jac.row(i) = curve_jacobian(cur, points[i].x).transpose();
    }
    if (cur_sse == 0.0) break;
    const Eigen::MatrixXd jtj = jac.transpose() * jac;
    const Eigen::VectorXd jtr = jac.transpose() * res;
    if (optimality_measure(cur, points) < opts.tol * (1.0 + cur_sse / energy) * 1e-2) break;

    Eigen::VectorXd diag = jtj.diagonal();
    const double dmax = diag.maxCoeff();
    if (!(dmax > 0.0) || !std::isfinite(dmax)) {
      singular = true;
      break;
    }
    diag = diag.cwiseMax(1e-12 * dmax);

    bool accepted = false;
    bool stop = false;
    while (lambda < 1e16) {
      Eigen::MatrixXd damped = jtj;
      damped.diagonal() += lambda * diag;
      const Eigen::LDLT<Eigen::MatrixXd> ldlt(damped);
      const Eigen::VectorXd delta = ldlt.solve(jtr);
      if (ldlt.info() != Eigen::Success || !delta.allFinite()) {
        lambda *= 10.0;
        continue;
      }
      CurveModel trial = cur;
      trial.params = (cur.params + delta).cwiseMax(lb);
      double trial_sse = 0.0;
      if (trial.params == cur.params) {
        stop = true;
        break;
      }
      if (!trial.valid() || !finite_sse(trial, points, trial_sse) || !(trial_sse < cur_sse)) {
        lambda *= 10.0;
        continue;
      }
      const double rel = (cur_sse - trial_sse) / cur_sse;
      cur = trial;
      cur_sse = trial_sse;
      lambda = std::max(lambda / 10.0, 1e-15);
      accepted = true;
      if (rel < opts.tol) stop = true;
      break;
    }
    if (!accepted || stop) {
      ++iter;
      break;
    }
  }
  if (singular) throw Error(ErrorKind::SingularNormalMatrix, "Jacobian has no information at the current parameters");

  FitResult out;
  out.model = cur;
  out.sse = cur_sse;
  out.r2 = r_squared(cur_sse, points);
  out.iterations = iter;
  out.grad_norm = sse_gradient(cur, points).norm();
  out.scaled_grad_norm = optimality_measure(cur, points);

  bool at_bound = false;
  for (Eigen::Index j = 0; j < m; ++j)
    if (std::isfinite(lb(j)) && cur.params(j) <= lb(j) * (1.0 + 1e-6)) at_bound = true;

  const bool certified = out.scaled_grad_norm <= opts.grad_tol * (1.0 + cur_sse / energy);
  if (at_bound)
    out.status = FitStatus::AtBound;
  else if (certified)
    out.status = FitStatus::Converged;
  else
    out.status = FitStatus::NonConvergence;
  out.converged = out.status == FitStatus::Converged;
  return out;
}

FitResult lm_fit(Family family, std::span<const Point> points, const LmOptions& opts) {
  return lm_fit(default_init(family, points), points, opts);
}

double data_for_success(const CurveModel& mm, double target) {
  if (mm.family != Family::MichaelisMenten) throw Error(ErrorKind::InvalidArgument, "expected a Michaelis-Menten model");
  const double vmax = mm.params(0), km = mm.params(1);
  if (!(target > 0.0)) throw Error(ErrorKind::InvalidArgument, "target must be positive");
  if (!(vmax > target)) throw Error(ErrorKind::Unreachable, "saturation level does not exceed the target");
  return target * km / (vmax - target);
}

double vc_bound(const VcBoundQuery& q) {
  if (!(q.k > 0.0 && q.d > 0.0 && q.b > 0.0 && q.eps > 0.0))
    throw Error(ErrorKind::DomainError, "k, d, b and eps must be positive");
  const double arg = 3.0 * q.b * q.b * q.b * q.k * q.d / (4.0 * M_PI * q.eps * q.eps * q.eps);
  if (!(arg > 1.0)) throw Error(ErrorKind::DomainError, "log argument must exceed 1");
  return q.k * q.d * std::log(arg);
}

}  // namespace manibox::scaling
