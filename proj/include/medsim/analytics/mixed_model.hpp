#pragma once

// Linear mixed-effects model with crossed random intercepts for learner and
// case, fitted by REML (or ML).
//
// The residual variance is profiled out analytically, leaving the optimizer
// to work on the log of each random-effect variance relative to the residual
// variance. For a relative covariance factor Lambda = diag(sqrt(theta)) the
// penalized least-squares system
//
//   [ Lambda Z'Z Lambda + I   Lambda Z'X ] [u]   [ Lambda Z'y ]
//   [ X'Z Lambda              X'X        ] [b] = [ X'y        ]
//
// is solved by block Cholesky; its factors give the profiled deviance
//
//   REML: 2 log|L| + 2 log|R_X| + (n - p) (1 + log(2 pi r^2 / (n - p)))
//   ML:   2 log|L| +              n       (1 + log(2 pi r^2 / n))
//
// where r^2 is the penalized residual sum of squares.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "medsim/analytics/special_functions.hpp"
#include "medsim/core/error.hpp"

namespace medsim::analytics {

enum class RandomEffects { learner, case_id, both };

inline RandomEffects parse_random_effects(const std::string& s) {
  if (s == "learner") return RandomEffects::learner;
  if (s == "case") return RandomEffects::case_id;
  if (s == "both" || s == "learner,case" || s == "case,learner") return RandomEffects::both;
  throw Error("invalid_argument", "random effects must be learner, case or both");
}

struct LmmData {
  Eigen::VectorXd y;
  Eigen::MatrixXd X;                    // fixed-effect design, intercept included
  std::vector<std::string> fixed_names; // one per column of X
  std::vector<std::size_t> learner;     // dense learner index per observation
  std::vector<std::size_t> case_index;  // dense case index per observation
};

struct LmmOptions {
  RandomEffects random = RandomEffects::both;
  bool reml = true;
  double tolerance = 1e-8;
  int max_iterations = 500;
  double log_ratio_lower = -30.0;
  double log_ratio_upper = 15.0;
};

struct FixedEffect {
  std::string name;
  double estimate = 0.0;
  double std_error = 0.0;
  double z = 0.0;
  double p_value = 1.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
};

struct VarianceComponents {
  double learner = 0.0;
  double case_id = 0.0;
  double residual = 0.0;
};

struct LmmFit {
  std::vector<FixedEffect> fixed_effects;
  VarianceComponents variance_components;
  double log_likelihood = 0.0;  // restricted log-likelihood when REML
  bool converged = false;
  bool reml = true;
  std::size_t n_obs = 0, n_learners = 0, n_cases = 0;
  int iterations = 0;
  int evaluations = 0;
  double gradient_norm = 0.0;              // finite differences, log-ratio scale
  std::vector<double> log_ratios;          // optimum on the optimizer scale
  std::vector<double> objective_trace;     // best log-likelihood after each accepted step
  std::string diagnostics;

  const FixedEffect& effect(const std::string& name) const {
    for (const auto& fe : fixed_effects)
      if (fe.name == name) return fe;
    throw Error("unknown_effect", "no fixed effect named '" + name + "'");
  }
};

namespace detail {

inline constexpr double kZ975 = 1.959963984540054;

// Cross-products are formed once; every objective evaluation is then
// O(q^3) in the number of random-effect levels and independent of n.
class ProfiledDeviance {
 public:
  ProfiledDeviance(const LmmData& data, const LmmOptions& opts) : opts_(opts) {
    n_ = static_cast<std::size_t>(data.y.size());
    p_ = static_cast<std::size_t>(data.X.cols());
    const bool use_learner = opts.random != RandomEffects::case_id;
    const bool use_case = opts.random != RandomEffects::learner;
    n_learners_ = data.learner.empty()
                      ? 0
                      : *std::max_element(data.learner.begin(), data.learner.end()) + 1;
    n_cases_ = data.case_index.empty()
                   ? 0
                   : *std::max_element(data.case_index.begin(), data.case_index.end()) + 1;
    std::vector<std::size_t> offsets;
    std::size_t q = 0;
    if (use_learner) {
      blocks_.push_back({0, n_learners_});
      q += n_learners_;
    }
    if (use_case) {
      blocks_.push_back({q, n_cases_});
      q += n_cases_;
    }
    q_ = q;
    ZtZ_ = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(q), static_cast<Eigen::Index>(q));
    ZtX_ = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(q), static_cast<Eigen::Index>(p_));
    Zty_ = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(q));
    for (std::size_t i = 0; i < n_; ++i) {
      std::vector<Eigen::Index> cols;
      if (use_learner) cols.push_back(static_cast<Eigen::Index>(data.learner[i]));
      if (use_case)
        cols.push_back(static_cast<Eigen::Index>(blocks_.back().offset + data.case_index[i]));
      const auto row = static_cast<Eigen::Index>(i);
      for (auto c : cols) {
        for (auto c2 : cols) ZtZ_(c, c2) += 1.0;
        ZtX_.row(c) += data.X.row(row);
        Zty_(c) += data.y(row);
      }
    }
    XtX_ = data.X.transpose() * data.X;
    Xty_ = data.X.transpose() * data.y;
    yty_ = data.y.squaredNorm();
  }

  std::size_t dimension() const { return blocks_.size(); }
  std::size_t n_learners() const { return n_learners_; }
  std::size_t n_cases() const { return n_cases_; }

  struct Solution {
    double deviance = std::numeric_limits<double>::infinity();
    double sigma2 = 0.0;
    Eigen::VectorXd beta;
    Eigen::MatrixXd beta_cov;
    bool ok = false;
  };

  Solution solve(const std::vector<double>& log_ratios, bool want_beta) const {
    Solution s;
    Eigen::VectorXd lambda(static_cast<Eigen::Index>(q_));
    for (std::size_t b = 0; b < blocks_.size(); ++b) {
      const double scale = std::exp(0.5 * log_ratios[b]);
      for (std::size_t j = 0; j < blocks_[b].size; ++j)
        lambda(static_cast<Eigen::Index>(blocks_[b].offset + j)) = scale;
    }
    Eigen::MatrixXd A = lambda.asDiagonal() * ZtZ_ * lambda.asDiagonal();
    A.diagonal().array() += 1.0;
    Eigen::LLT<Eigen::MatrixXd> chol_a(A);
    if (chol_a.info() != Eigen::Success) return s;
    const auto& La = chol_a.matrixL();
    Eigen::VectorXd cu = La.solve(lambda.cwiseProduct(Zty_));
    Eigen::MatrixXd rzx = La.solve(lambda.asDiagonal() * ZtX_);
    Eigen::MatrixXd schur = XtX_ - rzx.transpose() * rzx;
    Eigen::LLT<Eigen::MatrixXd> chol_x(schur);
    if (chol_x.info() != Eigen::Success) return s;
    const auto& Lx = chol_x.matrixL();
    Eigen::VectorXd cb = Lx.solve(Xty_ - rzx.transpose() * cu);
    double r2 = yty_ - cu.squaredNorm() - cb.squaredNorm();
    r2 = std::max(r2, std::numeric_limits<double>::min());
    double logdet_a = 0.0, logdet_x = 0.0;
    for (Eigen::Index i = 0; i < A.rows(); ++i) logdet_a += std::log(chol_a.matrixLLT()(i, i));
    for (Eigen::Index i = 0; i < schur.rows(); ++i)
      logdet_x += std::log(chol_x.matrixLLT()(i, i));
    const double n = static_cast<double>(n_), p = static_cast<double>(p_);
    const double two_pi = 2.0 * 3.14159265358979323846;
    if (opts_.reml) {
      s.deviance = 2.0 * logdet_a + 2.0 * logdet_x + (n - p) * (1.0 + std::log(two_pi * r2 / (n - p)));
      s.sigma2 = r2 / (n - p);
    } else {
      s.deviance = 2.0 * logdet_a + n * (1.0 + std::log(two_pi * r2 / n));
      s.sigma2 = r2 / n;
    }
    if (want_beta) {
      s.beta = Lx.transpose().solve(cb);
      Eigen::MatrixXd identity = Eigen::MatrixXd::Identity(schur.rows(), schur.cols());
      s.beta_cov = s.sigma2 * chol_x.solve(identity);
    }
    s.ok = std::isfinite(s.deviance);
    return s;
  }

  double deviance(const std::vector<double>& log_ratios) const {
    return solve(log_ratios, false).deviance;
  }

 private:
  struct Block {
    std::size_t offset, size;
  };
  LmmOptions opts_;
  std::size_t n_ = 0, p_ = 0, q_ = 0, n_learners_ = 0, n_cases_ = 0;
  std::vector<Block> blocks_;
  Eigen::MatrixXd ZtZ_, ZtX_, XtX_;
  Eigen::VectorXd Zty_, Xty_;
  double yty_ = 0.0;
};

// Box-constrained minimizer: Nelder-Mead to locate the basin, then cyclic
// one-dimensional Brent refinement per coordinate. Only improving points are
// accepted, so the recorded trace is monotone.
class BoundedMinimizer {
 public:
  using Objective = std::function<double(const std::vector<double>&)>;

  BoundedMinimizer(Objective f, double lower, double upper, double tol, int max_iter)
      : f_(std::move(f)), lower_(lower), upper_(upper), tol_(tol), max_iter_(max_iter) {}

  struct Result {
    std::vector<double> x;
    double value = 0.0;
    int iterations = 0;
    int evaluations = 0;
    bool converged = false;
    std::vector<double> trace;  // best value after each accepted step
  };

  Result minimize(std::vector<double> x0) {
    Result r;
    for (auto& v : x0) v = clamp(v);
    best_x_ = x0;
    best_ = eval(x0);
    r.trace.push_back(best_);
    const bool nm_ok = nelder_mead(x0.size(), r);
    const bool polish_ok = coordinate_polish(r);
    newton_refine(r);
    r.x = best_x_;
    r.value = best_;
    r.evaluations = evaluations_;
    r.iterations = iterations_;
    r.converged = (nm_ok || polish_ok) && iterations_ < max_iter_;
    return r;
  }

 private:
  double clamp(double v) const { return std::clamp(v, lower_, upper_); }

  double eval(const std::vector<double>& x) {
    ++evaluations_;
    const double v = f_(x);
    return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
  }

  void accept(const std::vector<double>& x, double v, Result& r) {
    if (v < best_) {
      best_ = v;
      best_x_ = x;
      r.trace.push_back(best_);
    }
  }

  bool nelder_mead(std::size_t dim, Result& r) {
    std::vector<std::vector<double>> simplex(dim + 1, best_x_);
    std::vector<double> values(dim + 1, best_);
    for (std::size_t i = 0; i < dim; ++i) {
      auto& pt = simplex[i + 1];
      pt[i] = pt[i] + 1.0 <= upper_ ? pt[i] + 1.0 : pt[i] - 1.0;
      values[i + 1] = eval(pt);
      accept(pt, values[i + 1], r);
    }
    while (iterations_ < max_iter_) {
      ++iterations_;
      std::vector<std::size_t> order(dim + 1);
      std::iota(order.begin(), order.end(), 0);
      std::sort(order.begin(), order.end(), [&](auto a, auto b) { return values[a] < values[b]; });
      const auto lo = order.front(), hi = order.back(), second = order[dim - 1 + (dim == 0)];
      double size = 0.0;
      for (std::size_t i = 0; i <= dim; ++i)
        for (std::size_t k = 0; k < dim; ++k)
          size = std::max(size, std::fabs(simplex[i][k] - simplex[lo][k]));
      if (std::fabs(values[hi] - values[lo]) <= tol_ * (std::fabs(values[lo]) + tol_) &&
          size <= std::sqrt(tol_))
        return true;

      std::vector<double> centroid(dim, 0.0);
      for (std::size_t i = 0; i <= dim; ++i)
        if (i != hi)
          for (std::size_t k = 0; k < dim; ++k) centroid[k] += simplex[i][k] / static_cast<double>(dim);
      auto along = [&](double t) {
        std::vector<double> p(dim);
        for (std::size_t k = 0; k < dim; ++k) p[k] = clamp(centroid[k] + t * (simplex[hi][k] - centroid[k]));
        return p;
      };
      auto reflected = along(-1.0);
      const double fr = eval(reflected);
      if (fr < values[lo]) {
        auto expanded = along(-2.0);
        const double fe = eval(expanded);
        if (fe < fr) {
          simplex[hi] = expanded;
          values[hi] = fe;
        } else {
          simplex[hi] = reflected;
          values[hi] = fr;
        }
      } else if (fr < values[second]) {
        simplex[hi] = reflected;
        values[hi] = fr;
      } else {
        const bool outside = fr < values[hi];
        auto contracted = along(outside ? -0.5 : 0.5);
        const double fc = eval(contracted);
        if (fc < std::min(fr, values[hi])) {
          simplex[hi] = contracted;
          values[hi] = fc;
        } else {
          for (std::size_t i = 0; i <= dim; ++i) {
            if (i == lo) continue;
            for (std::size_t k = 0; k < dim; ++k)
              simplex[i][k] = clamp(simplex[lo][k] + 0.5 * (simplex[i][k] - simplex[lo][k]));
            values[i] = eval(simplex[i]);
            accept(simplex[i], values[i], r);
          }
        }
      }
      for (std::size_t i = 0; i <= dim; ++i) accept(simplex[i], values[i], r);
    }
    return false;
  }

  // Brent's method on one coordinate within [a, b].
  double brent_line(std::vector<double>& x, std::size_t k, double a, double b, double fx_start) {
    const double golden = 0.3819660112501051;
    double v = x[k], w = v, xk = v;
    double fv = fx_start, fw = fx_start, fxk = fx_start;
    double d = 0.0, e = 0.0;
    auto f_at = [&](double t) {
      auto p = x;
      p[k] = t;
      return eval(p);
    };
    for (int it = 0; it < 200; ++it) {
      const double m = 0.5 * (a + b);
      const double tol1 = 1e-10 * std::fabs(xk) + 1e-12;
      const double tol2 = 2.0 * tol1;
      if (std::fabs(xk - m) <= tol2 - 0.5 * (b - a)) break;
      bool golden_step = true;
      if (std::fabs(e) > tol1) {
        double r = (xk - w) * (fxk - fv);
        double q = (xk - v) * (fxk - fw);
        double p = (xk - v) * q - (xk - w) * r;
        q = 2.0 * (q - r);
        if (q > 0.0) p = -p;
        q = std::fabs(q);
        const double e_old = e;
        e = d;
        if (std::fabs(p) < std::fabs(0.5 * q * e_old) && p > q * (a - xk) && p < q * (b - xk)) {
          d = p / q;
          const double u = xk + d;
          if (u - a < tol2 || b - u < tol2) d = xk < m ? tol1 : -tol1;
          golden_step = false;
        }
      }
      if (golden_step) {
        e = (xk >= m ? a : b) - xk;
        d = golden * e;
      }
      const double u = std::fabs(d) >= tol1 ? xk + d : xk + (d > 0 ? tol1 : -tol1);
      const double fu = f_at(u);
      if (fu <= fxk) {
        (u >= xk ? a : b) = xk;
        v = w; fv = fw;
        w = xk; fw = fxk;
        xk = u; fxk = fu;
      } else {
        (u < xk ? a : b) = u;
        if (fu <= fw || w == xk) {
          v = w; fv = fw;
          w = u; fw = fu;
        } else if (fu <= fv || v == xk || v == w) {
          v = u; fv = fu;
        }
      }
    }
    x[k] = xk;
    return fxk;
  }

  bool coordinate_polish(Result& r) {
    for (int cycle = 0; cycle < 50 && iterations_ < max_iter_; ++cycle) {
      ++iterations_;
      const double before = best_;
      for (std::size_t k = 0; k < best_x_.size(); ++k) {
        auto x = best_x_;
        const double a = std::max(lower_, x[k] - 2.0), b = std::min(upper_, x[k] + 2.0);
        const double v = brent_line(x, k, a, b, best_);
        accept(x, v, r);
      }
      if (before - best_ <= tol_ * (std::fabs(best_) + tol_)) return true;
    }
    return false;
  }

  // Value-based search locates the optimum only to about sqrt(machine eps).
  // The gradient crosses zero linearly, so Newton steps on central-difference
  // derivatives sharpen interior coordinates well beyond that. A step is kept
  // when it shrinks the gradient without raising the objective beyond roundoff.
  void newton_refine(Result& r) {
    const double h = 1e-4;
    const double boundary = lower_ + 16.0;
    std::vector<std::size_t> free;
    for (std::size_t k = 0; k < best_x_.size(); ++k)
      if (best_x_[k] > boundary && best_x_[k] < upper_ - 1.0) free.push_back(k);
    if (free.empty()) return;
    auto gradient = [&](const std::vector<double>& x) {
      Eigen::VectorXd g(static_cast<Eigen::Index>(free.size()));
      for (std::size_t i = 0; i < free.size(); ++i) {
        auto up = x, dn = x;
        up[free[i]] += h;
        dn[free[i]] -= h;
        g(static_cast<Eigen::Index>(i)) = (eval(up) - eval(dn)) / (2.0 * h);
      }
      return g;
    };
    Eigen::VectorXd g = gradient(best_x_);
    for (int step = 0; step < 20 && iterations_ < max_iter_; ++step) {
      ++iterations_;
      const auto m = static_cast<Eigen::Index>(free.size());
      Eigen::MatrixXd H(m, m);
      for (Eigen::Index j = 0; j < m; ++j) {
        auto up = best_x_, dn = best_x_;
        up[free[static_cast<std::size_t>(j)]] += h;
        dn[free[static_cast<std::size_t>(j)]] -= h;
        H.col(j) = (gradient(up) - gradient(dn)) / (2.0 * h);
      }
      H = 0.5 * (H + H.transpose());
      Eigen::LLT<Eigen::MatrixXd> llt(H);
      if (llt.info() != Eigen::Success) return;
      const Eigen::VectorXd delta = llt.solve(-g);
      auto x = best_x_;
      for (Eigen::Index j = 0; j < m; ++j) {
        auto& v = x[free[static_cast<std::size_t>(j)]];
        v = clamp(v + delta(j));
      }
      const double v = eval(x);
      const Eigen::VectorXd g_new = gradient(x);
      const double slack = 1e-10 * (1.0 + std::fabs(best_));
      if (!(v <= best_ + slack) || g_new.norm() >= g.norm()) return;
      best_ = std::min(best_, v);
      best_x_ = x;
      r.trace.push_back(v);
      g = g_new;
      if (delta.cwiseAbs().maxCoeff() < 1e-12) return;
    }
  }

  Objective f_;
  double lower_, upper_, tol_;
  int max_iter_;
  int iterations_ = 0;
  int evaluations_ = 0;
  std::vector<double> best_x_;
  double best_ = std::numeric_limits<double>::infinity();
};

}  // namespace detail

inline LmmFit fit_lmm(const LmmData& data, const LmmOptions& opts = {}) {
  const auto n = static_cast<std::size_t>(data.y.size());
  const auto p = static_cast<std::size_t>(data.X.cols());
  if (static_cast<std::size_t>(data.X.rows()) != n || data.fixed_names.size() != p)
    throw Error("invalid_input", "design matrix, outcome and names disagree in size");
  if (n <= p) throw Error("insufficient_data", "need more observations than fixed effects");
  const bool use_learner = opts.random != RandomEffects::case_id;
  const bool use_case = opts.random != RandomEffects::learner;
  if (use_learner && data.learner.size() != n)
    throw Error("invalid_input", "learner index missing for some observations");
  if (use_case && data.case_index.size() != n)
    throw Error("invalid_input", "case index missing for some observations");
  for (Eigen::Index i = 0; i < data.y.size(); ++i)
    if (!std::isfinite(data.y(i)) || !data.X.row(i).allFinite())
      throw Error("invalid_input", "non-finite value in outcome or design");

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(data.X);
  if (static_cast<std::size_t>(qr.rank()) < p)
    throw Error("singular_design", "fixed-effect design matrix is rank deficient");

  detail::ProfiledDeviance objective(data, opts);
  if (use_learner && objective.n_learners() < 2)
    throw Error("insufficient_data", "need at least two learners");
  if (use_case && objective.n_cases() < 2)
    throw Error("insufficient_data", "need at least two cases");

  const std::size_t dim = objective.dimension();
  detail::BoundedMinimizer minimizer(
      [&](const std::vector<double>& x) { return objective.deviance(x); }, opts.log_ratio_lower,
      opts.log_ratio_upper, opts.tolerance, opts.max_iterations);
  auto result = minimizer.minimize(std::vector<double>(dim, 0.0));

  LmmFit fit;
  fit.reml = opts.reml;
  fit.n_obs = n;
  fit.n_learners = objective.n_learners();
  fit.n_cases = objective.n_cases();
  fit.iterations = result.iterations;
  fit.evaluations = result.evaluations;
  fit.log_ratios = result.x;
  for (double dev : result.trace) fit.objective_trace.push_back(-0.5 * dev);

  auto sol = objective.solve(result.x, true);
  if (!sol.ok) throw Error("singular_design", "mixed-model system is not positive definite");
  fit.log_likelihood = -0.5 * sol.deviance;
  fit.variance_components.residual = sol.sigma2;
  std::size_t b = 0;
  if (use_learner) fit.variance_components.learner = std::exp(result.x[b++]) * sol.sigma2;
  if (use_case) fit.variance_components.case_id = std::exp(result.x[b++]) * sol.sigma2;

  for (std::size_t j = 0; j < p; ++j) {
    FixedEffect fe;
    fe.name = data.fixed_names[j];
    fe.estimate = sol.beta(static_cast<Eigen::Index>(j));
    fe.std_error = std::sqrt(sol.beta_cov(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(j)));
    fe.z = fe.estimate / fe.std_error;
    fe.p_value = std::clamp(special::normal_two_sided(fe.z), 0.0, 1.0);
    fe.ci_low = fe.estimate - detail::kZ975 * fe.std_error;
    fe.ci_high = fe.estimate + detail::kZ975 * fe.std_error;
    fit.fixed_effects.push_back(fe);
  }

  // Central differences of the log-likelihood; one-sided at an active bound.
  double g2 = 0.0;
  const double h = 1e-5;
  for (std::size_t k = 0; k < dim; ++k) {
    auto up = result.x, dn = result.x;
    up[k] = std::min(up[k] + h, opts.log_ratio_upper);
    dn[k] = std::max(dn[k] - h, opts.log_ratio_lower);
    const double g = -0.5 * (objective.deviance(up) - objective.deviance(dn)) / (up[k] - dn[k]);
    g2 += g * g;
  }
  fit.gradient_norm = std::sqrt(g2);
  fit.converged = result.converged;

  std::ostringstream diag;
  diag << "iterations=" << result.iterations << " evaluations=" << result.evaluations
       << " gradient_norm=" << fit.gradient_norm;
  for (std::size_t k = 0; k < dim; ++k) {
    const bool at_lower = result.x[k] < std::log(1e-6);
    if (at_lower) diag << " boundary:" << (k == 0 && use_learner ? "learner" : "case");
  }
  if (!fit.converged) diag << " status=max_iterations_reached";
  fit.diagnostics = diag.str();
  return fit;
}

}  // namespace medsim::analytics
