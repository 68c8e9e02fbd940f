#pragma once

/**
 * L2-regularized logistic regression for per-user preference prediction.
 *
 * Fits P(win) = sigmoid(w·x + b) on z-scored features by damped Newton with
 * backtracking line search, so the loss is non-increasing by construction.
 * The penalty (strength l2) applies to the weights only, never the
 * intercept. Zero-variance features are dropped up front and reported with
 * coefficient 0. Deterministic: zero initialization, no randomness.
 *
 * Reported coefficients live on the z-scored scale (one unit = one sample
 * standard deviation of the raw feature).
 */

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "prefsim/error.hpp"
#include "prefsim/persona.hpp"
#include "prefsim/text_features.hpp"

namespace prefsim {

struct LogisticFit {
  std::vector<double> coef;  // length = raw feature count; dropped -> 0
  double intercept = 0.0;
  bool converged = false;
  std::size_t iterations = 0;
  std::vector<std::size_t> dropped;  // zero-variance feature indices
  std::vector<double> losses;        // objective after init and each step
};

namespace regress_detail {

// In-place lower Cholesky of a dense symmetric matrix; false if not PD.
inline bool cholesky(std::vector<double>& a, std::size_t n) {
  for (std::size_t j = 0; j < n; ++j) {
    double d = a[j * n + j];
    for (std::size_t k = 0; k < j; ++k) d -= a[j * n + k] * a[j * n + k];
    if (!(d > 0.0)) return false;
    double root = std::sqrt(d);
    a[j * n + j] = root;
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = a[i * n + j];
      for (std::size_t k = 0; k < j; ++k) s -= a[i * n + k] * a[j * n + k];
      a[i * n + j] = s / root;
    }
  }
  return true;
}

// Solves L L^T x = b given the Cholesky factor from above.
inline std::vector<double> cholesky_solve(const std::vector<double>& l,
                                          std::size_t n,
                                          std::vector<double> b) {
  for (std::size_t i = 0; i < n; ++i) {
    double s = b[i];
    for (std::size_t k = 0; k < i; ++k) s -= l[i * n + k] * b[k];
    b[i] = s / l[i * n + i];
  }
  for (std::size_t ii = n; ii-- > 0;) {
    double s = b[ii];
    for (std::size_t k = ii + 1; k < n; ++k) s -= l[k * n + ii] * b[k];
    b[ii] = s / l[ii * n + ii];
  }
  return b;
}

inline double softplus(double z) {
  return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

}  // namespace regress_detail

inline LogisticFit fit_logistic_l2(const std::vector<std::vector<double>>& rows,
                                   const std::vector<int>& labels,
                                   double l2 = 1.0, double tol = 1e-6,
                                   std::size_t max_iter = 2000) {
  using namespace regress_detail;
  const std::size_t n = rows.size();
  require(n >= 2, "fit_logistic_l2: need at least 2 samples, got ", n);
  require(labels.size() == n, "fit_logistic_l2: ", labels.size(),
          " labels for ", n, " samples");
  const std::size_t f_raw = rows[0].size();
  require(f_raw >= 1, "fit_logistic_l2: no features");
  for (const auto& r : rows)
    require(r.size() == f_raw, "fit_logistic_l2: ragged feature rows");
  for (int y : labels)
    require(y == 0 || y == 1, "fit_logistic_l2: labels must be 0/1");

  LogisticFit fit;

  // z-score; zero-variance columns are dropped
  std::vector<double> mean(f_raw, 0.0), sd(f_raw, 0.0);
  for (const auto& r : rows)
    for (std::size_t j = 0; j < f_raw; ++j) mean[j] += r[j];
  for (std::size_t j = 0; j < f_raw; ++j) mean[j] /= static_cast<double>(n);
  for (const auto& r : rows)
    for (std::size_t j = 0; j < f_raw; ++j)
      sd[j] += (r[j] - mean[j]) * (r[j] - mean[j]);
  std::vector<std::size_t> active;
  for (std::size_t j = 0; j < f_raw; ++j) {
    sd[j] = std::sqrt(sd[j] / static_cast<double>(n - 1));
    if (sd[j] > 0.0)
      active.push_back(j);
    else
      fit.dropped.push_back(j);
  }
  const std::size_t f = active.size();

  // design matrix on z-scored active features
  std::vector<double> x(n * f);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < f; ++j)
      x[i * f + j] = (rows[i][active[j]] - mean[active[j]]) / sd[active[j]];

  const std::size_t dim = f + 1;  // weights then intercept
  std::vector<double> theta(dim, 0.0);

  auto objective = [&](const std::vector<double>& th) {
    double j_total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double z = th[f];
      for (std::size_t j = 0; j < f; ++j) z += th[j] * x[i * f + j];
      j_total += softplus(z) - static_cast<double>(labels[i]) * z;
    }
    for (std::size_t j = 0; j < f; ++j) j_total += 0.5 * l2 * th[j] * th[j];
    return j_total;
  };

  double cur = objective(theta);
  fit.losses.push_back(cur);

  std::vector<double> grad(dim), hess(dim * dim), p(n);
  for (std::size_t iter = 0; iter < max_iter; ++iter) {
    // gradient and Hessian at theta
    std::fill(grad.begin(), grad.end(), 0.0);
    std::fill(hess.begin(), hess.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      double z = theta[f];
      for (std::size_t j = 0; j < f; ++j) z += theta[j] * x[i * f + j];
      double pi = 1.0 / (1.0 + std::exp(-z));
      p[i] = pi;
      double d = pi - static_cast<double>(labels[i]);
      for (std::size_t j = 0; j < f; ++j) grad[j] += d * x[i * f + j];
      grad[f] += d;
      double s = pi * (1.0 - pi);
      for (std::size_t a = 0; a < f; ++a) {
        double sa = s * x[i * f + a];
        for (std::size_t b = a; b < f; ++b)
          hess[a * dim + b] += sa * x[i * f + b];
        hess[a * dim + f] += sa;
      }
      hess[f * dim + f] += s;
    }
    for (std::size_t j = 0; j < f; ++j) {
      grad[j] += l2 * theta[j];
      hess[j * dim + j] += l2;
    }
    for (std::size_t a = 0; a < dim; ++a)
      for (std::size_t b = 0; b < a; ++b) hess[a * dim + b] = hess[b * dim + a];

    double gmax = 0.0;
    for (double g : grad) gmax = std::max(gmax, std::abs(g));
    if (gmax < tol) {
      fit.converged = true;
      break;
    }

    // damped Newton direction
    std::vector<double> dir;
    for (double tau = 0.0;; tau = tau == 0.0 ? 1e-8 : tau * 100.0) {
      std::vector<double> h = hess;
      if (tau > 0.0)
        for (std::size_t a = 0; a < dim; ++a) h[a * dim + a] += tau;
      if (cholesky(h, dim)) {
        dir = cholesky_solve(h, dim, grad);
        break;
      }
      require(tau < 1e12, "fit_logistic_l2: Hessian regularization failed");
    }

    // backtracking: accept only strictly non-increasing steps
    double descent = 0.0;
    for (std::size_t a = 0; a < dim; ++a) descent += grad[a] * dir[a];
    double step = 1.0;
    bool moved = false;
    while (step >= 1e-12) {
      std::vector<double> cand(dim);
      for (std::size_t a = 0; a < dim; ++a)
        cand[a] = theta[a] - step * dir[a];
      double val = objective(cand);
      if (val <= cur - 1e-4 * step * descent) {
        theta = std::move(cand);
        cur = val;
        moved = true;
        break;
      }
      step *= 0.5;
    }
    fit.iterations = iter + 1;
    fit.losses.push_back(cur);
    if (!moved) break;  // no descent possible at double precision
  }

  fit.coef.assign(f_raw, 0.0);
  for (std::size_t j = 0; j < f; ++j) fit.coef[active[j]] = theta[j];
  fit.intercept = theta[f];
  return fit;
}

struct WinnerLoser {
  std::string prompt_id;
  std::string winner_model;
  std::string loser_model;
};

struct RegressionResult {
  std::string persona_id;
  std::vector<std::string> feature_names;
  std::vector<double> coefficients;
  double intercept = 0.0;
  bool converged = false;
  std::size_t iterations = 0;
  std::vector<std::string> dropped_features;
};

// The persona's winner/loser per prompt, ready for feature lookup.
inline std::vector<WinnerLoser> winner_losers_for(
    const Persona& persona, const ScoredCorpus& corpus,
    const std::vector<std::string>& prompt_ids) {
  std::vector<WinnerLoser> out;
  out.reserve(prompt_ids.size());
  for (const auto& id : prompt_ids) {
    std::size_t pi = corpus.prompt_index(id);
    WinnerLoser wl;
    wl.prompt_id = id;
    wl.winner_model = corpus.response_models[pick_winner(persona, corpus, pi)];
    wl.loser_model = corpus.response_models[pick_loser(persona, corpus, pi)];
    out.push_back(std::move(wl));
  }
  return out;
}

// Winner rows get label 1, loser rows label 0, in pair order.
inline RegressionResult fit_user_regression(const Persona& persona,
                                            const std::vector<WinnerLoser>& pairs,
                                            const FeatureTable& features,
                                            double l2 = 1.0,
                                            double tol = 1e-6,
                                            std::size_t max_iter = 2000) {
  require(!pairs.empty(), "fit_user_regression: no winner/loser pairs for \"",
          persona.persona_id, "\"");
  std::vector<std::vector<double>> rows;
  std::vector<int> labels;
  rows.reserve(pairs.size() * 2);
  for (const auto& wl : pairs) {
    rows.push_back(features.at(wl.prompt_id, wl.winner_model));
    labels.push_back(1);
    rows.push_back(features.at(wl.prompt_id, wl.loser_model));
    labels.push_back(0);
  }
  auto fit = fit_logistic_l2(rows, labels, l2, tol, max_iter);

  RegressionResult res;
  res.persona_id = persona.persona_id;
  res.feature_names = features.names;
  res.coefficients = std::move(fit.coef);
  res.intercept = fit.intercept;
  res.converged = fit.converged;
  res.iterations = fit.iterations;
  for (std::size_t j : fit.dropped)
    res.dropped_features.push_back(features.names[j]);
  return res;
}

}  // namespace prefsim
