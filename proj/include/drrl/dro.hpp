/*
 * Copyright 2026 The DrRL Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Distributionally robust inner maximisation over negative-item
// distributions: divergences, the Cressie-Read generator and its Fenchel
// conjugate, a brute-force primal solver, and the margin (beta) dual.
//
// The primal solver and the dual solver share no code path: the primal works
// on Q directly (stationarity in Q with two multipliers, plus projected
// ascent and grid candidates), the dual minimises the closed form over beta.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "drrl/common.hpp"
#include "drrl/losses.hpp"

namespace drrl {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

struct Divergence {
  enum class Kind { kKl, kWorstRegret, kCressieRead };
  Kind kind = Kind::kKl;
  double gamma = 2.0;  // Cressie-Read order, > 1

  static Divergence kl() { return {Kind::kKl, 0.0}; }
  static Divergence worst_regret() { return {Kind::kWorstRegret, 0.0}; }
  static Divergence cressie_read(double gamma) {
    if (!(gamma > 1.0)) throw Error("Cressie-Read order must be > 1");
    return {Kind::kCressieRead, gamma};
  }

  std::string name() const {
    switch (kind) {
      case Kind::kKl: return "kl";
      case Kind::kWorstRegret: return "worst_regret";
      case Kind::kCressieRead: return "cressie_read";
    }
    return "kl";
  }
};

/// phi_gamma(t) = (t^gamma - gamma t + gamma - 1) / (gamma (gamma - 1)).
inline double phi_gamma(double t, double gamma) {
  if (t < 0.0) throw Error("phi_gamma: t must be >= 0");
  if (!(gamma > 1.0)) throw Error("phi_gamma: gamma must be > 1");
  return (std::pow(t, gamma) - gamma * t + gamma - 1.0) / (gamma * (gamma - 1.0));
}

/// Fenchel conjugate of phi_gamma over t >= 0:
///   phi*(x) = ((gamma - 1) x + 1)_+^gamma_star / gamma - 1 / gamma.
inline double phi_conjugate(double x, double gamma) {
  if (!(gamma > 1.0)) throw Error("phi_conjugate: gamma must be > 1");
  const double p = gamma / (gamma - 1.0);
  return std::pow(positive_part((gamma - 1.0) * x + 1.0), p) / gamma - 1.0 / gamma;
}

/// c_gamma(eta) = (1 + gamma (gamma - 1) eta)^(1/gamma).
inline double c_gamma(double eta, double gamma) {
  if (eta < 0.0) throw Error("c_gamma: eta must be >= 0");
  if (!(gamma > 1.0)) throw Error("c_gamma: gamma must be > 1");
  return std::pow(1.0 + gamma * (gamma - 1.0) * eta, 1.0 / gamma);
}

/// D(Q || P). Mass of Q where P vanishes gives +inf.
inline double divergence(std::span<const double> q, std::span<const double> p,
                         const Divergence& div) {
  if (q.size() != p.size()) throw Error("divergence: size mismatch");
  double d = div.kind == Divergence::Kind::kWorstRegret ? -kInf : 0.0;
  for (std::size_t j = 0; j < q.size(); ++j) {
    if (p[j] <= 0.0) {
      if (q[j] > 0.0) return kInf;
      continue;
    }
    switch (div.kind) {
      case Divergence::Kind::kKl:
        if (q[j] > 0.0) d += q[j] * std::log(q[j] / p[j]);
        break;
      case Divergence::Kind::kWorstRegret:
        if (q[j] > 0.0) d = std::max(d, std::log(q[j] / p[j]));
        break;
      case Divergence::Kind::kCressieRead:
        d += p[j] * phi_gamma(std::max(0.0, q[j] / p[j]), div.gamma);
        break;
    }
  }
  return d;
}

/// Negative-side DRO problem: maximise E_Q[f] over the ball D(Q || P) <= eta
/// around the uniform distribution P.
struct DroInstance {
  Vec scores;
  double eta = 0.0;

  std::size_t size() const { return scores.size(); }
  Vec base() const { return Vec(scores.size(), 1.0 / static_cast<double>(scores.size())); }
};

struct InnerMaxOptions {
  int restarts = 16;
  int ascent_iterations = 100;
  int grid_resolution = 24;   // used when n <= grid_max_n
  std::size_t grid_max_n = 5;
  std::size_t max_n = 12;
  std::uint64_t seed = 0x5eed;
};

struct InnerMaxResult {
  double value = 0.0;
  Vec q;
  double achieved_divergence = 0.0;
  double stationary_value = 0.0;  // from the multiplier solve
  double candidate_value = -kInf; // best of ascent restarts and grid
  bool converged = true;
};

namespace detail {

/// Euclidean projection onto the probability simplex.
inline Vec project_to_simplex(std::span<const double> y) {
  Vec u(y.begin(), y.end());
  std::sort(u.begin(), u.end(), std::greater<>());
  double cumulative = 0.0, theta = 0.0;
  for (std::size_t k = 0; k < u.size(); ++k) {
    cumulative += u[k];
    const double t = (cumulative - 1.0) / static_cast<double>(k + 1);
    if (u[k] - t > 0.0) theta = t;
  }
  Vec q(y.size());
  for (std::size_t j = 0; j < y.size(); ++j) q[j] = positive_part(y[j] - theta);
  return q;
}

/// Moves y towards P until it lies inside the divergence ball.
inline Vec retract_into_ball(std::span<const double> y, std::span<const double> p,
                             const Divergence& div, double eta) {
  Vec q(y.begin(), y.end());
  if (divergence(q, p, div) <= eta) return q;
  double lo = 0.0, hi = 1.0;
  for (int it = 0; it < 50; ++it) {
    const double t = 0.5 * (lo + hi);
    for (std::size_t j = 0; j < q.size(); ++j) q[j] = p[j] + t * (y[j] - p[j]);
    (divergence(q, p, div) <= eta ? lo : hi) = t;
  }
  for (std::size_t j = 0; j < q.size(); ++j) q[j] = p[j] + lo * (y[j] - p[j]);
  return q;
}

/// Q maximising E_Q[f] - lambda D(Q||P) over the simplex: Q_j = P_j L_j with
/// L_j = (phi')^{-1}((f_j - rho) / lambda), rho fixed by normalisation.
inline Vec stationary_distribution(std::span<const double> f, std::span<const double> p,
                                   const Divergence& div, double lambda) {
  const std::size_t n = f.size();
  Vec q(n);
  if (div.kind == Divergence::Kind::kKl) {
    double mx = -kInf;
    for (std::size_t j = 0; j < n; ++j) mx = std::max(mx, std::log(p[j]) + f[j] / lambda);
    double z = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      q[j] = std::exp(std::log(p[j]) + f[j] / lambda - mx);
      z += q[j];
    }
    for (auto& x : q) x /= z;
    return q;
  }
  const double g = div.gamma;
  auto ratio = [&](double x) { return std::pow(positive_part(1.0 + (g - 1.0) * x), 1.0 / (g - 1.0)); };
  auto mass = [&](double rho) {
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) s += p[j] * ratio((f[j] - rho) / lambda);
    return s;
  };
  // mass(min f) >= 1 >= mass(max f); mass is nonincreasing in rho.
  double lo = *std::min_element(f.begin(), f.end());
  double hi = *std::max_element(f.begin(), f.end());
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    (mass(mid) >= 1.0 ? lo : hi) = mid;
  }
  const double rho = 0.5 * (lo + hi);
  double z = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    q[j] = p[j] * ratio((f[j] - rho) / lambda);
    z += q[j];
  }
  for (auto& x : q) x /= z;
  return q;
}

inline double expectation(std::span<const double> q, std::span<const double> f) {
  return dot(q, f);
}

inline void enumerate_grid(std::size_t n, int m, Vec& q, std::size_t pos, int remaining,
                           const std::function<void(const Vec&)>& visit) {
  if (pos + 1 == n) {
    q[pos] = static_cast<double>(remaining) / m;
    visit(q);
    return;
  }
  for (int k = 0; k <= remaining; ++k) {
    q[pos] = static_cast<double>(k) / m;
    enumerate_grid(n, m, q, pos + 1, remaining - k, visit);
  }
}

}  // namespace detail

/// Brute-force primal value max_Q E_Q[f] s.t. D(Q || P) <= eta.
///
/// Worst-regret balls are boxes Q_j <= e^eta P_j and are filled greedily.
/// KL and Cressie-Read balls are solved from stationarity in Q: for a
/// multiplier lambda the maximiser of E_Q[f] - lambda D is available per
/// coordinate, and lambda is bisected until D(Q) = eta. Projected ascent from
/// Dirichlet restarts and, for small n, a simplex grid provide independent
/// feasible candidates; the result is the best feasible point found, and
/// `converged` is false when a candidate beats the stationary solution.
inline InnerMaxResult inner_max_bruteforce(const DroInstance& inst, const Divergence& div,
                                           const InnerMaxOptions& opts = {}) {
  const std::size_t n = inst.size();
  if (n == 0) throw Error("inner_max_bruteforce: empty instance");
  if (n > opts.max_n) {
    throw Error("inner_max_bruteforce: n = " + std::to_string(n) + " exceeds oracle scale " +
                std::to_string(opts.max_n));
  }
  if (inst.eta < 0.0) throw Error("inner_max_bruteforce: eta must be >= 0");
  const auto& f = inst.scores;
  const Vec p = inst.base();
  InnerMaxResult r;

  auto finish = [&](Vec q) {
    r.q = std::move(q);
    r.value = detail::expectation(r.q, f);
    r.achieved_divergence = divergence(r.q, p, div);
  };

  // Stationary / exact solution.
  Vec q_star;
  const double fmax = *std::max_element(f.begin(), f.end());
  Vec top(n, 0.0);
  {
    double z = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (f[j] == fmax) {
        top[j] = p[j];
        z += p[j];
      }
    }
    for (auto& x : top) x /= z;
  }
  if (inst.eta == 0.0) {
    q_star = p;
  } else if (divergence(top, p, div) <= inst.eta) {
    q_star = top;
  } else if (div.kind == Divergence::Kind::kWorstRegret) {
    const double cap = std::exp(inst.eta);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return f[a] > f[b]; });
    q_star.assign(n, 0.0);
    double remaining = 1.0;
    for (auto j : order) {
      q_star[j] = std::min(cap * p[j], remaining);
      remaining -= q_star[j];
      if (remaining <= 0.0) break;
    }
  } else {
    auto div_at = [&](double lambda) {
      return divergence(detail::stationary_distribution(f, p, div, lambda), p, div);
    };
    double hi = 1.0;
    while (div_at(hi) > inst.eta && hi < 1e300) hi *= 2.0;
    double lo = hi;
    while (div_at(lo) <= inst.eta && lo > 1e-300) lo *= 0.5;
    for (int it = 0; it < 200 && hi / lo - 1.0 > 1e-15; ++it) {
      const double mid = std::sqrt(lo * hi);
      (div_at(mid) > inst.eta ? lo : hi) = mid;
    }
    q_star = detail::stationary_distribution(f, p, div, hi);
    if (divergence(q_star, p, div) > inst.eta + 1e-9) r.converged = false;
  }
  r.stationary_value = detail::expectation(q_star, f);
  Vec best = q_star;
  double best_value = r.stationary_value;

  // Independent feasible candidates.
  std::mt19937_64 rng(opts.seed);
  std::gamma_distribution<double> gamma1(1.0, 1.0);
  const double fmin = *std::min_element(f.begin(), f.end());
  const double spread = std::max(fmax - fmin, 1e-12);
  const double fbar = mean(f);
  auto consider = [&](const Vec& q) {
    if (divergence(q, p, div) > inst.eta + 1e-12) return;
    const double v = detail::expectation(q, f);
    r.candidate_value = std::max(r.candidate_value, v);
  };
  for (int s = 0; s < opts.restarts; ++s) {
    Vec y(n);
    double z = 0.0;
    for (auto& x : y) z += (x = gamma1(rng));
    for (auto& x : y) x /= z;
    Vec q = detail::retract_into_ball(y, p, div, inst.eta);
    double v = detail::expectation(q, f);
    double step = 1.0 / spread;
    for (int it = 0; it < opts.ascent_iterations && step > 1e-12; ++it) {
      Vec moved(n);
      for (std::size_t j = 0; j < n; ++j) moved[j] = q[j] + step * (f[j] - fbar);
      Vec cand = detail::retract_into_ball(detail::project_to_simplex(moved), p, div, inst.eta);
      const double cv = detail::expectation(cand, f);
      if (cv > v) {
        q = std::move(cand);
        v = cv;
        step *= 1.5;
      } else {
        step *= 0.5;
      }
    }
    consider(q);
  }
  if (n <= opts.grid_max_n && opts.grid_resolution > 0) {
    Vec q(n);
    detail::enumerate_grid(n, opts.grid_resolution, q, 0, opts.grid_resolution, consider);
  }
  if (r.candidate_value > best_value + 1e-7) {
    // The stationary solve missed the optimum; fall back to the best candidate.
    r.converged = false;
    best_value = r.candidate_value;
  }
  (void)best_value;
  finish(best);
  if (!r.converged && r.candidate_value > r.value) r.value = r.candidate_value;
  return r;
}

// ---------------------------------------------------------------------------
// Dual side.

/// Golden-section search for the minimiser of a unimodal function on [a, b].
template <typename F>
double golden_section_minimize(F&& fn, double a, double b, double tol, int max_iter = 500) {
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double fc = fn(c), fd = fn(d);
  // Relative floor: far from the origin `tol` can be below the spacing of doubles.
  auto width_ok = [&] { return (b - a) <= tol * std::max({1.0, std::abs(a), std::abs(b)}); };
  for (int it = 0; it < max_iter && !width_ok(); ++it) {
    if (fc <= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = fn(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = fn(d);
    }
  }
  if (!width_ok()) throw Error("golden-section search did not reach tolerance");
  return 0.5 * (a + b);
}

struct ConvexMinimum {
  double arg = 0.0;
  double value = 0.0;
  bool at_boundary = false;  // minimiser sits at the widest lower bracket
};

/// Minimises a convex function known to be increasing above `hi`. Starts on
/// [lo, hi] and widens the lower end while the minimiser sits on it.
template <typename F>
ConvexMinimum minimize_convex_below(F&& fn, double lo, double hi, double tol,
                                    int max_widenings = 60, double max_width = 1e9) {
  ConvexMinimum m;
  for (int w = 0;; ++w) {
    m.arg = golden_section_minimize(fn, lo, hi, tol);
    const double scale = std::max({1.0, std::abs(lo), std::abs(hi)});
    const bool on_edge = m.arg - lo <= 4.0 * tol * scale || fn(lo) <= fn(m.arg);
    if (!on_edge) break;
    if (w >= max_widenings || hi - lo >= max_width) {
      m.at_boundary = true;
      break;
    }
    lo -= 2.0 * (hi - lo);
  }
  m.value = fn(m.arg);
  return m;
}

/// beta + c (mean_j (f_j - beta)_+^p)^(1/p), evaluated without overflow.
inline double margin_dual_objective(std::span<const double> scores, double p, double c,
                                    double beta) {
  double tmax = 0.0;
  for (double f : scores) tmax = std::max(tmax, positive_part(f - beta));
  if (tmax == 0.0) return beta;
  double s = 0.0;
  for (double f : scores) s += std::pow(positive_part(f - beta) / tmax, p);
  return beta + c * tmax * std::pow(s / static_cast<double>(scores.size()), 1.0 / p);
}

/// Closed-form dual at margin beta with c = c_gamma(eta).
inline double dual_value(const DroInstance& inst, double gamma, double beta) {
  if (!(gamma > 1.0)) throw Error("dual_value: gamma must be > 1");
  return margin_dual_objective(inst.scores, gamma / (gamma - 1.0), c_gamma(inst.eta, gamma),
                               beta);
}

/// Lagrangian dual lambda eta + rho + lambda E_P[phi*((f - rho) / lambda)],
/// including its lambda -> 0 limit.
inline double lagrangian_dual_value(const DroInstance& inst, double gamma, double lambda,
                                    double rho) {
  if (lambda < 0.0) throw Error("lagrangian_dual_value: lambda must be >= 0");
  const auto& f = inst.scores;
  if (lambda == 0.0) {
    return *std::max_element(f.begin(), f.end()) <= rho ? rho : kInf;
  }
  double s = 0.0;
  for (double x : f) s += phi_conjugate((x - rho) / lambda, gamma);
  return lambda * inst.eta + rho + lambda * s / static_cast<double>(f.size());
}

struct DualCertificate {
  double beta_star = 0.0;
  double lambda_star = 0.0;
  double rho_star = 0.0;
  double dual_value = 0.0;
  double primal_value = 0.0;
  double gap = 0.0;
  bool at_boundary = false;
  Vec q_star;  // worst-case distribution rebuilt from the weights at beta_star
};

/// Minimises the margin dual by golden-section search starting from the
/// bracket [min f - 1, max f], certifies it against the brute-force primal
/// and recovers lambda* and rho* = beta* + lambda* / (gamma - 1).
inline DualCertificate solve_beta(const DroInstance& inst, double gamma, double tol,
                                  const InnerMaxOptions& primal_opts = {}) {
  if (!(gamma > 1.0)) throw Error("solve_beta: gamma must be > 1");
  if (!(tol > 0.0)) throw Error("solve_beta: tol must be > 0");
  if (inst.scores.empty()) throw Error("solve_beta: empty instance");
  const auto& f = inst.scores;
  const double p = gamma / (gamma - 1.0);
  const double fmin = *std::min_element(f.begin(), f.end());
  const double fmax = *std::max_element(f.begin(), f.end());
  auto h = [&](double beta) { return dual_value(inst, gamma, beta); };

  DualCertificate cert;
  ConvexMinimum m;
  try {
    m = minimize_convex_below(h, fmin - 1.0, fmax, tol);
  } catch (const Error&) {
    m = minimize_convex_below(h, fmin - 10.0, fmax, tol);
  }
  cert.beta_star = m.arg;
  cert.dual_value = m.value;
  cert.at_boundary = m.at_boundary;

  double tmax = 0.0;
  for (double x : f) tmax = std::max(tmax, positive_part(x - cert.beta_star));
  double norm = 0.0;
  if (tmax > 0.0) {
    double s = 0.0;
    for (double x : f) s += std::pow(positive_part(x - cert.beta_star) / tmax, p);
    norm = tmax * std::pow(s / static_cast<double>(f.size()), 1.0 / p);
  }
  cert.lambda_star =
      (gamma - 1.0) * std::pow(gamma * (gamma - 1.0) * inst.eta + 1.0, -1.0 / p) * norm;
  cert.rho_star = cert.beta_star + cert.lambda_star / (gamma - 1.0);

  const double c = c_gamma(inst.eta, gamma);
  cert.q_star.assign(f.size(), 0.0);
  if (tmax > 0.0) {
    // Q*_j = P_j c (f_j - beta)_+^(1/(gamma-1)) / (mean (f - beta)_+^p)^(1/gamma)
    double s = 0.0;
    for (double x : f) s += std::pow(positive_part(x - cert.beta_star) / tmax, p);
    const double denom = std::pow(s / static_cast<double>(f.size()), 1.0 / gamma);
    for (std::size_t j = 0; j < f.size(); ++j) {
      cert.q_star[j] = c * std::pow(positive_part(f[j] - cert.beta_star) / tmax, p - 1.0) /
                       denom / static_cast<double>(f.size());
    }
  }
  cert.primal_value = inner_max_bruteforce(inst, Divergence::cressie_read(gamma), primal_opts).value;
  cert.gap = std::abs(cert.dual_value - cert.primal_value);
  return cert;
}

struct CclEquivalenceReport {
  double primal = 0.0;  // worst-regret ball of radius log(alpha)
  double dual = 0.0;    // min_beta beta + alpha mean (f - beta)_+
  double beta_star = 0.0;
  double gap = 0.0;
};

/// Compares the worst-regret DRO value with the CCL margin dual. The dual is
/// piecewise linear and convex in beta, so its minimum sits on a score.
inline CclEquivalenceReport verify_ccl_equivalence(const DroInstance& inst, double alpha,
                                              const InnerMaxOptions& opts = {}) {
  if (!(alpha >= 1.0)) throw Error("verify_ccl_equivalence: alpha must be >= 1");
  DroInstance ball = inst;
  ball.eta = std::log(alpha);
  CclEquivalenceReport rep;
  rep.primal = inner_max_bruteforce(ball, Divergence::worst_regret(), opts).value;
  rep.dual = kInf;
  for (double beta : inst.scores) {
    double s = 0.0;
    for (double f : inst.scores) s += positive_part(f - beta);
    const double v = beta + alpha * s / static_cast<double>(inst.size());
    if (v < rep.dual) {
      rep.dual = v;
      rep.beta_star = beta;
    }
  }
  rep.gap = std::abs(rep.primal - rep.dual);
  return rep;
}

struct KlLimitReport {
  double cressie_read = 0.0;
  double kl = 0.0;
  double premium = 0.0;       // kl - mean(f): the robustness increment
  double relative_gap = 0.0;  // |cressie_read - kl| / premium
};

/// Cressie-Read brute-force value near gamma = 1 against the KL value at the
/// same radius. The gap is relative to the KL robustness increment.
inline KlLimitReport verify_kl_limit(const DroInstance& inst, double gamma_near_1,
                                     const InnerMaxOptions& opts = {}) {
  KlLimitReport rep;
  rep.cressie_read =
      inner_max_bruteforce(inst, Divergence::cressie_read(gamma_near_1), opts).value;
  rep.kl = inner_max_bruteforce(inst, Divergence::kl(), opts).value;
  rep.premium = rep.kl - mean(inst.scores);
  const double diff = std::abs(rep.cressie_read - rep.kl);
  rep.relative_gap = diff <= 1e-15 ? 0.0 : diff / std::max(rep.premium, 1e-15);
  return rep;
}

/// Minimiser of the training-time margin objective beta + M(beta) (with the
/// eps stabiliser) for one user's negative scores.
inline ConvexMinimum solve_margin(std::span<const double> neg_scores, double gamma_star,
                                  double c, double eps, double tol = 1e-8) {
  if (neg_scores.empty()) throw Error("solve_margin: no negative scores");
  const double fmin = *std::min_element(neg_scores.begin(), neg_scores.end());
  const double fmax = *std::max_element(neg_scores.begin(), neg_scores.end());
  auto h = [&](double beta) {
    return drrl_beta_objective(neg_scores, gamma_star, c, eps, beta);
  };
  auto m = minimize_convex_below(h, fmin - 1.0, fmax, tol);
  // For c <= 1 the objective is nondecreasing in beta, so the infimum sits at
  // -inf; on the flat tail the search can stop anywhere in rounding noise.
  if (c <= 1.0) m.at_boundary = true;
  return m;
}

}  // namespace drrl
