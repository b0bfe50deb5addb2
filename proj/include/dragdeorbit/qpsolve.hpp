#pragma once

// Dense box-constrained convex QP (primal active set) and the discrete-time
// algebraic Riccati equation.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include "error.hpp"

namespace dragdeorbit {

/// minimise 1/2 x'Hx + f'x  subject to lb <= x <= ub.
struct BoxQP {
  Eigen::MatrixXd H;
  Eigen::VectorXd f;
  Eigen::VectorXd lb;
  Eigen::VectorXd ub;

  Eigen::Index size() const { return f.size(); }

  double objective(const Eigen::VectorXd& x) const { return 0.5 * x.dot(H * x) + f.dot(x); }

  void validate() const {
    const auto n = f.size();
    if (H.rows() != n || H.cols() != n || lb.size() != n || ub.size() != n) {
      throw RangeError("BoxQP: inconsistent dimensions");
    }
    if ((lb.array() > ub.array()).any()) throw RangeError("BoxQP: lb > ub");
    const double scale = std::max(1.0, H.cwiseAbs().maxCoeff());
    if ((H - H.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale) throw RangeError("BoxQP: H not symmetric");
  }
};

enum class QPStatus { Optimal, MaxIter };

struct QPSolution {
  Eigen::VectorXd x;
  double objective = 0.0;
  int iterations = 0;
  QPStatus status = QPStatus::Optimal;
};

/// Box-QP KKT test: free coordinates have |g| <= tol, bound coordinates have the correct sign.
inline bool box_kkt_satisfied(const BoxQP& p, const Eigen::VectorXd& x, double tol) {
  const Eigen::VectorXd g = p.H * x + p.f;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const bool at_lb = x(i) <= p.lb(i);
    const bool at_ub = x(i) >= p.ub(i);
    if (at_lb && at_ub) continue;
    if (at_lb) {
      if (g(i) < -tol) return false;
    } else if (at_ub) {
      if (g(i) > tol) return false;
    } else if (std::abs(g(i)) > tol) {
      return false;
    }
    if (x(i) < p.lb(i) || x(i) > p.ub(i)) return false;
  }
  return true;
}

/// Primal active-set method. Always returns a feasible point; status MaxIter
/// when the iteration cap (default 10 n) is hit first.
inline QPSolution solve_box_qp(const BoxQP& p, double tol = 1e-8, int max_iter = -1,
                               const std::optional<Eigen::VectorXd>& warm = std::nullopt) {
  const Eigen::Index n = p.size();
  if (max_iter < 0) max_iter = static_cast<int>(10 * n);
  QPSolution sol;
  Eigen::VectorXd x = (warm && warm->size() == n) ? *warm : Eigen::VectorXd::Zero(n);
  x = x.cwiseMax(p.lb).cwiseMin(p.ub);

  // state: 0 free, -1 at lower, +1 at upper
  std::vector<int> state(static_cast<std::size_t>(n), 0);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (x(i) <= p.lb(i)) state[i] = -1;
    else if (x(i) >= p.ub(i)) state[i] = 1;
  }

  std::vector<Eigen::Index> free_idx;
  free_idx.reserve(static_cast<std::size_t>(n));
  int iter = 0;
  bool at_minimiser = false;  // last move was a full, unblocked Newton step
  for (; iter < max_iter; ++iter) {
    const Eigen::VectorXd g = p.H * x + p.f;
    free_idx.clear();
    for (Eigen::Index i = 0; i < n; ++i) {
      if (state[i] == 0) free_idx.push_back(i);
    }
    const auto nf = static_cast<Eigen::Index>(free_idx.size());
    Eigen::VectorXd step = Eigen::VectorXd::Zero(n);
    bool ray = false;  // zero-curvature descent direction: move to the first bound
    if (nf > 0 && !at_minimiser) {
      Eigen::MatrixXd hff(nf, nf);
      Eigen::VectorXd gf(nf);
      for (Eigen::Index a = 0; a < nf; ++a) {
        gf(a) = g(free_idx[a]);
        for (Eigen::Index b = 0; b < nf; ++b) hff(a, b) = p.H(free_idx[a], free_idx[b]);
      }
      Eigen::VectorXd pf;
      Eigen::LLT<Eigen::MatrixXd> llt(hff);
      const double hscale = std::max(1e-300, hff.diagonal().cwiseAbs().maxCoeff());
      bool pd = llt.info() == Eigen::Success;
      if (pd) {
        const auto& l = llt.matrixLLT();
        const double dmin = l.diagonal().minCoeff();
        pd = dmin * dmin > 1e-13 * hscale;
      }
      if (pd) {
        pf = -llt.solve(gf);
      } else {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(hff);
        const Eigen::VectorXd& ev = es.eigenvalues();
        const Eigen::MatrixXd& q = es.eigenvectors();
        const double cut = 1e-12 * std::max(hscale, ev.cwiseAbs().maxCoeff());
        Eigen::VectorXd null_part = Eigen::VectorXd::Zero(nf);
        Eigen::VectorXd range_step = Eigen::VectorXd::Zero(nf);
        for (Eigen::Index k = 0; k < nf; ++k) {
          const double coef = q.col(k).dot(gf);
          if (ev(k) > cut) range_step -= coef / ev(k) * q.col(k);
          else null_part += coef * q.col(k);
        }
        if (null_part.norm() > 1e-14 * std::max(1.0, gf.norm())) {
          pf = -null_part;
          ray = true;
        } else {
          pf = range_step;
        }
      }
      for (Eigen::Index a = 0; a < nf; ++a) step(free_idx[a]) = pf(a);
    }

    const double step_norm = step.cwiseAbs().maxCoeff();
    const double xscale = 1.0 + x.cwiseAbs().maxCoeff();
    if (nf == 0 || at_minimiser || (!ray && step_norm <= 1e-15 * xscale)) {
      at_minimiser = false;
      // Subspace minimiser reached: check bound multipliers.
      Eigen::Index worst = -1;
      double worst_v = tol;
      for (Eigen::Index i = 0; i < n; ++i) {
        if (state[i] == 0 || p.lb(i) == p.ub(i)) continue;
        const double viol = state[i] < 0 ? -g(i) : g(i);
        if (viol > worst_v) {
          worst_v = viol;
          worst = i;
        }
      }
      if (worst < 0) {
        sol.status = QPStatus::Optimal;
        break;
      }
      state[worst] = 0;
      continue;
    }

    double alpha = ray ? std::numeric_limits<double>::infinity() : 1.0;
    Eigen::Index block = -1;
    int block_side = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (state[i] != 0 || step(i) == 0.0) continue;
      const double limit = step(i) > 0 ? (p.ub(i) - x(i)) / step(i) : (p.lb(i) - x(i)) / step(i);
      if (limit < alpha) {
        alpha = limit;
        block = i;
        block_side = step(i) > 0 ? 1 : -1;
      }
    }
    if (!std::isfinite(alpha)) {
      // Unbounded along a zero-curvature direction: cannot happen with finite boxes.
      sol.status = QPStatus::MaxIter;
      break;
    }
    alpha = std::max(alpha, 0.0);
    x += alpha * step;
    at_minimiser = block < 0 && !ray;
    if (block >= 0) {
      x(block) = block_side > 0 ? p.ub(block) : p.lb(block);
      state[block] = block_side;
    }
    x = x.cwiseMax(p.lb).cwiseMin(p.ub);
  }
  if (iter >= max_iter) sol.status = QPStatus::MaxIter;
  sol.x = x;
  sol.objective = p.objective(x);
  sol.iterations = iter;
  return sol;
}

struct DareResult {
  Eigen::MatrixXd P;
  int iterations = 0;
  bool converged = false;
  double residual = 0.0;
};

inline double dare_residual(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, const Eigen::MatrixXd& q,
                            const Eigen::MatrixXd& r, const Eigen::MatrixXd& p) {
  const Eigen::MatrixXd atpb = a.transpose() * p * b;
  const Eigen::MatrixXd s = r + b.transpose() * p * b;
  const Eigen::MatrixXd res =
      a.transpose() * p * a - atpb * s.ldlt().solve(atpb.transpose()) + q - p;
  return res.cwiseAbs().rowwise().sum().maxCoeff();
}

enum class DareMethod { Doubling, FixedPoint };

/// Stabilising DARE solution. Both methods evaluate the Riccati recursion
/// P <- A'PA - A'PB (R + B'PB)^-1 B'PA + Q; Doubling advances it 2^k steps at
/// iteration k. Convergence: residual < tol (1 + |P|_inf).
inline DareResult solve_dare(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, const Eigen::MatrixXd& q,
                             const Eigen::MatrixXd& r, double tol = 1e-10, int max_iter = 100,
                             DareMethod method = DareMethod::Doubling) {
  const auto nx = a.rows();
  if (a.cols() != nx || b.rows() != nx || q.rows() != nx || q.cols() != nx || r.rows() != b.cols() ||
      r.cols() != b.cols()) {
    throw RangeError("solve_dare: inconsistent dimensions");
  }
  DareResult out;
  auto inf_norm = [](const Eigen::MatrixXd& m) { return m.cwiseAbs().rowwise().sum().maxCoeff(); };
  auto done = [&](const Eigen::MatrixXd& p) {
    out.residual = dare_residual(a, b, q, r, p);
    return out.residual < tol * (1.0 + inf_norm(p));
  };
  if (method == DareMethod::FixedPoint) {
    Eigen::MatrixXd p = q;
    for (int k = 0; k < max_iter; ++k) {
      const Eigen::MatrixXd atpb = a.transpose() * p * b;
      const Eigen::MatrixXd s = r + b.transpose() * p * b;
      Eigen::MatrixXd next = a.transpose() * p * a - atpb * s.ldlt().solve(atpb.transpose()) + q;
      p = 0.5 * (next + next.transpose());
      out.iterations = k + 1;
      if (done(p)) {
        out.converged = true;
        break;
      }
    }
    out.P = p;
    return out;
  }
  const Eigen::MatrixXd ident = Eigen::MatrixXd::Identity(nx, nx);
  Eigen::MatrixXd ak = a;
  Eigen::MatrixXd gk = b * r.ldlt().solve(b.transpose());
  gk = 0.5 * (gk + gk.transpose());
  Eigen::MatrixXd hk = q;
  for (int k = 0; k < max_iter; ++k) {
    const Eigen::PartialPivLU<Eigen::MatrixXd> w(ident + gk * hk);
    const Eigen::MatrixXd w_a = w.solve(ak);
    const Eigen::MatrixXd w_g = w.solve(gk);
    const Eigen::MatrixXd h_next = hk + ak.transpose() * hk * w_a;
    const Eigen::MatrixXd g_next = gk + ak * w_g * ak.transpose();
    ak = ak * w_a;
    hk = 0.5 * (h_next + h_next.transpose());
    gk = 0.5 * (g_next + g_next.transpose());
    out.iterations = k + 1;
    if (done(hk)) {
      out.converged = true;
      break;
    }
  }
  out.P = hk;
  return out;
}

}  // namespace dragdeorbit
