#pragma once

// Thresholding heuristic, optimality gap, and a brute-force oracle for the
// mixed-integer model on tiny instances.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <vector>

#include "cqdenoise/core_model.hpp"

namespace cqdenoise {

/// Entries with |x_i| above this count as nonzero in every sparsity metric.
inline constexpr double kNonzeroThreshold = 1e-3;

struct RoundResult {
    std::vector<double> x_bar;
    std::vector<double> z_bar;
    double zeta_ub = 0.0;
};

/// Keeps the k largest entries of x_hat (ties go to the lower index), zeroes
/// the rest, and evaluates the mixed-integer objective with z = 1 on the
/// nonzero entries.
inline RoundResult threshold_round(const std::vector<double>& x_hat, std::size_t k, const ProblemInstance& inst) {
    const std::size_t n = x_hat.size();
    if (n != inst.size()) throw InvalidInput("threshold_round: size mismatch");
    if (k > n) throw InvalidInput("threshold_round: k exceeds n");
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x_hat[a] > x_hat[b]; });
    RoundResult r;
    r.x_bar.assign(n, 0.0);
    r.z_bar.assign(n, 0.0);
    for (std::size_t t = 0; t < k; ++t) {
        const std::size_t i = order[t];
        r.x_bar[i] = std::max(x_hat[i], 0.0);
        if (r.x_bar[i] > 0.0) r.z_bar[i] = 1.0;
    }
    r.zeta_ub = miqo_objective(inst, r.x_bar, r.z_bar);
    return r;
}

/// 100 (ub - lb) / ub; empty when ub <= 0, where the gap is undefined.
inline std::optional<double> optimality_gap(double zeta_ub, double zeta_lb) {
    if (!(zeta_ub > 0.0) || !std::isfinite(zeta_lb)) return std::nullopt;
    return 100.0 * (zeta_ub - zeta_lb) / zeta_ub;
}

/// Fills the rounded objective and the gap of a relaxation report.
inline void attach_rounding(SolveReport& r, const ProblemInstance& inst, std::size_t k) {
    auto rr = threshold_round(r.x_star, std::min(k, inst.size()), inst);
    r.rounded_objective = rr.zeta_ub;
    r.gap_percent = optimality_gap(rr.zeta_ub, r.objective);
}

struct MiqoSolution {
    double zeta = std::numeric_limits<double>::infinity();
    std::vector<double> z;
    std::vector<double> x;
};

namespace detail {

// min x'Hx + g'x over 0 <= x <= u with H positive definite: projected
// Gauss-Seidel to locate the active set, then an exact solve on the free
// coordinates, repeated until the KKT conditions hold.
inline Eigen::VectorXd box_qp(const Eigen::MatrixXd& H, const Eigen::VectorXd& g, double u) {
    const Eigen::Index m = H.rows();
    Eigen::VectorXd x = Eigen::VectorXd::Zero(m);
    // unconstrained stationary point first; usually already feasible
    Eigen::LDLT<Eigen::MatrixXd> full(H);
    Eigen::VectorXd xu = full.solve(-0.5 * g);
    if (xu.minCoeff() >= 0.0 && xu.maxCoeff() <= u) return xu;
    x = xu.cwiseMax(0.0).cwiseMin(u);
    for (int sweep = 0; sweep < 2000; ++sweep) {
        double change = 0.0;
        for (Eigen::Index i = 0; i < m; ++i) {
            // gradient of x'Hx + g'x in coordinate i is 2 (Hx)_i + g_i
            double rest = H.row(i).dot(x) - H(i, i) * x[i];
            double xi = std::clamp(-(0.5 * g[i] + rest) / H(i, i), 0.0, u);
            change = std::max(change, std::abs(xi - x[i]));
            x[i] = xi;
        }
        if (change < 1e-13) break;
    }
    for (int polish = 0; polish < 20; ++polish) {
        std::vector<Eigen::Index> free;
        for (Eigen::Index i = 0; i < m; ++i)
            if (x[i] > 1e-12 && x[i] < u - 1e-12) free.push_back(i);
        Eigen::VectorXd xn = x;
        for (Eigen::Index i = 0; i < m; ++i)
            if (x[i] <= 1e-12) xn[i] = 0.0;
            else if (x[i] >= u - 1e-12) xn[i] = u;
        if (!free.empty()) {
            const auto f = static_cast<Eigen::Index>(free.size());
            Eigen::MatrixXd Hf(f, f);
            Eigen::VectorXd rhs(f);
            for (Eigen::Index a = 0; a < f; ++a) {
                rhs[a] = -0.5 * g[free[a]];
                for (Eigen::Index i = 0; i < m; ++i)
                    if (std::find(free.begin(), free.end(), i) == free.end()) rhs[a] -= H(free[a], i) * xn[i];
                for (Eigen::Index b = 0; b < f; ++b) Hf(a, b) = H(free[a], free[b]);
            }
            Eigen::VectorXd xf = Hf.ldlt().solve(rhs);
            for (Eigen::Index a = 0; a < f; ++a) xn[free[a]] = xf[a];
        }
        // KKT: gradient >= 0 at lower bounds, <= 0 at upper bounds, free in range
        Eigen::VectorXd grad = 2.0 * H * xn + g;
        bool ok = true;
        for (Eigen::Index i = 0; i < m && ok; ++i) {
            if (xn[i] < -1e-12 || xn[i] > u + 1e-12) ok = false;
            else if (xn[i] == 0.0 && grad[i] < -1e-10) ok = false;
            else if (xn[i] == u && grad[i] > 1e-10) ok = false;
        }
        if (ok) return xn;
        // fall back to more Gauss-Seidel from the projected polish point
        x = xn.cwiseMax(0.0).cwiseMin(u);
        for (int sweep = 0; sweep < 200; ++sweep)
            for (Eigen::Index i = 0; i < m; ++i) {
                double rest = H.row(i).dot(x) - H(i, i) * x[i];
                x[i] = std::clamp(-(0.5 * g[i] + rest) / H(i, i), 0.0, u);
            }
    }
    return x;
}

}  // namespace detail

/// Exhaustive search over indicator vectors admitted by the priors; for
/// each support the restricted quadratic is minimized over 0 <= x <= bigM.
inline MiqoSolution enumerate_miqo(const ProblemInstance& inst) {
    const std::size_t n = inst.size();
    if (n > 16) throw InvalidInput("enumerate_miqo is limited to n <= 16");
    const auto Q = to_mmatrix(inst);
    Eigen::MatrixXd Qd = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) Qd(i, i) = Q.diag[i];
    for (const auto& [e, q] : Q.offdiag) Qd(e.first, e.second) = Qd(e.second, e.first) = q;
    std::vector<double> lin(n);
    for (std::size_t i = 0; i < n; ++i)
        lin[i] = Q.linear[i] + inst.priors.mu1 + (inst.extra_linear.empty() ? 0.0 : inst.extra_linear[i]);

    MiqoSolution best;
    std::vector<int> zb(n);
    for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
        for (std::size_t i = 0; i < n; ++i) zb[i] = (mask >> i) & 1u;
        if (!inst.priors.admits(zb)) continue;
        std::vector<Eigen::Index> sup;
        for (std::size_t i = 0; i < n; ++i)
            if (zb[i]) sup.push_back(static_cast<Eigen::Index>(i));
        std::vector<double> x(n, 0.0), z(n, 0.0);
        for (auto i : sup) z[i] = 1.0;
        if (!sup.empty()) {
            const auto s = static_cast<Eigen::Index>(sup.size());
            Eigen::MatrixXd H(s, s);
            Eigen::VectorXd g(s);
            for (Eigen::Index a = 0; a < s; ++a) {
                g[a] = lin[sup[a]];
                for (Eigen::Index b = 0; b < s; ++b) H(a, b) = Qd(sup[a], sup[b]);
            }
            Eigen::VectorXd xs = detail::box_qp(H, g, inst.bigM);
            for (Eigen::Index a = 0; a < s; ++a) x[sup[a]] = xs[a];
        }
        double zeta = miqo_objective(inst, x, z);
        if (zeta < best.zeta) {
            best.zeta = zeta;
            best.x = std::move(x);
            best.z = std::move(z);
        }
    }
    return best;
}

}  // namespace cqdenoise
