#pragma once

// Independent oracles shared by the unit and acceptance tests.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "cqdenoise/cone_solver.hpp"
#include "cqdenoise/pairwise_hull.hpp"

namespace cqtest {

using namespace cqdenoise;

/// min over x >= 0 of 0.5 x'Hx + g'x for a 2x2 positive definite H,
/// by enumerating the four active sets.
inline double nonneg_qp2(const std::array<double, 4>& H, const std::array<double, 2>& g) {
    double best = 0.0;  // x = 0
    if (H[0] > 0.0) {
        double x = std::max(0.0, -g[0] / H[0]);
        best = std::min(best, 0.5 * H[0] * x * x + g[0] * x);
    }
    if (H[3] > 0.0) {
        double x = std::max(0.0, -g[1] / H[3]);
        best = std::min(best, 0.5 * H[3] * x * x + g[1] * x);
    }
    double det = H[0] * H[3] - H[1] * H[2];
    if (det > 0.0) {
        double x1 = (-g[0] * H[3] + g[1] * H[1]) / det;
        double x2 = (-g[1] * H[0] + g[0] * H[2]) / det;
        if (x1 >= 0.0 && x2 >= 0.0) best = std::min(best, 0.5 * (H[0] * x1 * x1 + 2 * H[1] * x1 * x2 + H[3] * x2 * x2) + g[0] * x1 + g[1] * x2);
    }
    return best;
}

/// min a'z + b'x + (d1 x1^2 - 2 x1 x2 + d2 x2^2) over z in {0,1}^2, x >= 0,
/// x_i (1 - z_i) = 0.
inline double brute_force_pair(const std::array<double, 2>& a, const std::array<double, 2>& b, const PairParams& d) {
    double best = 0.0;
    // z = (1,0), (0,1), (1,1)
    best = std::min(best, a[0] + nonneg_qp2({2 * d.d1, 0, 0, 0}, {b[0], 0}));
    best = std::min(best, a[1] + nonneg_qp2({0, 0, 0, 2 * d.d2}, {0, b[1]}));
    best = std::min(best, a[0] + a[1] + nonneg_qp2({2 * d.d1, -2, -2, 2 * d.d2}, {b[0], b[1]}));
    return best;
}

struct PairHullResult {
    ConeSolution sol;
    double z1 = 0, z2 = 0, x1 = 0, x2 = 0, s = 0;
};

/// The same linear objective over the conic hull description.
inline PairHullResult conic_pair(const std::array<double, 2>& a, const std::array<double, 2>& b, const PairParams& d) {
    using D = ConeBuilder::Domain;
    ConeBuilder cb;
    auto z1 = cb.add_var(D::nonneg), z2 = cb.add_var(D::nonneg);
    auto x1 = cb.add_var(D::nonneg), x2 = cb.add_var(D::nonneg);
    auto s = cb.add_var(D::nonneg);
    cb.add_le(LinExpr::var(z1), 1.0);
    cb.add_le(LinExpr::var(z2), 1.0);
    z2_hull_block(cb, LinExpr::var(x1), LinExpr::var(x2), LinExpr::var(z1), LinExpr::var(z2), LinExpr::var(s), d);
    cb.add_objective(z1, a[0]);
    cb.add_objective(z2, a[1]);
    cb.add_objective(x1, b[0]);
    cb.add_objective(x2, b[1]);
    cb.add_objective(s, 1.0);
    auto cp = cb.compile();
    PairHullResult r;
    r.sol = solve_cone_program(cp.program);
    if (r.sol.status == ConeStatus::optimal) {
        r.z1 = cp.value(r.sol, z1);
        r.z2 = cp.value(r.sol, z2);
        r.x1 = cp.value(r.sol, x1);
        r.x2 = cp.value(r.sol, x2);
        r.s = cp.value(r.sol, s);
    }
    return r;
}

/// Random (z, x, Gamma) with the perspective rows satisfied.
struct PerspPoint {
    double zi, zj, xi, xj, Gii, Gij, Gjj;
};

inline PerspPoint random_persp_point(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    PerspPoint p;
    p.zi = 0.05 + 0.95 * u(rng);
    p.zj = 0.05 + 0.95 * u(rng);
    p.xi = u(rng);
    p.xj = u(rng);
    p.Gii = p.xi * p.xi / p.zi + 0.01 + u(rng);
    p.Gjj = p.xj * p.xj / p.zj + 0.01 + u(rng);
    p.Gij = (2.0 * u(rng) - 0.5) * std::sqrt(p.Gii * p.Gjj);
    return p;
}

/// 401-point log grid 10^(k/50), k = -200..200.
inline std::vector<double> log_grid() {
    std::vector<double> g;
    for (int k = -200; k <= 200; ++k) g.push_back(std::pow(10.0, k / 50.0));
    return g;
}

}  // namespace cqtest
