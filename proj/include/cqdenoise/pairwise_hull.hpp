#pragma once

// Closed forms for two-variable hulls: f, g, their conic encodings, the
// optimal decomposition parameter and the explicit cut violation.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>

#include "cqdenoise/cone_program.hpp"
#include "cqdenoise/core_model.hpp"

namespace cqdenoise {

struct PairParams {
    double d1 = 1.0;
    double d2 = 1.0;

    bool valid() const { return d1 > 0.0 && d2 > 0.0 && d1 * d2 >= 1.0 - 1e-12; }
};

/// A registered cut (i, j, d) and the builder variables it owns.
struct PairCut {
    std::size_t i = 0;
    std::size_t j = 0;
    double d = 1.0;
    std::size_t s = 0;
    std::size_t v = 0;
    std::size_t w = 0;
};

namespace detail {
// coef * x^2 / z with 0 * inf treated as 0
inline double persp_term(double coef, double x, double z) {
    if (coef == 0.0) return 0.0;
    return coef * safe_div(x * x, z);
}
}  // namespace detail

/// (x1-x2)^2/z1 if x1 >= x2, else (x1-x2)^2/z2.
inline double eval_f(double z1, double z2, double x1, double x2) {
    double diff = x1 - x2;
    return x1 >= x2 ? safe_div(diff * diff, z1) : safe_div(diff * diff, z2);
}

/// First term of the maximum defining g.
inline double g_first_term(double z1, double z2, double x1, double x2, const PairParams& d) {
    return d.d1 * eval_f(z1, z2, x1, x2 / d.d1) + detail::persp_term(d.d2 - 1.0 / d.d1, x2, z2);
}

/// Second term of the maximum defining g.
inline double g_second_term(double z1, double z2, double x1, double x2, const PairParams& d) {
    return d.d2 * eval_f(z1, z2, x1 / d.d2, x2) + detail::persp_term(d.d1 - 1.0 / d.d2, x1, z1);
}

/// Closure of the perspective of d1 x1^2 - 2 x1 x2 + d2 x2^2 over the
/// indicator pair, in its four-branch explicit form.
inline double eval_g(double z1, double z2, double x1, double x2, const PairParams& d) {
    const double q = d.d1 * x1 * x1 - 2.0 * x1 * x2 + d.d2 * x2 * x2;
    if (z1 >= z2) {
        if (d.d1 * x1 >= x2)
            return safe_div(d.d1 * x1 * x1 - 2.0 * x1 * x2 + x2 * x2 / d.d1, z1) +
                   detail::persp_term(d.d2 - 1.0 / d.d1, x2, z2);
        return safe_div(q, z2);
    }
    if (x1 >= d.d2 * x2) return safe_div(q, z1);
    return safe_div(x1 * x1 / d.d2 - 2.0 * x1 * x2 + d.d2 * x2 * x2, z2) +
           detail::persp_term(d.d1 - 1.0 / d.d2, x1, z1);
}

struct X2Block {
    std::size_t v = 0;
    std::size_t w = 0;
};

/// Adds  v >= a1 - a2, v^2 <= s z1,  w >= a2 - a1, w^2 <= s z2,
/// so that s >= f(z1, z2, a1, a2). v and w are declared free; their sign is
/// immaterial because the rows only bound them from below.
inline X2Block x2_hull_block(ConeBuilder& b, const LinExpr& a1, const LinExpr& a2, const LinExpr& z1,
                             const LinExpr& z2, const LinExpr& s) {
    X2Block blk;
    blk.v = b.add_var(ConeBuilder::Domain::free, "v");
    blk.w = b.add_var(ConeBuilder::Domain::free, "w");
    b.add_ge(LinExpr::var(blk.v) - a1 + a2, 0.0);
    b.add_ge(LinExpr::var(blk.w) - a2 + a1, 0.0);
    b.add_rotated_cone(s, z1, {LinExpr::var(blk.v)});
    b.add_rotated_cone(s, z2, {LinExpr::var(blk.w)});
    return blk;
}

/// Adds the extended description of the hull with parameters d, so that
/// s >= g(z1, z2, x1, x2; d).
inline void z2_hull_block(ConeBuilder& b, const LinExpr& x1, const LinExpr& x2, const LinExpr& z1,
                          const LinExpr& z2, const LinExpr& s, const PairParams& d) {
    using D = ConeBuilder::Domain;
    auto s1 = b.add_var(D::nonneg, "s1");
    auto s2 = b.add_var(D::nonneg, "s2");
    auto q1 = b.add_var(D::nonneg, "q1");
    auto q2 = b.add_var(D::nonneg, "q2");
    b.add_rotated_cone(LinExpr::var(s1), z1, {x1});
    b.add_rotated_cone(LinExpr::var(s2), z2, {x2});
    x2_hull_block(b, x1, (1.0 / d.d1) * x2, z1, z2, LinExpr::var(q1));
    x2_hull_block(b, (1.0 / d.d2) * x1, x2, z1, z2, LinExpr::var(q2));
    LinExpr r1 = d.d1 * LinExpr::var(q1);
    r1.add(s2, d.d2 - 1.0 / d.d1);
    b.add_le(r1 - s, 0.0);
    LinExpr r2 = d.d2 * LinExpr::var(q2);
    r2.add(s1, d.d1 - 1.0 / d.d2);
    b.add_le(r2 - s, 0.0);
}

/// Value of  d f(z_i, z_j, x_i, x_j/d) - (d G_ii - 2 G_ij + G_jj/d);
/// positive when the cut with parameter d is violated.
inline double cut_value(double d, double zi, double zj, double xi, double xj, double Gii, double Gij, double Gjj) {
    return d * eval_f(zi, zj, xi, xj / d) - (d * Gii - 2.0 * Gij + Gjj / d);
}

namespace detail {
// z used by the active case: z_i when x_i^2/G_ii >= x_j^2/G_jj, else z_j
inline double active_z(double zi, double zj, double xi, double xj, double Gii, double Gjj) {
    return safe_div(xi * xi, Gii) >= safe_div(xj * xj, Gjj) ? zi : zj;
}
}  // namespace detail

/// Maximizer over d > 0 of cut_value; +inf when the active denominator is 0.
inline double optimal_d(double zi, double zj, double xi, double xj, double Gii, double Gjj) {
    const double zc = detail::active_z(zi, zj, xi, xj, Gii, Gjj);
    const double den = Gii - safe_div(xi * xi, zc);
    const double num = Gjj - safe_div(xj * xj, zc);
    if (!(den > 0.0)) return std::numeric_limits<double>::infinity();
    return std::sqrt(std::max(num, 0.0) / den);
}

/// Explicit form of the most violated cut for the pair; positive means the
/// relaxation point violates some cut. Equals half of the supremum of
/// cut_value over d.
inline double cut_violation(double zi, double zj, double xi, double xj, double Gii, double Gij, double Gjj) {
    const double zc = detail::active_z(zi, zj, xi, xj, Gii, Gjj);
    const double a = std::max(Gii - safe_div(xi * xi, zc), 0.0);
    const double c = std::max(Gjj - safe_div(xj * xj, zc), 0.0);
    return Gij - safe_div(xi * xj, zc) - std::sqrt(a * c);
}

}  // namespace cqdenoise
