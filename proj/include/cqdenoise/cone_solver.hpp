#pragma once

// Conic solve entry point and the bundled primal-dual interior-point backend.
//
// The backend works on the embedding
//     min c'x  s.t.  Ax = b,  Gx + s = h,  s in K
// with G = -T and h = 0, where T maps each non-free variable slice onto a
// symmetric cone (identity for nonneg and second-order slices; rotated
// slices (a, b, v) go to ((a+b)/sqrt2, (a-b)/sqrt2, sqrt2 v)). Iterates follow
// a homogeneous self-dual path with Nesterov-Todd scaling and a Mehrotra
// corrector. Each Newton system is reduced to the quasidefinite matrix
// [T'W^-2 T + dI, A'; A, -dI], factored with a sparse LDL' and refined
// against the unregularized system.

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <memory>
#include <string>
#include <vector>

#include "cqdenoise/cone_program.hpp"

namespace cqdenoise {

struct ConeSolverOptions {
    double feas_tol = 1e-8;
    double gap_tol = 1e-8;
    int max_iter = 200;
    double step_factor = 0.99;
    double regularization = 1e-11;
    int refine_steps = 8;
    // accepted as optimal when full accuracy cannot be reached
    double reduced_tol = 1e-6;
};

class ConeBackend {
public:
    virtual ~ConeBackend() = default;
    virtual std::string name() const = 0;
    virtual ConeSolution solve(const ConeProgram& p, const ConeSolverOptions& opts) const = 0;
};

namespace detail {

using Vec = Eigen::VectorXd;
using SpMat = Eigen::SparseMatrix<double, Eigen::ColMajor, int>;

struct SBlock {
    bool soc = false;
    bool rotated = false;
    std::size_t xoff = 0;
    std::size_t soff = 0;
    std::size_t len = 0;
};

struct Scaling {
    // nonneg: w holds sqrt(s/z) per entry; soc: beta and wbar (wbar'Jwbar = 1)
    std::vector<double> beta;
    Vec w;
};

class IpmWorkspace {
public:
    IpmWorkspace(const ConeProgram& p, const ConeSolverOptions& o) : p_(p), opt_(o) {
        n_ = p.num_vars;
        m_ = p.num_eq_rows;
        std::size_t soff = 0;
        for (const auto& c : p.cones) {
            if (c.kind == ConeKind::free) continue;
            SBlock b;
            b.soc = c.kind != ConeKind::nonneg;
            b.rotated = c.kind == ConeKind::rotated_second_order;
            b.xoff = c.start;
            b.soff = soff;
            b.len = c.len;
            soff += c.len;
            blocks_.push_back(b);
            degree_ += b.soc ? 1 : c.len;
        }
        ns_ = soff;
        c_ = Vec::Zero(n_);
        for (const auto& [j, v] : p.objective) c_[j] += v;
        b_ = Vec::Zero(m_);
        for (std::size_t r = 0; r < m_; ++r) b_[r] = p.eq_rhs[r];
        std::vector<Eigen::Triplet<double>> trip;
        trip.reserve(p.eq_entries.size());
        for (const auto& e : p.eq_entries)
            trip.emplace_back(static_cast<int>(e.row), static_cast<int>(e.col), e.value);
        A_.resize(static_cast<int>(m_), static_cast<int>(n_));
        A_.setFromTriplets(trip.begin(), trip.end());
        At_ = A_.transpose();
        scale_.beta.assign(blocks_.size(), 1.0);
        scale_.w = Vec::Ones(ns_);
        for (const auto& b : blocks_)
            if (b.soc) {
                scale_.w.segment(b.soff, b.len).setZero();
                scale_.w[b.soff] = 1.0;
            }
    }

    ConeSolution run();

private:
    static constexpr double kSqrt2 = 1.4142135623730951;

    // ---- cone algebra on s-space vectors ----
    Vec T(const Vec& x) const {
        Vec u(ns_);
        for (const auto& b : blocks_) {
            if (b.rotated) {
                double a = x[b.xoff], c = x[b.xoff + 1];
                u[b.soff] = (a + c) / kSqrt2;
                u[b.soff + 1] = (a - c) / kSqrt2;
                for (std::size_t k = 2; k < b.len; ++k) u[b.soff + k] = kSqrt2 * x[b.xoff + k];
            } else {
                u.segment(b.soff, b.len) = x.segment(b.xoff, b.len);
            }
        }
        return u;
    }
    Vec Tt(const Vec& u) const {
        Vec x = Vec::Zero(n_);
        for (const auto& b : blocks_) {
            if (b.rotated) {
                double p = u[b.soff], q = u[b.soff + 1];
                x[b.xoff] = (p + q) / kSqrt2;
                x[b.xoff + 1] = (p - q) / kSqrt2;
                for (std::size_t k = 2; k < b.len; ++k) x[b.xoff + k] = kSqrt2 * u[b.soff + k];
            } else {
                x.segment(b.xoff, b.len) = u.segment(b.soff, b.len);
            }
        }
        return x;
    }

    static double jdot(const Eigen::Ref<const Vec>& u, const Eigen::Ref<const Vec>& v) {
        return u[0] * v[0] - u.tail(u.size() - 1).dot(v.tail(v.size() - 1));
    }

    // u0^2 - |u1|^2 in factored form, accurate near the cone boundary
    static double jnorm2(const Eigen::Ref<const Vec>& u) {
        double r = u.tail(u.size() - 1).norm();
        return (u[0] - r) * (u[0] + r);
    }

    Vec identity_e() const {
        Vec e = Vec::Zero(ns_);
        for (const auto& b : blocks_) {
            if (b.soc)
                e[b.soff] = 1.0;
            else
                e.segment(b.soff, b.len).setOnes();
        }
        return e;
    }

    double min_eig(const Vec& u) const {
        double m = std::numeric_limits<double>::infinity();
        for (const auto& b : blocks_) {
            if (b.soc) {
                m = std::min(m, u[b.soff] - u.segment(b.soff + 1, b.len - 1).norm());
            } else {
                m = std::min(m, u.segment(b.soff, b.len).minCoeff());
            }
        }
        return m;
    }

    bool compute_scaling(const Vec& s, const Vec& z) {
        for (std::size_t k = 0; k < blocks_.size(); ++k) {
            const auto& b = blocks_[k];
            if (!b.soc) {
                for (std::size_t i = 0; i < b.len; ++i) {
                    double si = s[b.soff + i], zi = z[b.soff + i];
                    if (!(si > 0.0) || !(zi > 0.0)) return false;
                    scale_.w[b.soff + i] = std::sqrt(si / zi);
                }
                continue;
            }
            auto sb = s.segment(b.soff, b.len);
            auto zb = z.segment(b.soff, b.len);
            double sn = jnorm2(sb), zn = jnorm2(zb);
            if (!(sn > 0.0) || !(zn > 0.0) || sb[0] <= 0.0 || zb[0] <= 0.0) return false;
            sn = std::sqrt(sn);
            zn = std::sqrt(zn);
            Vec sbar = sb / sn, zbar = zb / zn;
            double gamma = std::sqrt((1.0 + sbar.dot(zbar)) / 2.0);
            Vec wbar(b.len);
            wbar[0] = (sbar[0] + zbar[0]) / (2.0 * gamma);
            wbar.tail(b.len - 1) = (sbar.tail(b.len - 1) - zbar.tail(b.len - 1)) / (2.0 * gamma);
            // renormalize against rounding
            double wn = jdot(wbar, wbar);
            if (!(wn > 0.0)) return false;
            wbar /= std::sqrt(wn);
            scale_.w.segment(b.soff, b.len) = wbar;
            scale_.beta[k] = std::sqrt(sn / zn);
        }
        return true;
    }

    // power = 1 (W), -1 (W^-1), 2 (W^2), -2 (W^-2)
    Vec applyW(const Vec& u, int power) const {
        Vec r(ns_);
        for (std::size_t k = 0; k < blocks_.size(); ++k) {
            const auto& b = blocks_[k];
            if (!b.soc) {
                for (std::size_t i = b.soff; i < b.soff + b.len; ++i) {
                    const double w = scale_.w[i];
                    switch (power) {
                        case 1: r[i] = w * u[i]; break;
                        case -1: r[i] = u[i] / w; break;
                        case 2: r[i] = w * w * u[i]; break;
                        default: r[i] = u[i] / (w * w); break;
                    }
                }
                continue;
            }
            auto w = scale_.w.segment(b.soff, b.len);
            auto ub = u.segment(b.soff, b.len);
            auto rb = r.segment(b.soff, b.len);
            double beta = scale_.beta[k];
            const std::size_t L = b.len;
            if (power == 1 || power == -1) {
                double sgn = power == 1 ? 1.0 : -1.0;
                double w0 = w[0];
                auto w1 = w.tail(L - 1);
                auto u1 = ub.tail(L - 1);
                double w1u1 = w1.dot(u1);
                rb[0] = w0 * ub[0] + sgn * w1u1;
                rb.tail(L - 1) = u1 + (sgn * ub[0] + w1u1 / (1.0 + w0)) * w1;
                rb *= power == 1 ? beta : 1.0 / beta;
            } else {
                // W^2 = beta^2 (2 w w' - J),  W^-2 = beta^-2 (2 Jw (Jw)' - J)
                const double sg = power == 2 ? 1.0 : -1.0;
                const double t = 2.0 * (w[0] * ub[0] + sg * w.tail(L - 1).dot(ub.tail(L - 1)));
                const double f = power == 2 ? beta * beta : 1.0 / (beta * beta);
                rb[0] = f * (t * w[0] - ub[0]);
                rb.tail(L - 1) = f * (sg * t * w.tail(L - 1) + ub.tail(L - 1));
            }
        }
        return r;
    }

    Vec arrow(const Vec& u, const Vec& v) const {
        Vec r(ns_);
        for (const auto& b : blocks_) {
            if (!b.soc) {
                r.segment(b.soff, b.len) = u.segment(b.soff, b.len).cwiseProduct(v.segment(b.soff, b.len));
                continue;
            }
            auto ub = u.segment(b.soff, b.len);
            auto vb = v.segment(b.soff, b.len);
            r[b.soff] = ub.dot(vb);
            r.segment(b.soff + 1, b.len - 1) = ub[0] * vb.tail(b.len - 1) + vb[0] * ub.tail(b.len - 1);
        }
        return r;
    }

    // solves lambda o v = psi for v
    Vec arrow_inv(const Vec& lam, const Vec& psi) const {
        Vec r(ns_);
        for (const auto& b : blocks_) {
            if (!b.soc) {
                r.segment(b.soff, b.len) = psi.segment(b.soff, b.len).cwiseQuotient(lam.segment(b.soff, b.len));
                continue;
            }
            auto l = lam.segment(b.soff, b.len);
            auto p = psi.segment(b.soff, b.len);
            double l0 = l[0];
            double det = jdot(l, l);
            double v0 = (l0 * p[0] - l.tail(b.len - 1).dot(p.tail(b.len - 1))) / det;
            r[b.soff] = v0;
            r.segment(b.soff + 1, b.len - 1) = (p.tail(b.len - 1) - v0 * l.tail(b.len - 1)) / l0;
        }
        return r;
    }

    // largest alpha with u + alpha du in K (u interior); +inf if unbounded
    double max_step(const Vec& u, const Vec& du) const {
        double amax = std::numeric_limits<double>::infinity();
        for (const auto& b : blocks_) {
            if (!b.soc) {
                for (std::size_t i = 0; i < b.len; ++i) {
                    double d = du[b.soff + i];
                    if (d < 0.0) amax = std::min(amax, -u[b.soff + i] / d);
                }
                continue;
            }
            auto ub = u.segment(b.soff, b.len);
            auto db = du.segment(b.soff, b.len);
            double a = jdot(db, db);
            double bb = jdot(ub, db);
            double c = std::max(jdot(ub, ub), 0.0);
            double root = std::numeric_limits<double>::infinity();
            double disc = bb * bb - a * c;
            if (a == 0.0) {
                if (bb < 0.0) root = -c / (2.0 * bb);
            } else if (disc >= 0.0) {
                double q = -(bb + std::copysign(std::sqrt(disc), bb));
                double r1 = q / a;
                double r2 = q != 0.0 ? c / q : std::numeric_limits<double>::infinity();
                if (r1 > 0.0) root = std::min(root, r1);
                if (r2 > 0.0) root = std::min(root, r2);
            }
            if (db[0] < 0.0) root = std::min(root, -ub[0] / db[0]);
            amax = std::min(amax, root);
        }
        return amax;
    }

    // ---- reduced KKT ----
    void build_pattern();
    bool factor(bool identity_scaling);
    bool assemble_and_factor(double reg);
    void hmul(const Vec& x, Vec& out) const;
    void solve_reduced(const Vec& rx, const Vec& ry, Vec& ux, Vec& uy) const;
    void solve_kkt(const Vec& bx, const Vec& by, const Vec& bz, Vec& ux, Vec& uy, Vec& uz) const;

    const ConeProgram& p_;
    ConeSolverOptions opt_;
    std::size_t n_ = 0, m_ = 0, ns_ = 0, degree_ = 0;
    std::vector<SBlock> blocks_;
    Vec c_, b_;
    SpMat A_, At_;
    Scaling scale_;
    bool identity_ = false;
    std::vector<Eigen::Triplet<double>> trip_;
    SpMat K_;
    Eigen::SimplicialLDLT<SpMat, Eigen::Lower, Eigen::AMDOrdering<int>> ldlt_;
    bool analyzed_ = false;
    // dense T'W^-2 T blocks stored per cone block (row-major len x len)
    std::vector<std::vector<double>> hblocks_;
    std::vector<double> uh_;
};

inline bool IpmWorkspace::factor(bool identity_scaling) {
    identity_ = identity_scaling;
    if (hblocks_.size() != blocks_.size()) {
        hblocks_.resize(blocks_.size());
        for (std::size_t k = 0; k < blocks_.size(); ++k)
            hblocks_[k].assign(blocks_[k].soc ? blocks_[k].len * blocks_[k].len : blocks_[k].len, 0.0);
    }
    constexpr double h = 0.7071067811865476;  // 1/sqrt2
    for (std::size_t k = 0; k < blocks_.size(); ++k) {
        const auto& b = blocks_[k];
        const std::size_t L = b.len;
        auto& H = hblocks_[k];
        if (!b.soc) {
            for (std::size_t i = 0; i < L; ++i) {
                double w = identity_ ? 1.0 : scale_.w[b.soff + i];
                H[i] = 1.0 / (w * w);
            }
            continue;
        }
        // W^-2 = f (2 v v' - J) with v = J w and f = beta^-2. For rotated
        // slices H = T'W^-2 T = f (2 u u' - T'JT) with u = T'v, formed
        // directly so that w0 - w1 is not lost to cancellation.
        if (identity_) {
            std::fill(H.begin(), H.end(), 0.0);
            for (std::size_t i = 0; i < L; ++i) H[i * L + i] = b.rotated && i >= 2 ? 2.0 : 1.0;
            continue;
        }
        const double* w = scale_.w.data() + b.soff;
        const double f = 1.0 / (scale_.beta[k] * scale_.beta[k]);
        uh_.resize(L);
        if (b.rotated) {
            uh_[0] = h * (w[0] - w[1]);
            uh_[1] = h * (w[0] + w[1]);
            for (std::size_t i = 2; i < L; ++i) uh_[i] = -kSqrt2 * w[i];
        } else {
            uh_[0] = w[0];
            for (std::size_t i = 1; i < L; ++i) uh_[i] = -w[i];
        }
        for (std::size_t i = 0; i < L; ++i)
            for (std::size_t j = 0; j <= i; ++j) H[i * L + j] = H[j * L + i] = 2.0 * f * uh_[i] * uh_[j];
        if (b.rotated) {
            H[1] -= f;
            H[L] -= f;
            for (std::size_t i = 2; i < L; ++i) H[i * L + i] += 2.0 * f;
        } else {
            H[0] -= f;
            for (std::size_t i = 1; i < L; ++i) H[i * L + i] += f;
        }
    }

    // a pivot can break down near the cone boundary; retry with a larger
    // regularization, the refinement in solve_kkt works on the exact system
    for (double reg = opt_.regularization; reg <= 1e-4; reg *= 100.0)
        if (assemble_and_factor(reg)) return true;
    return false;
}

inline bool IpmWorkspace::assemble_and_factor(double reg) {
    trip_.clear();
    const int N = static_cast<int>(n_);
    std::vector<double> diag(n_, reg);
    for (std::size_t k = 0; k < blocks_.size(); ++k) {
        const auto& b = blocks_[k];
        const std::size_t L = b.len;
        if (!b.soc) {
            for (std::size_t i = 0; i < L; ++i) diag[b.xoff + i] += hblocks_[k][i];
            continue;
        }
        for (std::size_t i = 0; i < L; ++i) {
            diag[b.xoff + i] += hblocks_[k][i * L + i];
            for (std::size_t j = 0; j < i; ++j)
                trip_.emplace_back(static_cast<int>(b.xoff + i), static_cast<int>(b.xoff + j), hblocks_[k][i * L + j]);
        }
    }
    for (std::size_t j = 0; j < n_; ++j) trip_.emplace_back(static_cast<int>(j), static_cast<int>(j), diag[j]);
    for (int col = 0; col < A_.outerSize(); ++col)
        for (SpMat::InnerIterator it(A_, col); it; ++it) trip_.emplace_back(N + it.row(), col, it.value());
    for (std::size_t r = 0; r < m_; ++r) trip_.emplace_back(N + static_cast<int>(r), N + static_cast<int>(r), -reg);
    K_.resize(static_cast<int>(n_ + m_), static_cast<int>(n_ + m_));
    K_.setFromTriplets(trip_.begin(), trip_.end());
    if (!analyzed_) {
        ldlt_.analyzePattern(K_);
        analyzed_ = true;
    }
    ldlt_.factorize(K_);
    return ldlt_.info() == Eigen::Success;
}

inline void IpmWorkspace::hmul(const Vec& x, Vec& out) const {
    out = Vec::Zero(n_);
    for (std::size_t k = 0; k < blocks_.size(); ++k) {
        const auto& b = blocks_[k];
        const std::size_t L = b.len;
        if (!b.soc) {
            for (std::size_t i = 0; i < L; ++i) out[b.xoff + i] = hblocks_[k][i] * x[b.xoff + i];
            continue;
        }
        for (std::size_t i = 0; i < L; ++i) {
            double acc = 0.0;
            for (std::size_t j = 0; j < L; ++j) acc += hblocks_[k][i * L + j] * x[b.xoff + j];
            out[b.xoff + i] = acc;
        }
    }
}

inline void IpmWorkspace::solve_reduced(const Vec& rx, const Vec& ry, Vec& ux, Vec& uy) const {
    Vec rhs(n_ + m_);
    rhs << rx, ry;
    Vec sol = ldlt_.solve(rhs);
    ux = sol.head(n_);
    uy = sol.tail(m_);
}

// [0 A' G'; A 0 0; G 0 -W^2] (ux, uy, uz) = (bx, by, bz), G = -T.
// One reduced solve followed by refinement on the full system.
inline void IpmWorkspace::solve_kkt(const Vec& bx, const Vec& by, const Vec& bz, Vec& ux, Vec& uy,
                                    Vec& uz) const {
    auto reduced = [&](const Vec& rx0, const Vec& ry0, const Vec& rz0, Vec& vx, Vec& vy, Vec& vz) {
        Vec winv2 = identity_ ? rz0 : applyW(rz0, -2);
        solve_reduced(rx0 - Tt(winv2), ry0, vx, vy);
        Vec t = T(vx) + rz0;
        vz = identity_ ? Vec(-t) : Vec(-applyW(t, -2));
    };
    reduced(bx, by, bz, ux, uy, uz);
    const double bnorm = std::max({1.0, bx.lpNorm<Eigen::Infinity>(), by.lpNorm<Eigen::Infinity>(),
                                   bz.size() ? bz.lpNorm<Eigen::Infinity>() : 0.0});
    double prev = std::numeric_limits<double>::infinity();
    for (int it = 0; it < opt_.refine_steps; ++it) {
        Vec ex = bx - (At_ * uy - Tt(uz));
        Vec ey = by - A_ * ux;
        Vec w2uz = identity_ ? uz : applyW(uz, 2);
        Vec ez = bz + T(ux) + w2uz;
        double en = std::max({ex.lpNorm<Eigen::Infinity>(), ey.size() ? ey.lpNorm<Eigen::Infinity>() : 0.0,
                              ez.size() ? ez.lpNorm<Eigen::Infinity>() : 0.0});
        if (en <= 1e-14 * bnorm || en >= 0.5 * prev) break;
        prev = en;
        Vec cx, cy, cz;
        reduced(ex, ey, ez, cx, cy, cz);
        ux += cx;
        uy += cy;
        uz += cz;
    }
}

inline ConeSolution IpmWorkspace::run() {
    auto t0 = std::chrono::steady_clock::now();
    ConeSolution sol;
    auto finish = [&](ConeStatus st) {
        sol.status = st;
        sol.solve_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        return sol;
    };

    // initial point from two least-squares style solves with W = I
    if (!factor(true)) return finish(ConeStatus::numerical_failure);
    Vec x, y, z, s, tmp;
    Vec zeros_s = Vec::Zero(ns_);
    solve_kkt(Vec::Zero(n_), b_, zeros_s, x, tmp, z);
    s = -z;  // s = h - Gx = T x
    Vec xd, yd, zd;
    solve_kkt(-c_, Vec::Zero(m_), zeros_s, xd, yd, zd);
    y = yd;
    z = zd;
    const Vec e = identity_e();
    double ts = -min_eig(s), tz = -min_eig(z);
    if (ns_ > 0) {
        if (ts >= -1e-8 * std::max(s.norm(), 1.0)) s += (1.0 + ts) * e;
        if (tz >= -1e-8 * std::max(z.norm(), 1.0)) z += (1.0 + tz) * e;
    }
    double tau = 1.0, kappa = 1.0;

    const double resx0 = std::max(1.0, c_.norm());
    const double resy0 = std::max(1.0, b_.norm());
    const double D = static_cast<double>(degree_);

    double best_score = std::numeric_limits<double>::infinity();
    Vec bx, by, bz, bs;
    double btau = 1.0;
    int stall = 0;

    for (int iter = 0; iter <= opt_.max_iter; ++iter) {
        sol.iterations = iter;
        Vec Tx = T(x);
        Vec rx = At_ * y - Tt(z) + c_ * tau;
        Vec ry = A_ * x - b_ * tau;
        Vec rz = s - Tx;  // Gx + s - h tau
        double cx = c_.dot(x), by_ = b_.dot(y);
        double rtau = kappa + cx + by_;
        double pcost = cx / tau, dcost = -by_ / tau;
        double pres = std::max((ry / tau).norm() / resy0, (rz / tau).norm());
        double dres = (rx / tau).norm() / resx0;
        double gap = s.dot(z) / (tau * tau);
        double scale = std::max(1.0, std::abs(pcost));
        double relgap = std::max(gap, std::abs(pcost - dcost)) / scale;

        double score = std::max({pres, dres, relgap});
        if (score < best_score) {
            best_score = score;
            bx = x / tau;
            by = y / tau;
            bs = s / tau;
            btau = tau;
            sol.primal_residual = pres;
            sol.dual_residual = dres;
            sol.relative_gap = relgap;
            sol.objective = pcost;
            sol.dual_objective = dcost;
        }
        if (std::getenv("CQ_IPM_TRACE"))
            std::fprintf(stderr, "%3d pc=%.10g dc=%.10g pres=%.2e dres=%.2e gap=%.2e tau=%.2e kap=%.2e\n", iter, pcost,
                         dcost, pres, dres, relgap, tau, kappa);
        if (pres <= opt_.feas_tol && dres <= opt_.feas_tol && relgap <= opt_.gap_tol) break;

        // infeasibility certificates
        if (by_ < 0.0) {
            double pinf = (At_ * y - Tt(z)).norm() / resx0 / (-by_);
            if (pinf <= opt_.feas_tol) {
                sol.primal.assign(n_, std::numeric_limits<double>::quiet_NaN());
                sol.dual_eq.assign(m_, 0.0);
                return finish(ConeStatus::infeasible);
            }
        }
        if (cx < 0.0) {
            double dinf = std::max((A_ * x).norm() / resy0, (s - Tx).norm()) / (-cx);
            if (dinf <= opt_.feas_tol) {
                sol.primal.assign(n_, std::numeric_limits<double>::quiet_NaN());
                sol.dual_eq.assign(m_, 0.0);
                return finish(ConeStatus::unbounded);
            }
        }
        if (iter == opt_.max_iter || stall >= 5) break;

        if (!compute_scaling(s, z)) break;
        if (!factor(false)) break;
        Vec lam = applyW(z, 1);
        double mu = (s.dot(z) + tau * kappa) / (D + 1.0);

        Vec u1x, u1y, u1z;
        solve_kkt(-c_, b_, zeros_s, u1x, u1y, u1z);
        double den_base = c_.dot(u1x) + b_.dot(u1y);  // h = 0

        auto newton = [&](double eta, const Vec& psi, double psi_tau, Vec& dx, Vec& dy, Vec& dz, Vec& ds,
                          double& dtau, double& dkappa) {
            Vec q = arrow_inv(lam, psi);
            Vec Wq = applyW(q, 1);
            Vec u0x, u0y, u0z;
            solve_kkt(-eta * rx, -eta * ry, -eta * rz - Wq, u0x, u0y, u0z);
            double num = -eta * rtau - psi_tau / tau - (c_.dot(u0x) + b_.dot(u0y));
            double den = den_base - kappa / tau;
            dtau = num / den;
            dx = u0x + dtau * u1x;
            dy = u0y + dtau * u1y;
            dz = u0z + dtau * u1z;
            // from the primal row rather than Wq - W^2 dz, which cancels badly
            // near the cone boundary
            ds = T(dx) - eta * rz;
            dkappa = (psi_tau - kappa * dtau) / tau;
        };
        auto step_to_boundary = [&](const Vec& ds, const Vec& dz, double dtau, double dkappa) {
            double a = std::numeric_limits<double>::infinity();
            if (ns_ > 0) {
                a = std::min(a, max_step(lam, applyW(ds, -1)));
                a = std::min(a, max_step(lam, applyW(dz, 1)));
            }
            if (dtau < 0.0) a = std::min(a, -tau / dtau);
            if (dkappa < 0.0) a = std::min(a, -kappa / dkappa);
            return a;
        };

        Vec lamlam = arrow(lam, lam);
        Vec dxa, dya, dza, dsa;
        double dtaua = 0.0, dkappaa = 0.0;
        newton(1.0, -lamlam, -tau * kappa, dxa, dya, dza, dsa, dtaua, dkappaa);
        double aaff = std::min(1.0, step_to_boundary(dsa, dza, dtaua, dkappaa));
        double sigma = std::pow(1.0 - aaff, 3);

        Vec corr = arrow(applyW(dsa, -1), applyW(dza, 1));
        Vec psi = -lamlam + sigma * mu * e - corr;
        double psi_tau = -tau * kappa + sigma * mu - dtaua * dkappaa;
        Vec dx, dy, dz, ds;
        double dtau = 0.0, dkappa = 0.0;
        newton(1.0 - sigma, psi, psi_tau, dx, dy, dz, ds, dtau, dkappa);
        double amax = step_to_boundary(ds, dz, dtau, dkappa);
        double alpha = std::min(1.0, opt_.step_factor * amax);
        if (!std::isfinite(alpha) || alpha < 1e-10) {
            ++stall;
            alpha = std::isfinite(alpha) ? alpha : 0.0;
        } else {
            stall = 0;
        }
        x += alpha * dx;
        y += alpha * dy;
        z += alpha * dz;
        s += alpha * ds;
        tau += alpha * dtau;
        kappa += alpha * dkappa;
        if (!(tau > 0.0) || !x.allFinite() || !z.allFinite()) break;
    }

    sol.primal.assign(bx.data(), bx.data() + bx.size());
    // equality multipliers in the sign convention of L = c'x + c0 - y'(Ax - b)
    sol.dual_eq.resize(m_);
    for (std::size_t r = 0; r < m_; ++r) sol.dual_eq[r] = -by[r];
    sol.objective += p_.objective_constant;
    sol.dual_objective += p_.objective_constant;
    (void)btau;
    (void)bs;
    if (sol.primal_residual <= opt_.feas_tol && sol.dual_residual <= opt_.feas_tol &&
        sol.relative_gap <= opt_.gap_tol)
        return finish(ConeStatus::optimal);
    if (sol.primal_residual <= opt_.reduced_tol && sol.dual_residual <= opt_.reduced_tol &&
        sol.relative_gap <= opt_.reduced_tol)
        return finish(ConeStatus::optimal);
    return finish(sol.iterations >= opt_.max_iter ? ConeStatus::max_iter : ConeStatus::numerical_failure);
}

}  // namespace detail

class ReferenceInteriorPoint : public ConeBackend {
public:
    std::string name() const override { return "reference"; }
    ConeSolution solve(const ConeProgram& p, const ConeSolverOptions& opts) const override {
        p.validate();
        detail::IpmWorkspace ws(p, opts);
        return ws.run();
    }
};

/// Backend named by CQDENOISE_CONE_BACKEND (default and only bundled
/// choice: "reference").
inline const ConeBackend& default_cone_backend() {
    static const ReferenceInteriorPoint reference;
    const char* env = std::getenv("CQDENOISE_CONE_BACKEND");
    if (env && *env && std::string(env) != "reference")
        throw InvalidInput("cone backend '" + std::string(env) + "' is not compiled in");
    return reference;
}

inline ConeSolution solve_cone_program(const ConeProgram& p, const ConeSolverOptions& opts) {
    if (!(opts.feas_tol > 0.0 && opts.feas_tol <= 1e-2 && opts.gap_tol > 0.0 && opts.gap_tol <= 1e-2))
        throw InvalidInput("tolerances must lie in (0, 1e-2]");
    return default_cone_backend().solve(p, opts);
}

inline ConeSolution solve_cone_program(const ConeProgram& p, double feas_tol = 1e-8, double gap_tol = 1e-8) {
    ConeSolverOptions o;
    o.feas_tol = feas_tol;
    o.gap_tol = gap_tol;
    return solve_cone_program(p, o);
}

}  // namespace cqdenoise
