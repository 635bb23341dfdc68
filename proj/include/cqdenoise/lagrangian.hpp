#pragma once

// Block Lagrangian decomposition for chain instances with a regularized
// objective: the links between consecutive blocks are dualized and the
// multipliers updated by subgradient ascent with step 1/h.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "cqdenoise/cutting_surface.hpp"
#include "cqdenoise/exact.hpp"

namespace cqdenoise {

struct BlockPartition {
    std::size_t n = 0;
    // starts[j] is the first index of block j; starts.back() == n
    std::vector<std::size_t> starts;

    std::size_t m() const { return starts.size() - 1; }
    std::size_t begin(std::size_t j) const { return starts[j]; }
    std::size_t end(std::size_t j) const { return starts[j + 1]; }

    /// Blocks start at j * floor(n / m); the last block takes the remainder.
    static BlockPartition uniform(std::size_t n, std::size_t m) {
        if (m == 0 || m > n) throw InvalidInput("block count must lie in [1, n]");
        BlockPartition p;
        p.n = n;
        const std::size_t w = n / m;
        for (std::size_t j = 0; j < m; ++j) p.starts.push_back(j * w);
        p.starts.push_back(n);
        return p;
    }
};

struct LagrangianConfig {
    double eps_stop = 1e-3;
    int h_max = 100;
    unsigned workers = 1;
    bool skipping = true;
    // boundary entries below this count as zero in the subgradient; the
    // interior point solver never returns an exact zero
    double boundary_zero_tol = 1e-6;
    CuttingSurfaceConfig block;
    std::string log_path;
};

struct BlockResult {
    double objective = 0.0;
    std::vector<double> x, z;
    SolveStatus status = SolveStatus::numerical_failure;
    int cuts = 0;
    std::vector<CutSpec> pool;
};

/// Multipliers and bookkeeping of the ascent. gamma[j] prices the link
/// between the last entry of block j and the first entry of block j + 1.
struct DualState {
    std::vector<double> gamma;
    int h = 0;
    std::vector<double> xi;
    std::vector<BlockResult> blocks;
};

struct LagrangianIteration {
    int h = 0;
    double dual = 0.0;
    double xi_inf = 0.0;
    int blocks_solved = 0;
};

struct LagrangianRun {
    SolveReport report;
    std::vector<LagrangianIteration> log;
    std::vector<std::vector<double>> gamma_trajectory;
    std::vector<double> dual_values;
    int initial_solves = 0;
    int resolves = 0;
    DualState state;
};

class BlockSolveError : public std::runtime_error {
public:
    BlockSolveError(std::size_t block, SolveStatus st)
        : std::runtime_error("block " + std::to_string(block) + " failed: " + to_string(st)), block_(block),
          status_(st) {}
    std::size_t block() const { return block_; }
    SolveStatus status() const { return status_; }

private:
    std::size_t block_;
    SolveStatus status_;
};

/// Solves the decomp relaxation of block j with the multiplier terms on its
/// boundary entries: -gamma[j-1] on the first, +gamma[j] on the last.
/// `warm` seeds the master with cuts from an earlier solve of the block.
inline BlockResult eval_block(const ProblemInstance& inst, const BlockPartition& part, std::size_t j,
                              const std::vector<double>& gamma, const CuttingSurfaceConfig& cfg = {},
                              const std::vector<CutSpec>& warm = {}) {
    if (j >= part.m()) throw InvalidInput("block index out of range");
    const std::size_t b = part.begin(j), e = part.end(j);
    std::vector<double> y(inst.signal.values().begin() + static_cast<std::ptrdiff_t>(b),
                          inst.signal.values().begin() + static_cast<std::ptrdiff_t>(e));
    auto sub = build_instance(Signal(std::move(y)), AdjacencyGraph::chain(e - b), inst.lambda, inst.priors, inst.bigM);
    sub.extra_linear.assign(e - b, 0.0);
    if (!inst.extra_linear.empty())
        for (std::size_t i = b; i < e; ++i) sub.extra_linear[i - b] = inst.extra_linear[i];
    if (j > 0) sub.extra_linear.front() -= gamma[j - 1];
    if (j + 1 < part.m()) sub.extra_linear.back() += gamma[j];
    auto run = run_decomp(sub, cfg, warm);
    auto& rep = run.report;
    BlockResult r;
    r.status = rep.status;
    r.objective = rep.objective;
    r.x = std::move(rep.x_star);
    r.z = std::move(rep.z_star);
    r.cuts = rep.cuts_added;
    r.pool = std::move(run.pool);
    return r;
}

namespace detail {

// Sum of block objectives minus the closed-form coupling terms.
inline double dual_value(const std::vector<BlockResult>& blocks, const std::vector<double>& gamma, double lambda) {
    double v = 0.0;
    for (const auto& b : blocks) v += b.objective;
    for (double g : gamma) v -= g * g / (4.0 * lambda);
    return v;
}

inline std::vector<double> subgradient(const std::vector<BlockResult>& blocks, const std::vector<double>& gamma,
                                       double lambda, double zero_tol = 0.0) {
    auto snap = [zero_tol](double v) { return std::abs(v) < zero_tol ? 0.0 : v; };
    std::vector<double> xi(gamma.size());
    for (std::size_t j = 0; j < gamma.size(); ++j)
        xi[j] = -gamma[j] / (2.0 * lambda) + (snap(blocks[j].x.back()) - snap(blocks[j + 1].x.front()));
    return xi;
}

}  // namespace detail

/// Dual function at gamma (all blocks solved); used by the tests.
inline double lagrangian_dual(const ProblemInstance& inst, const BlockPartition& part, const std::vector<double>& gamma,
                              const CuttingSurfaceConfig& cfg = {}) {
    std::vector<BlockResult> blocks;
    for (std::size_t j = 0; j < part.m(); ++j) blocks.push_back(eval_block(inst, part, j, gamma, cfg));
    return detail::dual_value(blocks, gamma, inst.lambda);
}

/// Subgradient ascent on the multipliers, starting from gamma = 0. Blocks
/// whose two boundary multipliers are unchanged are taken from the cache when
/// skipping is enabled. The first solve of a block only collects its cuts; the
/// block is then solved again from that frozen pool, as is every later solve,
/// so a block result depends only on its two multipliers and skipping cannot
/// change the trajectory. Reports the best dual value as the lower bound.
inline LagrangianRun run_subgradient(const ProblemInstance& inst, std::size_t m, const LagrangianConfig& cfg = {}) {
    if (!inst.graph.is_chain()) throw InvalidInput("the Lagrangian method needs a chain graph");
    if (inst.priors.kind != PriorKind::regularized && inst.priors.kind != PriorKind::none)
        throw InvalidInput("the Lagrangian method needs regularized priors");
    if (m > 1 && !(inst.lambda > 0.0)) throw InvalidInput("the Lagrangian method needs lambda > 0 when m > 1");
    const auto t0 = std::chrono::steady_clock::now();
    const auto part = BlockPartition::uniform(inst.size(), m);
    LagrangianRun run;
    auto& st = run.state;
    st.gamma.assign(m - 1, 0.0);
    st.blocks.resize(m);
    std::vector<std::map<std::pair<double, double>, BlockResult>> cache(m);
    std::vector<bool> have(m, false);
    std::vector<std::vector<CutSpec>> pools(m);
    double best = -std::numeric_limits<double>::infinity();
    std::vector<double> best_x, best_z;

    auto key_of = [&](std::size_t j) {
        return std::make_pair(j > 0 ? st.gamma[j - 1] : 0.0, j + 1 < m ? st.gamma[j] : 0.0);
    };

    for (int h = 1;; ++h) {
        st.h = h;
        // blocks to solve at this multiplier
        std::vector<std::size_t> todo;
        for (std::size_t j = 0; j < m; ++j) {
            if (cfg.skipping) {
                auto it = cache[j].find(key_of(j));
                if (it != cache[j].end()) {
                    st.blocks[j] = it->second;
                    continue;
                }
            }
            todo.push_back(j);
        }
        std::vector<BlockResult> solved(todo.size());
        std::vector<std::exception_ptr> errors(todo.size());
        std::atomic<std::size_t> next{0};
        auto worker = [&] {
            for (std::size_t t = next++; t < todo.size(); t = next++) {
                try {
                    const std::size_t j = todo[t];
                    if (!have[j]) pools[j] = eval_block(inst, part, j, st.gamma, cfg.block).pool;
                    solved[t] = eval_block(inst, part, j, st.gamma, cfg.block, pools[j]);
                } catch (...) {
                    errors[t] = std::current_exception();
                }
            }
        };
        const unsigned nw = std::max(1u, std::min<unsigned>(cfg.workers, static_cast<unsigned>(todo.size())));
        std::vector<std::thread> pool;
        for (unsigned w = 1; w < nw; ++w) pool.emplace_back(worker);
        worker();
        for (auto& th : pool) th.join();
        for (std::size_t t = 0; t < todo.size(); ++t) {
            if (errors[t]) std::rethrow_exception(errors[t]);
            const std::size_t j = todo[t];
            if (solved[t].status != SolveStatus::optimal && solved[t].status != SolveStatus::iteration_limit)
                throw BlockSolveError(j, solved[t].status);
            (have[j] ? run.resolves : run.initial_solves) += 1;
            have[j] = true;
            if (cfg.skipping) cache[j][key_of(j)] = solved[t];
            st.blocks[j] = std::move(solved[t]);
        }

        const double dual = detail::dual_value(st.blocks, st.gamma, m > 1 ? inst.lambda : 1.0);
        st.xi = detail::subgradient(st.blocks, st.gamma, inst.lambda, cfg.boundary_zero_tol);
        double xi_inf = 0.0;
        for (double v : st.xi) xi_inf = std::max(xi_inf, std::abs(v));
        run.log.push_back({h, dual, xi_inf, static_cast<int>(todo.size())});
        run.dual_values.push_back(dual);
        run.gamma_trajectory.push_back(st.gamma);
        if (dual > best) {
            best = dual;
            best_x.clear();
            best_z.clear();
            for (const auto& b : st.blocks) {
                best_x.insert(best_x.end(), b.x.begin(), b.x.end());
                best_z.insert(best_z.end(), b.z.begin(), b.z.end());
            }
        }
        if (xi_inf < cfg.eps_stop) {
            run.report.status = SolveStatus::optimal;
            break;
        }
        if (h >= cfg.h_max) {
            run.report.status = SolveStatus::iteration_limit;
            break;
        }
        for (std::size_t j = 0; j < st.gamma.size(); ++j) st.gamma[j] += st.xi[j] / static_cast<double>(h);
    }

    auto& rep = run.report;
    rep.objective = best;
    rep.x_star = std::move(best_x);
    rep.z_star = std::move(best_z);
    rep.iterations = static_cast<int>(run.log.size()) - 1;
    for (const auto& b : st.blocks) rep.cuts_added += b.cuts;
    // primal bound: drop entries under the nonzero threshold
    std::vector<double> xb(rep.x_star.size()), zb(rep.x_star.size());
    for (std::size_t i = 0; i < xb.size(); ++i) {
        xb[i] = rep.x_star[i] > kNonzeroThreshold ? rep.x_star[i] : 0.0;
        zb[i] = xb[i] > 0.0 ? 1.0 : 0.0;
    }
    rep.rounded_objective = miqo_objective(inst, xb, zb);
    rep.gap_percent = optimality_gap(*rep.rounded_objective, rep.objective);
    rep.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    if (!cfg.log_path.empty()) {
        std::ofstream out(cfg.log_path);
        if (!out) throw InvalidInput("cannot write iteration log '" + cfg.log_path + "'");
        out.precision(12);
        out << "h,dual,xi_inf,blocks_solved\n";
        for (const auto& it : run.log) out << it.h << ',' << it.dual << ',' << it.xi_inf << ',' << it.blocks_solved << '\n';
    }
    return run;
}

}  // namespace cqdenoise
