// Command-line front end: generate synthetic instances, denoise with one of
// the relaxations, or run the block Lagrangian method.
//
// Exit codes: 0 optimal, 2 iteration limit, 3 infeasible, 4 numerical
// failure, 64 usage error (bad flags, unreadable or invalid input).

#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "cqdenoise/cqdenoise.hpp"

namespace fs = std::filesystem;
using namespace cqdenoise;

namespace {

constexpr int kUsage = 64;

int exit_code(SolveStatus s) {
    switch (s) {
        case SolveStatus::optimal: return 0;
        case SolveStatus::iteration_limit: return 2;
        case SolveStatus::infeasible: return 3;
        case SolveStatus::numerical_failure: return 4;
    }
    return 4;
}

struct GenerateArgs {
    std::size_t n = 1000, spikes = 10, spike_len = 10;
    double sigma = 0.5, lambda = 0.3;
    std::uint64_t seed = 1;
    std::string out;
};

struct PriorArgs {
    std::optional<std::size_t> k, spikes, spike_len;
    std::optional<double> mu0, kappa, mu1;

    bool any() const { return k || spikes || spike_len || mu0 || kappa || mu1; }

    // flags replace the priors stored in the instance
    SparsityPriors apply(SparsityPriors base) const {
        if (!any()) return base;
        if (spike_len && !spikes) throw InvalidInput("--spike-len needs --spikes");
        SparsityPriors p;
        if (spikes) {
            if (!k) throw InvalidInput("--spikes needs --k");
            p = SparsityPriors::spikes(*k, *spikes, spike_len.value_or(1));
        } else if (k) {
            p = SparsityPriors::cardinality(*k);
        } else if (mu0 || kappa) {
            p = SparsityPriors::regularized(mu0.value_or(0.0));
        }
        p.mu0 = mu0.value_or(p.mu0);
        p.kappa = kappa.value_or(0.0);
        p.mu1 = mu1.value_or(0.0);
        return p;
    }
};

struct InputArgs {
    std::string instance, signal;
    bool header = false;
    std::optional<double> lambda;
    PriorArgs priors;

    InstanceBundle load() const {
        InstanceBundle b;
        if (!instance.empty() == !signal.empty()) throw InvalidInput("give exactly one of --instance and --signal");
        if (!instance.empty()) {
            b = read_instance(instance);
        } else {
            b.y = read_signal_csv(signal, header).values();
        }
        if (lambda) b.lambda = *lambda;
        b.priors = priors.apply(b.priors);
        return b;
    }
};

void add_input_flags(CLI::App* cmd, InputArgs& a) {
    cmd->add_option("--instance", a.instance, "instance JSON file");
    cmd->add_option("--signal", a.signal, "signal CSV, one value per line");
    cmd->add_flag("--header", a.header, "the signal CSV starts with a header line");
    cmd->add_option("--lambda", a.lambda, "smoothness weight")->check(CLI::NonNegativeNumber);
    cmd->add_option("--k", a.priors.k, "cardinality bound");
    cmd->add_option("--mu0", a.priors.mu0, "l0 penalty")->check(CLI::NonNegativeNumber);
    cmd->add_option("--kappa", a.priors.kappa, "extra l0 penalty")->check(CLI::NonNegativeNumber);
    cmd->add_option("--mu1", a.priors.mu1, "l1 shrinkage")->check(CLI::NonNegativeNumber);
    cmd->add_option("--spikes", a.priors.spikes, "number of spikes (with --k)");
    cmd->add_option("--spike-len", a.priors.spike_len, "minimum spike length")->check(CLI::PositiveNumber);
}

int cmd_generate(const GenerateArgs& a) {
    SyntheticConfig cfg;
    cfg.n = a.n;
    cfg.s = a.spikes;
    cfg.h = a.spike_len;
    cfg.sigma = a.sigma;
    cfg.seed = a.seed;
    const auto y_true = gen_true_signal(cfg);
    const auto noisy = add_noise_and_scale(y_true, cfg.sigma, noise_seed(cfg.seed));
    InstanceBundle b;
    b.y = noisy.y;
    b.y_true = noisy.y_true;
    b.lambda = a.lambda;
    b.priors = SparsityPriors::cardinality(std::min(cfg.n, cfg.s * cfg.h));
    b.seed = cfg.seed;
    fs::create_directories(a.out);
    const fs::path dir(a.out);
    write_instance((dir / "instance.json").string(), b);
    write_text((dir / "signal.csv").string(), signal_csv(noisy.y));
    write_text((dir / "true_signal.csv").string(), signal_csv(noisy.y_true));
    return 0;
}

struct DenoiseArgs {
    InputArgs in;
    std::string method = "decomp";
    std::optional<std::size_t> round_k;
    std::string report, results, trace;
    int max_rounds = 200;
};

void emit_report(const json& j, const std::string& path) {
    if (path.empty() || path == "-")
        std::cout << j.dump(2) << '\n';
    else
        write_text(path, j.dump(2) + "\n");
}

int cmd_denoise(const DenoiseArgs& a) {
    const auto b = a.in.load();
    const auto inst = b.instance();
    CuttingSurfaceConfig cfg;
    cfg.max_rounds = a.max_rounds;
    cfg.trace_path = a.trace;
    auto rep = solve_relaxation(inst, relaxation_kind_from_string(a.method), cfg);
    if (a.round_k && !rep.x_star.empty()) attach_rounding(rep, inst, *a.round_k);
    auto j = report_to_json(rep);
    j["method"] = a.method;
    if (b.y_true && rep.x_star.size() == b.y_true->size()) {
        const auto m = metrics(rep.x_star, *b.y_true, b.y);
        j["metrics"] = {{"error", m.error ? json(*m.error) : json(nullptr)},
                        {"snr", m.snr ? json(*m.snr) : json(nullptr)},
                        {"false_pos", m.false_pos},
                        {"false_neg", m.false_neg},
                        {"sparsity_mismatch", m.sparsity_mismatch}};
    }
    emit_report(j, a.report);
    if (!a.results.empty()) write_text(a.results, results_csv(b.y, rep));
    return exit_code(rep.status);
}

struct LagrangianArgs {
    InputArgs in;
    std::size_t blocks = 1;
    double eps = 1e-3;
    int h_max = 100;
    unsigned workers = 1;
    bool no_skip = false;
    std::string report, log;
};

int cmd_lagrangian(const LagrangianArgs& a) {
    auto b = a.in.load();
    if (b.priors.kind == PriorKind::none) b.priors.kind = PriorKind::regularized;
    const auto inst = b.instance();
    LagrangianConfig cfg;
    cfg.eps_stop = a.eps;
    cfg.h_max = a.h_max;
    cfg.workers = a.workers;
    cfg.skipping = !a.no_skip;
    cfg.log_path = a.log;
    const auto run = run_subgradient(inst, a.blocks, cfg);
    auto j = report_to_json(run.report);
    j["method"] = "lagrangian";
    j["blocks"] = a.blocks;
    j["dual_bound"] = run.report.objective;
    j["primal_value"] = run.report.rounded_objective ? json(*run.report.rounded_objective) : json(nullptr);
    j["initial_solves"] = run.initial_solves;
    j["resolves"] = run.resolves;
    json counts = json::array();
    for (const auto& it : run.log) counts.push_back(it.blocks_solved);
    j["subproblems_per_iteration"] = counts;
    emit_report(j, a.report);
    return exit_code(run.report.status);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Sparse nonnegative signal denoising with conic relaxations"};
    app.require_subcommand(1);

    GenerateArgs gen;
    auto* g = app.add_subcommand("generate", "write a synthetic spike instance");
    g->add_option("--n", gen.n, "signal length")->check(CLI::PositiveNumber);
    g->add_option("--spikes", gen.spikes, "number of spikes");
    g->add_option("--spike-len", gen.spike_len, "spike length")->check(CLI::PositiveNumber);
    g->add_option("--sigma", gen.sigma, "noise standard deviation")->check(CLI::NonNegativeNumber);
    g->add_option("--lambda", gen.lambda, "smoothness weight stored in the instance")->check(CLI::NonNegativeNumber);
    g->add_option("--seed", gen.seed, "random seed");
    g->add_option("--out", gen.out, "output directory")->required();

    DenoiseArgs den;
    auto* d = app.add_subcommand("denoise", "solve one relaxation and report");
    add_input_flags(d, den.in);
    d->add_option("--method", den.method, "relaxation")
        ->check(CLI::IsMember({"l1", "persp", "pairwise", "decomp"}));
    d->add_option("--round-k", den.round_k, "keep the k largest entries for the primal bound");
    d->add_option("--max-rounds", den.max_rounds, "cutting-surface round limit")->check(CLI::PositiveNumber);
    d->add_option("--report", den.report, "report JSON path (default stdout)");
    d->add_option("--results", den.results, "CSV of i, y, x, z");
    d->add_option("--trace", den.trace, "per-round CSV trace (decomp)");
    unsigned ignored_workers = 1;
    d->add_option("--workers", ignored_workers, "accepted for symmetry; denoise is single-threaded");

    LagrangianArgs lag;
    auto* l = app.add_subcommand("lagrangian", "block Lagrangian decomposition on a chain");
    add_input_flags(l, lag.in);
    l->add_option("--blocks", lag.blocks, "number of blocks")->check(CLI::PositiveNumber);
    l->add_option("--eps", lag.eps, "stop when the subgradient norm drops below this")->check(CLI::PositiveNumber);
    l->add_option("--h-max", lag.h_max, "iteration limit")->check(CLI::PositiveNumber);
    l->add_option("--workers", lag.workers, "parallel block solves")->check(CLI::PositiveNumber);
    l->add_flag("--no-skip", lag.no_skip, "re-solve blocks whose multipliers did not change");
    l->add_option("--report", lag.report, "report JSON path (default stdout)");
    l->add_option("--log", lag.log, "iteration log CSV");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);
        app.exit(e);
        return kUsage;
    }

    try {
        if (*g) return cmd_generate(gen);
        if (*d) return cmd_denoise(den);
        if (*l) return cmd_lagrangian(lag);
    } catch (const InvalidInput& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kUsage;
    } catch (const BlockSolveError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_code(e.status());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 4;
    }
    return kUsage;
}
