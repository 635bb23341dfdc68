#pragma once

// Standard-form conic program, its solution type, a small modeling layer that
// compiles affine cone declarations into contiguous cone slices, and a stable
// text dump.

#include <cstddef>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "cqdenoise/core_model.hpp"

namespace cqdenoise {

/// Cone kinds. `rotated_second_order` over (a, b, v_1..v_k) means
/// a*b >= |v|^2 with a, b >= 0 (no factor 2).
enum class ConeKind { free, nonneg, second_order, rotated_second_order };

inline std::string to_string(ConeKind k) {
    switch (k) {
        case ConeKind::free: return "free";
        case ConeKind::nonneg: return "nonneg";
        case ConeKind::second_order: return "soc";
        case ConeKind::rotated_second_order: return "rsoc";
    }
    return "free";
}

inline ConeKind cone_kind_from_string(const std::string& s) {
    if (s == "free") return ConeKind::free;
    if (s == "nonneg") return ConeKind::nonneg;
    if (s == "soc") return ConeKind::second_order;
    if (s == "rsoc") return ConeKind::rotated_second_order;
    throw InvalidInput("unknown cone kind '" + s + "'");
}

struct ConeBlock {
    ConeKind kind = ConeKind::free;
    std::size_t start = 0;
    std::size_t len = 0;
};

struct SparseEntry {
    std::size_t row = 0;
    std::size_t col = 0;
    double value = 0.0;
};

/// min c'x + c0  s.t.  A x = b,  x in K_1 x ... x K_p
struct ConeProgram {
    std::size_t num_vars = 0;
    std::vector<std::pair<std::size_t, double>> objective;
    double objective_constant = 0.0;
    std::size_t num_eq_rows = 0;
    std::vector<SparseEntry> eq_entries;
    std::vector<double> eq_rhs;
    std::vector<ConeBlock> cones;
    std::vector<std::string> var_names;

    void validate() const {
        std::size_t next = 0;
        for (const auto& c : cones) {
            if (c.start != next) throw InvalidInput("cone blocks must partition the variables in order");
            if (c.kind == ConeKind::second_order && c.len < 2) throw InvalidInput("second-order cone needs len >= 2");
            if (c.kind == ConeKind::rotated_second_order && c.len < 3)
                throw InvalidInput("rotated cone needs len >= 3");
            next += c.len;
        }
        if (next != num_vars) throw InvalidInput("cone blocks do not cover all variables");
        if (eq_rhs.size() != num_eq_rows) throw InvalidInput("eq_rhs size mismatch");
        for (const auto& e : eq_entries)
            if (e.row >= num_eq_rows || e.col >= num_vars) throw InvalidInput("eq entry out of range");
        for (const auto& [j, c] : objective)
            if (j >= num_vars) throw InvalidInput("objective index out of range");
        if (!var_names.empty() && var_names.size() != num_vars) throw InvalidInput("var_names size mismatch");
    }
};

enum class ConeStatus { optimal, infeasible, unbounded, max_iter, numerical_failure };

inline std::string to_string(ConeStatus s) {
    switch (s) {
        case ConeStatus::optimal: return "optimal";
        case ConeStatus::infeasible: return "infeasible";
        case ConeStatus::unbounded: return "unbounded";
        case ConeStatus::max_iter: return "max_iter";
        case ConeStatus::numerical_failure: return "numerical_failure";
    }
    return "numerical_failure";
}

struct ConeSolution {
    std::vector<double> primal;
    std::vector<double> dual_eq;
    double objective = 0.0;
    double dual_objective = 0.0;
    ConeStatus status = ConeStatus::numerical_failure;
    double solve_time = 0.0;
    int iterations = 0;
    double primal_residual = 0.0;
    double dual_residual = 0.0;
    double relative_gap = 0.0;
};

/// Affine expression sum(coef * var) + constant over builder variables.
struct LinExpr {
    std::vector<std::pair<std::size_t, double>> terms;
    double constant = 0.0;

    LinExpr() = default;
    LinExpr(double c) : constant(c) {}  // NOLINT(google-explicit-constructor)
    static LinExpr var(std::size_t v, double coef = 1.0) {
        LinExpr e;
        e.terms.emplace_back(v, coef);
        return e;
    }

    LinExpr& add(std::size_t v, double coef) {
        if (coef != 0.0) terms.emplace_back(v, coef);
        return *this;
    }
    LinExpr& operator+=(const LinExpr& o) {
        terms.insert(terms.end(), o.terms.begin(), o.terms.end());
        constant += o.constant;
        return *this;
    }
    LinExpr& operator*=(double s) {
        for (auto& t : terms) t.second *= s;
        constant *= s;
        return *this;
    }
    friend LinExpr operator+(LinExpr a, const LinExpr& b) { return a += b; }
    friend LinExpr operator-(LinExpr a, LinExpr b) { return a += (b *= -1.0); }
    friend LinExpr operator*(double s, LinExpr a) { return a *= s; }
};

/// Program plus the position of every builder variable inside it.
struct CompiledProgram {
    ConeProgram program;
    std::vector<std::size_t> index;

    double value(const ConeSolution& sol, std::size_t var) const { return sol.primal[index[var]]; }
};

/// Incremental modeling layer. Variables carry a domain; cones are declared
/// over affine expressions. compile() lays variables out as
/// [free][nonneg][cone blocks...] and adds copy variables with equality rows
/// where a cone slot cannot take a variable directly.
class ConeBuilder {
public:
    enum class Domain { free, nonneg };

    std::size_t add_var(Domain d, std::string name = {}) {
        domains_.push_back(d);
        claimed_.push_back(false);
        names_.push_back(std::move(name));
        return domains_.size() - 1;
    }

    std::size_t num_vars() const { return domains_.size(); }
    std::size_t num_rows() const { return rows_.size(); }
    std::size_t num_cones() const { return cones_.size(); }

    void add_objective(std::size_t var, double c) {
        if (c != 0.0) objective_.emplace_back(var, c);
    }
    void add_objective_constant(double c) { constant_ += c; }

    /// expr == rhs; returns the row index.
    std::size_t add_eq(const LinExpr& expr, double rhs) {
        rows_.push_back({expr.terms, rhs - expr.constant});
        return rows_.size() - 1;
    }
    std::size_t add_le(const LinExpr& expr, double rhs) {
        LinExpr e = expr;
        e.add(add_var(Domain::nonneg), 1.0);
        return add_eq(e, rhs);
    }
    std::size_t add_ge(const LinExpr& expr, double rhs) {
        LinExpr e = expr;
        e.add(add_var(Domain::nonneg), -1.0);
        return add_eq(e, rhs);
    }

    /// a*b >= |v|^2, a, b >= 0
    void add_rotated_cone(const LinExpr& a, const LinExpr& b, const std::vector<LinExpr>& v) {
        std::vector<std::size_t> slots{slot(a, true), slot(b, true)};
        for (const auto& e : v) slots.push_back(slot(e, false));
        cones_.push_back({ConeKind::rotated_second_order, std::move(slots)});
    }

    /// t >= |v|
    void add_second_order_cone(const LinExpr& t, const std::vector<LinExpr>& v) {
        std::vector<std::size_t> slots{slot(t, true)};
        for (const auto& e : v) slots.push_back(slot(e, false));
        cones_.push_back({ConeKind::second_order, std::move(slots)});
    }

    CompiledProgram compile() const {
        CompiledProgram out;
        ConeProgram& p = out.program;
        const std::size_t nv = domains_.size();
        out.index.assign(nv, 0);
        std::size_t pos = 0;
        std::size_t nfree = 0, nnn = 0;
        for (std::size_t v = 0; v < nv; ++v)
            if (!claimed_[v] && domains_[v] == Domain::free) out.index[v] = pos++, ++nfree;
        for (std::size_t v = 0; v < nv; ++v)
            if (!claimed_[v] && domains_[v] == Domain::nonneg) out.index[v] = pos++, ++nnn;
        if (nfree) p.cones.push_back({ConeKind::free, 0, nfree});
        if (nnn) p.cones.push_back({ConeKind::nonneg, nfree, nnn});
        for (const auto& c : cones_) {
            p.cones.push_back({c.kind, pos, c.vars.size()});
            for (std::size_t v : c.vars) out.index[v] = pos++;
        }
        p.num_vars = pos;
        p.var_names.resize(pos);
        for (std::size_t v = 0; v < nv; ++v)
            p.var_names[out.index[v]] = names_[v].empty() ? "v" + std::to_string(v) : names_[v];
        for (const auto& [v, c] : objective_) p.objective.emplace_back(out.index[v], c);
        p.objective_constant = constant_;
        p.num_eq_rows = rows_.size();
        p.eq_rhs.reserve(rows_.size());
        for (std::size_t r = 0; r < rows_.size(); ++r) {
            for (const auto& [v, c] : rows_[r].terms) p.eq_entries.push_back({r, out.index[v], c});
            p.eq_rhs.push_back(rows_[r].rhs);
        }
        return out;
    }

private:
    struct Row {
        std::vector<std::pair<std::size_t, double>> terms;
        double rhs;
    };
    struct Cone {
        ConeKind kind;
        std::vector<std::size_t> vars;
    };

    // A slot takes a variable directly when the expression is exactly one
    // unclaimed variable with unit coefficient whose domain the cone implies.
    std::size_t slot(const LinExpr& e, bool nonneg_slot) {
        if (e.terms.size() == 1 && e.constant == 0.0 && e.terms[0].second == 1.0) {
            std::size_t v = e.terms[0].first;
            if (!claimed_[v] && (domains_[v] == Domain::free || nonneg_slot)) {
                claimed_[v] = true;
                return v;
            }
        }
        std::size_t c = add_var(Domain::free);
        claimed_[c] = true;
        LinExpr row = LinExpr::var(c, 1.0) - e;
        add_eq(row, 0.0);
        return c;
    }

    std::vector<Domain> domains_;
    std::vector<bool> claimed_;
    std::vector<std::string> names_;
    std::vector<std::pair<std::size_t, double>> objective_;
    double constant_ = 0.0;
    std::vector<Row> rows_;
    std::vector<Cone> cones_;
};

/// Text dump:
///   cone_program v1
///   vars <N>
///   eqrows <M>
///   objective_constant <c0>
///   obj <K>            followed by K lines "<col> <value>"
///   A <nnz>            followed by nnz lines "<row> <col> <value>"
///   b                  followed by M lines "<value>"
///   cones <P>          followed by P lines "<kind> <start> <len>"
///   names <N|0>        followed by one name per line
inline void dump_cone_program(const ConeProgram& p, std::ostream& os) {
    os << std::setprecision(17);
    os << "cone_program v1\n";
    os << "vars " << p.num_vars << "\n";
    os << "eqrows " << p.num_eq_rows << "\n";
    os << "objective_constant " << p.objective_constant << "\n";
    os << "obj " << p.objective.size() << "\n";
    for (const auto& [j, c] : p.objective) os << j << " " << c << "\n";
    os << "A " << p.eq_entries.size() << "\n";
    for (const auto& e : p.eq_entries) os << e.row << " " << e.col << " " << e.value << "\n";
    os << "b\n";
    for (double v : p.eq_rhs) os << v << "\n";
    os << "cones " << p.cones.size() << "\n";
    for (const auto& c : p.cones) os << to_string(c.kind) << " " << c.start << " " << c.len << "\n";
    os << "names " << p.var_names.size() << "\n";
    for (const auto& n : p.var_names) os << n << "\n";
}

inline ConeProgram read_cone_program(std::istream& is) {
    auto expect = [&](const std::string& word) {
        std::string w;
        if (!(is >> w) || w != word) throw InvalidInput("cone program dump: expected '" + word + "'");
    };
    ConeProgram p;
    expect("cone_program");
    expect("v1");
    expect("vars");
    is >> p.num_vars;
    expect("eqrows");
    is >> p.num_eq_rows;
    expect("objective_constant");
    is >> p.objective_constant;
    std::size_t k = 0;
    expect("obj");
    is >> k;
    p.objective.resize(k);
    for (auto& [j, c] : p.objective) is >> j >> c;
    expect("A");
    is >> k;
    p.eq_entries.resize(k);
    for (auto& e : p.eq_entries) is >> e.row >> e.col >> e.value;
    expect("b");
    p.eq_rhs.resize(p.num_eq_rows);
    for (auto& v : p.eq_rhs) is >> v;
    expect("cones");
    is >> k;
    p.cones.resize(k);
    for (auto& c : p.cones) {
        std::string kind;
        is >> kind >> c.start >> c.len;
        c.kind = cone_kind_from_string(kind);
    }
    expect("names");
    is >> k;
    p.var_names.resize(k);
    for (auto& n : p.var_names) is >> n;
    if (!is) throw InvalidInput("cone program dump: truncated input");
    p.validate();
    return p;
}

}  // namespace cqdenoise
