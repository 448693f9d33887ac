#include "riskalloc/sdp.hpp"
#include "sdp_compiled.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

namespace riskalloc::sdp {

LinExpr& LinExpr::add(VarId v, double coeff) {
    terms.emplace_back(v, coeff);
    return *this;
}

LinExpr& LinExpr::operator+=(const LinExpr& other) {
    constant += other.constant;
    terms.insert(terms.end(), other.terms.begin(), other.terms.end());
    return *this;
}

LinExpr& LinExpr::operator*=(double s) {
    constant *= s;
    for (auto& t : terms) t.second *= s;
    return *this;
}

void LinExpr::normalize() {
    std::sort(terms.begin(), terms.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    std::vector<std::pair<VarId, double>> merged;
    for (const auto& [v, c] : terms) {
        if (!merged.empty() && merged.back().first == v)
            merged.back().second += c;
        else
            merged.emplace_back(v, c);
    }
    merged.erase(std::remove_if(merged.begin(), merged.end(),
                                [](const auto& t) { return t.second == 0.0; }),
                 merged.end());
    terms = std::move(merged);
}

LinExpr operator+(LinExpr a, const LinExpr& b) {
    a += b;
    return a;
}

LinExpr operator-(LinExpr a, const LinExpr& b) {
    LinExpr nb = b;
    nb *= -1.0;
    a += nb;
    return a;
}

LinExpr operator*(double s, LinExpr e) {
    e *= s;
    return e;
}

void MatExpr::set(int r, int c, LinExpr e) {
    cells_[r * dim_ + c] = e;
    if (r != c) cells_[c * dim_ + r] = std::move(e);
}

void MatExpr::add(int r, int c, const LinExpr& e) {
    cells_[r * dim_ + c] += e;
    if (r != c) cells_[c * dim_ + r] += e;
}

void MatExpr::add_constant(const Eigen::MatrixXd& M, double coeff) {
    for (int r = 0; r < dim_; ++r)
        for (int c = r; c < dim_; ++c) {
            double v = 0.5 * (M(r, c) + M(c, r)) * coeff;
            if (v != 0.0) add(r, c, LinExpr(v));
        }
}

void MatExpr::add_term(VarId v, const Eigen::MatrixXd& M, double coeff) {
    for (int r = 0; r < dim_; ++r)
        for (int c = r; c < dim_; ++c) {
            double m = 0.5 * (M(r, c) + M(c, r)) * coeff;
            if (m != 0.0) add(r, c, LinExpr::variable(v, m));
        }
}

MatExpr MatExpr::constant(const Eigen::MatrixXd& M) {
    MatExpr e(static_cast<int>(M.rows()));
    e.add_constant(M);
    return e;
}

MatExpr SymmetricVar::expr() const {
    MatExpr e(dim);
    for (int r = 0; r < dim; ++r)
        for (int c = r; c < dim; ++c) e.add(r, c, LinExpr::variable((*this)(r, c)));
    return e;
}

Eigen::MatrixXd SymmetricVar::value(const std::vector<double>& x) const {
    Eigen::MatrixXd M(dim, dim);
    for (int r = 0; r < dim; ++r)
        for (int c = 0; c < dim; ++c) M(r, c) = x[(*this)(r, c)];
    return M;
}

MatExpr strictify(MatExpr e, double margin) {
    if (margin <= 0.0) throw std::invalid_argument("strictify: margin must be positive");
    for (int i = 0; i < e.dim(); ++i) e.add(i, i, LinExpr(-margin));
    return e;
}

LinExpr strictify(LinExpr e, double margin) {
    if (margin <= 0.0) throw std::invalid_argument("strictify: margin must be positive");
    e.constant -= margin;
    return e;
}

VarId ConicProgram::add_variable(const std::string& name) {
    names_.push_back(name);
    return static_cast<VarId>(names_.size()) - 1;
}

std::vector<VarId> ConicProgram::add_variables(const std::string& prefix, int n) {
    std::vector<VarId> ids(n);
    for (int i = 0; i < n; ++i) ids[i] = add_variable(prefix + "[" + std::to_string(i) + "]");
    return ids;
}

SymmetricVar ConicProgram::add_symmetric(const std::string& prefix, int dim) {
    SymmetricVar s;
    s.dim = dim;
    s.ids.assign(dim * dim, -1);
    for (int r = 0; r < dim; ++r)
        for (int c = r; c < dim; ++c) {
            VarId v = add_variable(prefix + "(" + std::to_string(r) + "," + std::to_string(c) + ")");
            s.ids[r * dim + c] = v;
            s.ids[c * dim + r] = v;
        }
    return s;
}

void ConicProgram::minimize(LinExpr objective) {
    objective.normalize();
    objective_ = std::move(objective);
}

void ConicProgram::add_psd(const MatExpr& e) {
    PsdBlock b;
    b.dim = e.dim();
    for (int r = 0; r < b.dim; ++r)
        for (int c = r; c < b.dim; ++c) {
            LinExpr cell = e(r, c);
            cell.normalize();
            if (cell.constant != 0.0) b.triplets.emplace_back(-1, r, c, cell.constant);
            for (const auto& [v, coef] : cell.terms) b.triplets.emplace_back(v, r, c, coef);
        }
    psd_blocks_.push_back(std::move(b));
}

void ConicProgram::add_nonneg(LinExpr e) {
    e.normalize();
    nonneg_.push_back(std::move(e));
}

void ConicProgram::add_equality(LinExpr e) {
    e.normalize();
    equalities_.push_back(std::move(e));
}

const char* to_string(SolveStatus s) {
    switch (s) {
        case SolveStatus::optimal: return "optimal";
        case SolveStatus::infeasible: return "infeasible";
        case SolveStatus::unbounded: return "unbounded";
        case SolveStatus::numerical_failure: return "numerical_failure";
    }
    return "unknown";
}

// ---------------------------------------------------------------------------
// dump / parse

namespace {

void dump_expr(std::ostream& os, const LinExpr& e) {
    os << e.constant << ' ' << e.terms.size();
    for (const auto& [v, c] : e.terms) os << ' ' << v << ' ' << c;
}

LinExpr parse_expr(std::istream& is) {
    LinExpr e;
    size_t n = 0;
    is >> e.constant >> n;
    for (size_t i = 0; i < n; ++i) {
        VarId v;
        double c;
        is >> v >> c;
        e.terms.emplace_back(v, c);
    }
    return e;
}

}  // namespace

void ConicProgram::dump(std::ostream& os) const {
    os.precision(17);
    os << "sdp-dump v1\n";
    os << "vars " << names_.size() << '\n';
    for (size_t i = 0; i < names_.size(); ++i) os << "v " << i << ' ' << names_[i] << '\n';
    os << "obj ";
    dump_expr(os, objective_);
    os << '\n';
    for (const auto& b : psd_blocks_) {
        os << "psd " << b.dim << ' ' << b.triplets.size() << '\n';
        for (const auto& [v, r, c, val] : b.triplets)
            os << "t " << v << ' ' << r << ' ' << c << ' ' << val << '\n';
    }
    for (const auto& e : nonneg_) {
        os << "nonneg ";
        dump_expr(os, e);
        os << '\n';
    }
    for (const auto& e : equalities_) {
        os << "eq ";
        dump_expr(os, e);
        os << '\n';
    }
    os << "end\n";
}

ConicProgram ConicProgram::parse(std::istream& is) {
    ConicProgram p;
    std::string header, version;
    is >> header >> version;
    if (header != "sdp-dump" || version != "v1")
        throw std::runtime_error("sdp: unrecognized dump header");
    std::string tok;
    while (is >> tok) {
        if (tok == "vars") {
            size_t n;
            is >> n;
            p.names_.resize(n);
        } else if (tok == "v") {
            size_t i;
            is >> i;
            is >> p.names_.at(i);
        } else if (tok == "obj") {
            p.objective_ = parse_expr(is);
        } else if (tok == "psd") {
            PsdBlock b;
            size_t ntrip;
            is >> b.dim >> ntrip;
            for (size_t i = 0; i < ntrip; ++i) {
                std::string t;
                VarId v;
                int r, c;
                double val;
                is >> t >> v >> r >> c >> val;
                b.triplets.emplace_back(v, r, c, val);
            }
            p.psd_blocks_.push_back(std::move(b));
        } else if (tok == "nonneg") {
            p.nonneg_.push_back(parse_expr(is));
        } else if (tok == "eq") {
            p.equalities_.push_back(parse_expr(is));
        } else if (tok == "end") {
            return p;
        } else {
            throw std::runtime_error("sdp: unexpected token '" + tok + "' in dump");
        }
    }
    throw std::runtime_error("sdp: truncated dump");
}

// ---------------------------------------------------------------------------
// compile: equality elimination + compaction

CompiledProgram CompiledProgram::compile(const ConicProgram& p) {
    const int n = p.num_variables();
    CompiledProgram cp;

    // Eliminate equalities by Gaussian substitution. sub[v] holds the
    // expression replacing v over not-yet-eliminated variables.
    std::vector<bool> eliminated(n, false);
    std::vector<LinExpr> sub(n);
    std::vector<int> elim_order;

    double scale = 1.0;
    for (const auto& e : p.equalities_)
        for (const auto& [v, c] : e.terms) scale = std::max(scale, std::abs(c));

    auto expand = [&](LinExpr e) {
        // Substitute eliminated variables until only free ones remain.
        for (bool changed = true; changed;) {
            changed = false;
            LinExpr out;
            out.constant = e.constant;
            for (const auto& [v, c] : e.terms) {
                if (eliminated[v]) {
                    LinExpr s = sub[v];
                    s *= c;
                    out += s;
                    changed = true;
                } else {
                    out.add(v, c);
                }
            }
            out.normalize();
            e = std::move(out);
        }
        return e;
    };

    for (const auto& raw : p.equalities_) {
        LinExpr e = expand(raw);
        if (e.terms.empty()) {
            if (std::abs(e.constant) > 1e-9 * scale) cp.trivially_infeasible = true;
            continue;
        }
        auto pivot = std::max_element(e.terms.begin(), e.terms.end(),
                                      [](const auto& a, const auto& b) {
                                          return std::abs(a.second) < std::abs(b.second);
                                      });
        VarId pv = pivot->first;
        double pc = pivot->second;
        LinExpr rhs;
        rhs.constant = -e.constant / pc;
        for (const auto& [v, c] : e.terms)
            if (v != pv) rhs.add(v, -c / pc);
        rhs.normalize();
        eliminated[pv] = true;
        sub[pv] = std::move(rhs);
        elim_order.push_back(pv);
    }

    // Resolve substitutions to free-variable form (later eliminations may
    // appear inside earlier substitution expressions).
    for (auto it = elim_order.rbegin(); it != elim_order.rend(); ++it) sub[*it] = expand(sub[*it]);

    std::vector<int> free_index(n, -1);
    for (int v = 0; v < n; ++v)
        if (!eliminated[v]) free_index[v] = cp.num_free++;

    cp.recover.resize(n);
    for (int v = 0; v < n; ++v) {
        if (!eliminated[v]) {
            cp.recover[v].terms.emplace_back(free_index[v], 1.0);
        } else {
            cp.recover[v].shift = sub[v].constant;
            for (const auto& [w, c] : sub[v].terms) cp.recover[v].terms.emplace_back(free_index[w], c);
        }
    }

    auto to_free = [&](const LinExpr& raw) {
        LinExpr e = expand(raw);
        LinExpr out;
        out.constant = e.constant;
        for (const auto& [v, c] : e.terms) out.add(free_index[v], c);
        out.normalize();
        return out;
    };

    LinExpr obj = to_free(p.objective_);
    cp.c = Eigen::VectorXd::Zero(cp.num_free);
    cp.objective_offset = obj.constant;
    for (const auto& [v, c] : obj.terms) cp.c[v] += c;

    auto add_block = [&](int dim,
                         const std::vector<std::tuple<VarId, int, int, double>>& triplets) {
        Block b;
        b.dim = dim;
        b.constant = Eigen::MatrixXd::Zero(dim, dim);
        std::map<int, std::map<std::pair<int, int>, double>> per_var;
        auto put = [&](int var, int r, int c, double val) {
            if (var < 0) {
                b.constant(r, c) += val;
                if (r != c) b.constant(c, r) += val;
            } else {
                per_var[var][{r, c}] += val;
            }
        };
        for (const auto& [v, r, c, val] : triplets) {
            if (v < 0) {
                put(-1, r, c, val);
                continue;
            }
            const auto& rec = cp.recover[v];
            if (rec.shift != 0.0) put(-1, r, c, rec.shift * val);
            for (const auto& [fv, fc] : rec.terms) put(fv, r, c, fc * val);
        }
        for (auto& [var, cells] : per_var) {
            BlockVar bv;
            bv.var = var;
            for (const auto& [rc, val] : cells)
                if (val != 0.0) bv.entries.push_back({rc.first, rc.second, val});
            if (!bv.entries.empty()) b.vars.push_back(std::move(bv));
        }
        cp.blocks.push_back(std::move(b));
    };

    for (const auto& blk : p.psd_blocks_) add_block(blk.dim, blk.triplets);
    for (const auto& e : p.nonneg_) {
        LinExpr fe = to_free(e);
        std::vector<std::tuple<VarId, int, int, double>> trip;
        if (fe.constant != 0.0) trip.emplace_back(-1, 0, 0, fe.constant);
        for (const auto& [v, c] : fe.terms) trip.emplace_back(v, 0, 0, c);
        // already in free form; bypass recover mapping by building directly
        Block b;
        b.dim = 1;
        b.constant = Eigen::MatrixXd::Zero(1, 1);
        b.constant(0, 0) = fe.constant;
        for (const auto& [v, c] : fe.terms) {
            BlockVar bv;
            bv.var = v;
            bv.entries.push_back({0, 0, c});
            b.vars.push_back(std::move(bv));
        }
        cp.blocks.push_back(std::move(b));
    }

    // Constant blocks decide feasibility on their own.
    for (auto& b : cp.blocks) {
        if (!b.vars.empty()) continue;
        if (b.dim == 1) {
            if (b.constant(0, 0) < -1e-9) cp.trivially_infeasible = true;
        } else {
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(b.constant);
            if (es.eigenvalues().minCoeff() < -1e-12 * std::max(1.0, b.constant.norm()))
                cp.trivially_infeasible = true;
        }
    }

    return cp;
}

}  // namespace riskalloc::sdp
