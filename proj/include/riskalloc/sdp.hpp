#pragma once

#include <Eigen/Dense>

#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

// Conic-program construction and solution: linear objective, affine
// equalities, nonnegative-orthant and PSD cone constraints, solved by a
// primal-dual interior-point method with Nesterov-Todd scaling.

namespace riskalloc::sdp {

using VarId = int;

// Sparse affine expression  constant + sum_i coeff_i * x_i.
struct LinExpr {
    double constant = 0.0;
    std::vector<std::pair<VarId, double>> terms;

    LinExpr() = default;
    /* implicit */ LinExpr(double c) : constant(c) {}
    static LinExpr variable(VarId v, double coeff = 1.0) {
        LinExpr e;
        e.terms.emplace_back(v, coeff);
        return e;
    }

    LinExpr& add(VarId v, double coeff);
    LinExpr& operator+=(const LinExpr& other);
    LinExpr& operator*=(double s);
    // Merge duplicate variables, drop zero coefficients.
    void normalize();
    bool empty() const { return terms.empty(); }
};

LinExpr operator+(LinExpr a, const LinExpr& b);
LinExpr operator-(LinExpr a, const LinExpr& b);
LinExpr operator*(double s, LinExpr e);

// Symmetric matrix of affine expressions. Entries are kept symmetric:
// writing (r,c) writes (c,r) as well.
class MatExpr {
  public:
    explicit MatExpr(int dim) : dim_(dim), cells_(dim * dim) {}

    int dim() const { return dim_; }
    const LinExpr& operator()(int r, int c) const { return cells_[r * dim_ + c]; }
    void set(int r, int c, LinExpr e);
    void add(int r, int c, const LinExpr& e);

    // expr += coeff * M  for a constant symmetric matrix M
    void add_constant(const Eigen::MatrixXd& M, double coeff = 1.0);
    // expr += x_v * M
    void add_term(VarId v, const Eigen::MatrixXd& M, double coeff = 1.0);

    static MatExpr constant(const Eigen::MatrixXd& M);

  private:
    int dim_;
    std::vector<LinExpr> cells_;
};

// Symmetric matrix decision variable: a grid of scalar variables with
// shared off-diagonal entries.
struct SymmetricVar {
    int dim = 0;
    std::vector<VarId> ids;  // row-major upper triangle expanded to full grid

    VarId operator()(int r, int c) const { return ids[r * dim + c]; }
    // X as an affine matrix expression
    MatExpr expr() const;
    Eigen::MatrixXd value(const std::vector<double>& x) const;
};

// Strict inequalities realized with an absolute margin:  E > 0  becomes
// E - margin*I >= 0 (PSD case) resp. e - margin >= 0 (scalar case).
MatExpr strictify(MatExpr e, double margin);
LinExpr strictify(LinExpr e, double margin);

class ConicProgram {
  public:
    VarId add_variable(const std::string& name);
    std::vector<VarId> add_variables(const std::string& prefix, int n);
    SymmetricVar add_symmetric(const std::string& prefix, int dim);

    void minimize(LinExpr objective);

    // expr >= 0 elementwise on the PSD cone / the real line
    void add_psd(const MatExpr& e);
    void add_nonneg(LinExpr e);
    void add_equality(LinExpr e);

    int num_variables() const { return static_cast<int>(names_.size()); }
    const std::string& variable_name(VarId v) const { return names_[v]; }

    // Plain-text sparse-triplet dump (variable table, then constraint
    // blocks); parse() restores an equivalent program.
    void dump(std::ostream& os) const;
    static ConicProgram parse(std::istream& is);

  private:
    friend struct CompiledProgram;

    struct PsdBlock {
        int dim;
        // (var, r, c, value) with var = -1 for the constant part; r <= c.
        std::vector<std::tuple<VarId, int, int, double>> triplets;
    };

    std::vector<std::string> names_;
    LinExpr objective_;
    std::vector<PsdBlock> psd_blocks_;
    std::vector<LinExpr> nonneg_;
    std::vector<LinExpr> equalities_;
};

enum class SolveStatus { optimal, infeasible, unbounded, numerical_failure };

const char* to_string(SolveStatus s);

struct SolveStats {
    int iterations = 0;
    double wall_seconds = 0.0;
    double primal_residual = 0.0;   // max block residual of S = F(x)
    double dual_residual = 0.0;     // stationarity residual
    double complementarity = 0.0;   // sum <S_j, Y_j>
    double relative_gap = 0.0;
};

struct SolveOutcome {
    SolveStatus status = SolveStatus::numerical_failure;
    double objective = 0.0;
    // Assignments present iff status == optimal (indexed by VarId).
    std::vector<double> x;
    SolveStats stats;

    bool optimal() const { return status == SolveStatus::optimal; }
};

struct SolveOptions {
    double tol = 1e-8;
    int max_iterations = 120;
    bool verbose = false;
};

SolveOutcome solve(const ConicProgram& program, const SolveOptions& options = {});

}  // namespace riskalloc::sdp
