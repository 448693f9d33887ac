#pragma once

#include "riskalloc/sdp.hpp"

#include <Eigen/Dense>

#include <vector>

namespace riskalloc::sdp {

// Program after equality elimination, compacted to free variables and
// per-block coefficient data for the interior-point core.
struct CompiledProgram {
    struct Entry {
        int r, c;       // r <= c
        double value;
    };
    struct BlockVar {
        int var;        // free-variable index
        std::vector<Entry> entries;
    };
    struct Block {
        int dim = 0;
        Eigen::MatrixXd constant;      // F_j0
        std::vector<BlockVar> vars;    // F_ji, sparse symmetric triplets
    };

    int num_free = 0;
    Eigen::VectorXd c;                 // objective over free variables
    double objective_offset = 0.0;
    std::vector<Block> blocks;

    // Mapping back to original variables: x_orig = shift + basis * x_free,
    // stored sparsely per original variable.
    struct Recover {
        double shift = 0.0;
        std::vector<std::pair<int, double>> terms;  // over free indices
    };
    std::vector<Recover> recover;

    // Presolve verdicts
    bool trivially_infeasible = false;

    static CompiledProgram compile(const ConicProgram& p);
};

}  // namespace riskalloc::sdp
