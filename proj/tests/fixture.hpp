#pragma once

// A converged density on a moderate grid, solved once per test binary.

#include "qslab/fixpoint_solver.hpp"

namespace fixture {

inline qslab::SolverConfig moderate_config() {
    qslab::SolverConfig c;
    c.n_points = 1025;
    c.coarsen = 4;
    return c;
}

inline const qslab::DensityGrid& converged() {
    static const qslab::DensityGrid g = qslab::solve(moderate_config());
    return g;
}

}  // namespace fixture
