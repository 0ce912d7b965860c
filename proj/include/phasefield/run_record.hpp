#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "phasefield/grid.hpp"
#include "phasefield/models.hpp"

namespace phasefield {

// One accepted step.  lemma_margin is the slack in the per-step energy
// inequality; the stepper leaves it NaN unless an observer fills it.
struct RunRow {
    long step = 0;
    double time = 0.0;
    double energy = 0.0;
    double mass = 0.0;
    double linf = 0.0;
    double diff_l2 = 0.0;
    double residual = 0.0;
    double lemma_margin = 0.0;
};

struct RunParams {
    ModelKind model = ModelKind::CahnHilliard;
    double nu = 0.0;
    int N = 0;
    int M = 0;
    Cutoff cutoff = Cutoff::EuclideanBall;
    double tau = 0.0;
    double A = 0.0;
    std::optional<double> beta;
    double s_op = 1.0;
    std::optional<std::uint64_t> seed;
};

struct RunRecord {
    RunParams params;
    double initial_energy = 0.0;
    double initial_mass = 0.0;
    double initial_linf = 0.0;
    std::vector<RunRow> rows;
    bool diverged = false;
    long divergence_step = -1;
};

}  // namespace phasefield
