#pragma once

// Stochastic wavefunction simulator for thermal collision models: trajectory
// unraveling, Monte Carlo partial trace, and convergence checks against the
// exact density-matrix collision map.

#include "qcollide/engine.hpp"
#include "qcollide/experiment.hpp"
#include "qcollide/operators.hpp"
#include "qcollide/ptrace.hpp"
#include "qcollide/rng.hpp"
#include "qcollide/sampling.hpp"
#include "qcollide/state.hpp"
#include "qcollide/types.hpp"
