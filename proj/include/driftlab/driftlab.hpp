#pragma once

#include "driftlab/csv.hpp"
#include "driftlab/errors.hpp"
#include "driftlab/estimators.hpp"
#include "driftlab/filtering.hpp"
#include "driftlab/monte_carlo.hpp"
#include "driftlab/philox.hpp"
#include "driftlab/process_sim.hpp"
#include "driftlab/risk_engine.hpp"
#include "driftlab/sine_synthesis.hpp"
