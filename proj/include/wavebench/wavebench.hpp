#pragma once

#include "wavebench/cfm.hpp"
#include "wavebench/controllers.hpp"
#include "wavebench/energy.hpp"
#include "wavebench/energy_io.hpp"
#include "wavebench/error.hpp"
#include "wavebench/format.hpp"
#include "wavebench/kpi.hpp"
#include "wavebench/leaderboard.hpp"
#include "wavebench/nnls.hpp"
#include "wavebench/noise.hpp"
#include "wavebench/scenario.hpp"
#include "wavebench/sim.hpp"
#include "wavebench/stability.hpp"
#include "wavebench/suite.hpp"
#include "wavebench/surrogate.hpp"
#include "wavebench/trajectory_io.hpp"
#include "wavebench/tsd.hpp"
