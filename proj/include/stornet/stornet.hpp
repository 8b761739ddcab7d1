#pragma once

#include "stornet/cost.hpp"
#include "stornet/errors.hpp"
#include "stornet/lp.hpp"
#include "stornet/network.hpp"
#include "stornet/online.hpp"
#include "stornet/planner.hpp"
#include "stornet/policies.hpp"
#include "stornet/rng.hpp"
#include "stornet/runner.hpp"
#include "stornet/scenario_io.hpp"
#include "stornet/simulate.hpp"
#include "stornet/stochastic.hpp"
#include "stornet/storage.hpp"
