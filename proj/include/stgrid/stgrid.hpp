#pragma once

#include "stgrid/autoencoder.hpp"
#include "stgrid/checkpoint.hpp"
#include "stgrid/commands.hpp"
#include "stgrid/config.hpp"
#include "stgrid/dqn.hpp"
#include "stgrid/environment.hpp"
#include "stgrid/errors.hpp"
#include "stgrid/filter.hpp"
#include "stgrid/grid.hpp"
#include "stgrid/maps.hpp"
#include "stgrid/metrics.hpp"
#include "stgrid/nn.hpp"
#include "stgrid/orchestrator.hpp"
#include "stgrid/parallel.hpp"
#include "stgrid/pgm.hpp"
#include "stgrid/planner.hpp"
#include "stgrid/replay.hpp"
#include "stgrid/rng.hpp"
#include "stgrid/schedule.hpp"
