#pragma once

#include "baseline.hpp"
#include "calibration.hpp"
#include "errors.hpp"
#include "lattice.hpp"
#include "market.hpp"
#include "market_data.hpp"
#include "normal.hpp"
#include "parallel.hpp"
#include "rng.hpp"
#include "series.hpp"
#include "skew_params.hpp"
#include "skew_stats.hpp"
#include "skew_walk.hpp"
#include "stats.hpp"
