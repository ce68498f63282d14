#pragma once

#include "inis/additive_selector.hpp"
#include "inis/bench.hpp"
#include "inis/common.hpp"
#include "inis/csv.hpp"
#include "inis/dataset.hpp"
#include "inis/inis_engine.hpp"
#include "inis/marginal_regression.hpp"
#include "inis/model_io.hpp"
#include "inis/parallel.hpp"
#include "inis/plot.hpp"
#include "inis/rng.hpp"
#include "inis/screening.hpp"
#include "inis/sim_suite.hpp"
#include "inis/spline_basis.hpp"
