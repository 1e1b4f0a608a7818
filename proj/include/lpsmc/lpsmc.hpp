// lpsmc.hpp
// Umbrella header for the Laplacian-P-splines mixture cure library.

#pragma once

#include "lpsmc/csv.hpp"
#include "lpsmc/data.hpp"
#include "lpsmc/errors.hpp"
#include "lpsmc/fit_io.hpp"
#include "lpsmc/intervals.hpp"
#include "lpsmc/kaplan_meier.hpp"
#include "lpsmc/laplace.hpp"
#include "lpsmc/model.hpp"
#include "lpsmc/numeric.hpp"
#include "lpsmc/rng.hpp"
#include "lpsmc/simulation.hpp"
#include "lpsmc/splines.hpp"
