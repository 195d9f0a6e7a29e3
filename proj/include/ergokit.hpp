#pragma once

// Umbrella header for the numerical library. The config-driven experiment
// runner lives in ergokit/experiments.hpp and additionally needs nlohmann/json.

#include "ergokit/bernstein.hpp"
#include "ergokit/drift.hpp"
#include "ergokit/errors.hpp"
#include "ergokit/estimator.hpp"
#include "ergokit/expr.hpp"
#include "ergokit/grid.hpp"
#include "ergokit/kernelgrid.hpp"
#include "ergokit/model.hpp"
#include "ergokit/norms.hpp"
#include "ergokit/parallel.hpp"
#include "ergokit/quadrature.hpp"
#include "ergokit/random.hpp"
#include "ergokit/semigroup.hpp"
#include "ergokit/simulate.hpp"
#include "ergokit/valuefn.hpp"
#include "ergokit/weight.hpp"
