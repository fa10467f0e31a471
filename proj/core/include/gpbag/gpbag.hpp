#pragma once

// Umbrella header.

#include "gpbag/dataset.hpp"
#include "gpbag/ensemble.hpp"
#include "gpbag/errors.hpp"
#include "gpbag/experiment.hpp"
#include "gpbag/gp.hpp"
#include "gpbag/io.hpp"
#include "gpbag/kernels.hpp"
#include "gpbag/optimize.hpp"
#include "gpbag/rng.hpp"
#include "gpbag/sizing.hpp"
#include "gpbag/version.hpp"
