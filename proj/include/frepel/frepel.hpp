#pragma once

// Umbrella header: exact fBm path sampling, mollified self-intersection
// local time, Gibbs-weighted estimators, mean-field analytics, and the
// scaling experiment layer.

#include "frepel/errors.hpp"
#include "frepel/fbm.hpp"
#include "frepel/flory.hpp"
#include "frepel/gibbs.hpp"
#include "frepel/local_time.hpp"
#include "frepel/report_io.hpp"
#include "frepel/rng.hpp"
#include "frepel/scaling.hpp"
#include "frepel/version.hpp"
