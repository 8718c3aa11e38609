#pragma once

// Umbrella header.

#include "peekstat/ay.hpp"
#include "peekstat/distribution.hpp"
#include "peekstat/dominance.hpp"
#include "peekstat/error.hpp"
#include "peekstat/extrema.hpp"
#include "peekstat/harness.hpp"
#include "peekstat/invariants.hpp"
#include "peekstat/json_io.hpp"
#include "peekstat/martingale.hpp"
#include "peekstat/potential.hpp"
#include "peekstat/random.hpp"
#include "peekstat/report.hpp"
#include "peekstat/studies.hpp"
