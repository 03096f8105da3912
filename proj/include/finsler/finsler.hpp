#pragma once

// Umbrella header for the whole engine.

#include "finsler/connections.hpp"
#include "finsler/derive.hpp"
#include "finsler/electrodynamics.hpp"
#include "finsler/errors.hpp"
#include "finsler/expr.hpp"
#include "finsler/geodesics.hpp"
#include "finsler/jet.hpp"
#include "finsler/linalg.hpp"
#include "finsler/report.hpp"
#include "finsler/sampler.hpp"
#include "finsler/structure.hpp"
#include "finsler/version.hpp"
