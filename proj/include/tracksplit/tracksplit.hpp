#pragma once

#include "tracksplit/core.hpp"
#include "tracksplit/operator_core.hpp"
#include "tracksplit/prox.hpp"
#include "tracksplit/problems.hpp"
#include "tracksplit/trace.hpp"
#include "tracksplit/inner_solvers.hpp"
#include "tracksplit/adjoint_solvers.hpp"
#include "tracksplit/tracking.hpp"
#include "tracksplit/outer_methods.hpp"
#include "tracksplit/diagnostics.hpp"
