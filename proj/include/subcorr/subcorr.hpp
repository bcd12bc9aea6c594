#pragma once

#include "subcorr/analysis.hpp"
#include "subcorr/commands.hpp"
#include "subcorr/config.hpp"
#include "subcorr/decomposition.hpp"
#include "subcorr/errors.hpp"
#include "subcorr/problem.hpp"
#include "subcorr/rng.hpp"
#include "subcorr/solvers.hpp"
#include "subcorr/spectral.hpp"
