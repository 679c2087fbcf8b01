#pragma once

// Regularized modal regression over sample-dependent kernel spaces.

#include "error.hpp"
#include "harness.hpp"
#include "io.hpp"
#include "kernels.hpp"
#include "markov.hpp"
#include "numeric.hpp"
#include "risk.hpp"
#include "robustness.hpp"
#include "solver.hpp"

namespace modalmr {

inline constexpr const char* version = "0.1.0";

} // namespace modalmr
