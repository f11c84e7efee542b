#pragma once

// Umbrella header for the qubit tomography library.

#include "qtomo/qubit.hpp"
#include "qtomo/povm.hpp"
#include "qtomo/sampler.hpp"
#include "qtomo/estimator.hpp"
#include "qtomo/brute_force.hpp"
#include "qtomo/protocol.hpp"
#include "qtomo/theory.hpp"
#include "qtomo/harness.hpp"
#include "qtomo/config.hpp"
#include "qtomo/io.hpp"
