#pragma once

#include "fedl/checkpoint.hpp"
#include "fedl/data.hpp"
#include "fedl/fd.hpp"
#include "fedl/math.hpp"
#include "fedl/metrics.hpp"
#include "fedl/network.hpp"
#include "fedl/objective.hpp"
#include "fedl/oracles.hpp"
#include "fedl/random.hpp"
#include "fedl/trainer.hpp"
#include "fedl/uncertainty.hpp"
