#pragma once

#include "mapcx/active.hpp"
#include "mapcx/adapt.hpp"
#include "mapcx/capacity.hpp"
#include "mapcx/dataset.hpp"
#include "mapcx/error.hpp"
#include "mapcx/harness.hpp"
#include "mapcx/learner.hpp"
#include "mapcx/parallel.hpp"
#include "mapcx/prior.hpp"
#include "mapcx/random.hpp"
