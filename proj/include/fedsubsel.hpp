#pragma once

#include "fedsubsel/client.hpp"
#include "fedsubsel/dataset.hpp"
#include "fedsubsel/engine.hpp"
#include "fedsubsel/error.hpp"
#include "fedsubsel/experiment.hpp"
#include "fedsubsel/idx.hpp"
#include "fedsubsel/metrics.hpp"
#include "fedsubsel/model.hpp"
#include "fedsubsel/objectives.hpp"
#include "fedsubsel/rng.hpp"
#include "fedsubsel/submodular.hpp"
#include "fedsubsel/suites.hpp"
