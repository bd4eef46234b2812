#pragma once

#include "groomrisk/annotations.hpp"
#include "groomrisk/config.hpp"
#include "groomrisk/error.hpp"
#include "groomrisk/evaluation.hpp"
#include "groomrisk/features.hpp"
#include "groomrisk/fuzzy.hpp"
#include "groomrisk/model_io.hpp"
#include "groomrisk/random.hpp"
#include "groomrisk/regressor.hpp"
#include "groomrisk/synthgen.hpp"
