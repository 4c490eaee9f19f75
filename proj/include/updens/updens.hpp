#pragma once

#include "benchmark.hpp"
#include "error.hpp"
#include "estimators.hpp"
#include "input_model.hpp"
#include "kde.hpp"
#include "levenberg_marquardt.hpp"
#include "network.hpp"
#include "random.hpp"
#include "real_data.hpp"
#include "simulation.hpp"
#include "surrogate.hpp"
#include "test_functions.hpp"
