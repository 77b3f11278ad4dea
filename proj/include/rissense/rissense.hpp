#pragma once

#include "rissense/types.hpp"
#include "rissense/instrumentation.hpp"
#include "rissense/channel_model.hpp"
#include "rissense/solvers.hpp"
#include "rissense/sensitivity.hpp"
#include "rissense/config.hpp"
#include "rissense/records.hpp"
#include "rissense/harness.hpp"
#include "rissense/plot_script.hpp"
