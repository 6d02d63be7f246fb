// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "capacity.hpp"
#include "channel.hpp"
#include "config_json.hpp"
#include "csv.hpp"
#include "error.hpp"
#include "experiments.hpp"
#include "linalg.hpp"
#include "loaded_network.hpp"
#include "monte_carlo.hpp"
#include "nport_json.hpp"
#include "optimizer.hpp"
#include "parallel.hpp"
#include "port_model.hpp"
#include "quadrature.hpp"
#include "rng.hpp"
