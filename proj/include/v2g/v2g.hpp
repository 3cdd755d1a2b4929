#pragma once

#include "v2g/allocation.hpp"
#include "v2g/baselines.hpp"
#include "v2g/battery.hpp"
#include "v2g/config.hpp"
#include "v2g/day.hpp"
#include "v2g/env.hpp"
#include "v2g/envelope.hpp"
#include "v2g/error.hpp"
#include "v2g/fleet.hpp"
#include "v2g/metrics.hpp"
#include "v2g/nn.hpp"
#include "v2g/ppo.hpp"
#include "v2g/profiles.hpp"
#include "v2g/qp.hpp"
#include "v2g/report.hpp"
#include "v2g/rng.hpp"
