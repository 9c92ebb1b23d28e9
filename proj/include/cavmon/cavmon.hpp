#pragma once

#include "cavmon/error.hpp"
#include "cavmon/events.hpp"
#include "cavmon/indicators.hpp"
#include "cavmon/netsim.hpp"
#include "cavmon/sampling.hpp"
#include "cavmon/stats.hpp"
#include "cavmon/synth.hpp"
#include "cavmon/telemetry.hpp"
#include "cavmon/tradeoff.hpp"
