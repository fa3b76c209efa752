#pragma once

#include "cointel/error.hpp"
#include "cointel/rng.hpp"
#include "cointel/sim.hpp"
#include "cointel/moments.hpp"
#include "cointel/mvc.hpp"
#include "cointel/net.hpp"
#include "cointel/dgm.hpp"
#include "cointel/backtest.hpp"
#include "cointel/bandml.hpp"
#include "cointel/experiment.hpp"
