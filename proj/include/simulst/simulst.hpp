#pragma once

#include "simulst/bleu.hpp"
#include "simulst/io.hpp"
#include "simulst/latency.hpp"
#include "simulst/policy.hpp"
#include "simulst/pre_decision.hpp"
#include "simulst/rational.hpp"
#include "simulst/simulator.hpp"
#include "simulst/stream.hpp"
