#pragma once

#include "sqcflow/core.hpp"
#include "sqcflow/sampling.hpp"
#include "sqcflow/catalog.hpp"
#include "sqcflow/verify.hpp"
#include "sqcflow/flows.hpp"
#include "sqcflow/solvers.hpp"
#include "sqcflow/estimate.hpp"
#include "sqcflow/io.hpp"
#include "sqcflow/experiment.hpp"
#include "sqcflow/bench.hpp"
