#pragma once

// Umbrella header: pairwise comparative assessment of candidate texts.
//
// comparisons flow judge -> plan -> records -> (debias) -> ranks -> metrics;
// pipeline.hpp wires the stages together behind RunConfig.

#include "pairrank/cache.hpp"
#include "pairrank/common.hpp"
#include "pairrank/core.hpp"
#include "pairrank/dataset.hpp"
#include "pairrank/debias.hpp"
#include "pairrank/errors.hpp"
#include "pairrank/judge.hpp"
#include "pairrank/metrics.hpp"
#include "pairrank/pipeline.hpp"
#include "pairrank/prompt.hpp"
#include "pairrank/ranking.hpp"
#include "pairrank/remote_judge.hpp"
#include "pairrank/report.hpp"
#include "pairrank/scheduler.hpp"
