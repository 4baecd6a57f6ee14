#pragma once

#include "gazelign/analysis.hpp"
#include "gazelign/attention.hpp"
#include "gazelign/config.hpp"
#include "gazelign/core.hpp"
#include "gazelign/dataset.hpp"
#include "gazelign/error.hpp"
#include "gazelign/fixture.hpp"
#include "gazelign/gaze.hpp"
#include "gazelign/metrics.hpp"
#include "gazelign/pipeline.hpp"
#include "gazelign/report.hpp"
#include "gazelign/util.hpp"
