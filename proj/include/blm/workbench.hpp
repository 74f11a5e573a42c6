#pragma once

#include "blm/workbench/decision.hpp"
#include "blm/workbench/frames_io.hpp"
#include "blm/workbench/metrics.hpp"
#include "blm/workbench/report.hpp"
#include "blm/workbench/synth.hpp"
