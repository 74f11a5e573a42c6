#pragma once

#include "blm/bridge.hpp"
#include "blm/error.hpp"
#include "blm/fxp.hpp"
#include "blm/nn.hpp"
#include "blm/node.hpp"
#include "blm/perf.hpp"
#include "blm/quant.hpp"
#include "blm/workbench.hpp"
