#pragma once

#include "blm/quant/calibration.hpp"
#include "blm/quant/plan.hpp"
#include "blm/quant/quantized_model.hpp"
