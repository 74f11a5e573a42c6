#pragma once

#include "blm/nn/descriptor.hpp"
#include "blm/nn/infer.hpp"
#include "blm/nn/model.hpp"
#include "blm/nn/reference_models.hpp"
#include "blm/nn/sigmoid.hpp"
