#pragma once

#include "blm/node/queue.hpp"
#include "blm/node/replay.hpp"
#include "blm/node/service.hpp"
#include "blm/node/stats.hpp"
#include "blm/node/udp.hpp"
#include "blm/node/wire.hpp"
