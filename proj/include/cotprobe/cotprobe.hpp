#pragma once

// Umbrella header. remote_judge.hpp is left out because it pulls in the
// HTTP client; include it directly where needed.

#include "cotprobe/dataset.hpp"
#include "cotprobe/early_exit.hpp"
#include "cotprobe/embedding.hpp"
#include "cotprobe/error.hpp"
#include "cotprobe/judge.hpp"
#include "cotprobe/metrics.hpp"
#include "cotprobe/probe.hpp"
#include "cotprobe/random.hpp"
#include "cotprobe/storage.hpp"
#include "cotprobe/trace.hpp"
#include "cotprobe/trace_parser.hpp"
#include "cotprobe/train.hpp"
