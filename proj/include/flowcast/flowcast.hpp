#pragma once

#include "flowcast/adam.hpp"
#include "flowcast/bundle.hpp"
#include "flowcast/clustering.hpp"
#include "flowcast/commands.hpp"
#include "flowcast/config.hpp"
#include "flowcast/encoding.hpp"
#include "flowcast/eventlog.hpp"
#include "flowcast/gru.hpp"
#include "flowcast/harness.hpp"
#include "flowcast/onehot.hpp"
#include "flowcast/stats.hpp"
