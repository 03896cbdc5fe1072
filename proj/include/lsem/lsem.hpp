#pragma once

#include "lsem/error.hpp"
#include "lsem/experiments.hpp"
#include "lsem/graph.hpp"
#include "lsem/instances.hpp"
#include "lsem/matrix.hpp"
#include "lsem/random.hpp"
#include "lsem/recovery.hpp"
#include "lsem/scm.hpp"
#include "lsem/serialize.hpp"
#include "lsem/stability.hpp"

namespace lsem {
inline constexpr const char* kVersion = "0.1.0";
}
