#pragma once

// Umbrella header. oracle.hpp pulls in Eigen and io.hpp needs OpenSSL; both
// are included here, so link the tensorank target rather than just adding
// the include path.

#include "tensorank/chain.hpp"
#include "tensorank/ctucker.hpp"
#include "tensorank/error.hpp"
#include "tensorank/expansion.hpp"
#include "tensorank/graph.hpp"
#include "tensorank/hitting_set.hpp"
#include "tensorank/io.hpp"
#include "tensorank/loglinear.hpp"
#include "tensorank/oracle.hpp"
#include "tensorank/partition.hpp"
#include "tensorank/random.hpp"
#include "tensorank/rank_bounds.hpp"
#include "tensorank/reference_models.hpp"
#include "tensorank/scheme.hpp"
#include "tensorank/studies.hpp"
#include "tensorank/summary.hpp"
#include "tensorank/tensor.hpp"
