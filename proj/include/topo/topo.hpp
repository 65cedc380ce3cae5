#pragma once

#include "topo/continuation.hpp"
#include "topo/eigensolver.hpp"
#include "topo/fea.hpp"
#include "topo/linear_solver.hpp"
#include "topo/mesh.hpp"
#include "topo/mma.hpp"
#include "topo/optimize.hpp"
#include "topo/problems.hpp"
#include "topo/runner.hpp"
#include "topo/threefield.hpp"
