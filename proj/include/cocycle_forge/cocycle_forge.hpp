#pragma once

#include "cocycle_forge/errors.hpp"
#include "cocycle_forge/compensated_sum.hpp"
#include "cocycle_forge/isometry.hpp"
#include "cocycle_forge/base_dynamics.hpp"
#include "cocycle_forge/fields.hpp"
#include "cocycle_forge/product.hpp"
#include "cocycle_forge/parallel.hpp"
#include "cocycle_forge/cocycle.hpp"
#include "cocycle_forge/averaging.hpp"
#include "cocycle_forge/hyperbolized_solver.hpp"
#include "cocycle_forge/drift.hpp"
#include "cocycle_forge/oracles.hpp"
#include "cocycle_forge/experiment.hpp"
