#pragma once

#include "goalgrid/config.hpp"
#include "goalgrid/coupling.hpp"
#include "goalgrid/error.hpp"
#include "goalgrid/grid.hpp"
#include "goalgrid/hamiltonian.hpp"
#include "goalgrid/io.hpp"
#include "goalgrid/model.hpp"
#include "goalgrid/oracle.hpp"
#include "goalgrid/parallel.hpp"
#include "goalgrid/pipeline.hpp"
#include "goalgrid/regions.hpp"
#include "goalgrid/simulate.hpp"
#include "goalgrid/solver.hpp"
#include "goalgrid/stepper.hpp"
