#pragma once

#include "cqdenoise/core_model.hpp"
#include "cqdenoise/cone_program.hpp"
#include "cqdenoise/cone_solver.hpp"
#include "cqdenoise/pairwise_hull.hpp"
#include "cqdenoise/relaxation.hpp"
#include "cqdenoise/cutting_surface.hpp"
#include "cqdenoise/exact.hpp"
#include "cqdenoise/lagrangian.hpp"
#include "cqdenoise/data_pipeline.hpp"
#include "cqdenoise/io.hpp"
