#pragma once

#include "lininf/error.hpp"
#include "lininf/specfun.hpp"
#include "lininf/transforms.hpp"
#include "lininf/expression.hpp"
#include "lininf/evidence.hpp"
#include "lininf/model.hpp"
#include "lininf/gaussian.hpp"
#include "lininf/solver.hpp"
#include "lininf/oracle.hpp"
#include "lininf/model_io.hpp"
