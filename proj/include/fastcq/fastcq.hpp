#pragma once

#include "fastcq/cq_reference.hpp"
#include "fastcq/errors.hpp"
#include "fastcq/fast_conv.hpp"
#include "fastcq/gauss.hpp"
#include "fastcq/kernel.hpp"
#include "fastcq/quad_plan.hpp"
#include "fastcq/runge_kutta.hpp"
#include "fastcq/solvers.hpp"
#include "fastcq/special.hpp"
