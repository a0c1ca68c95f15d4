#ifndef EGW_EGW_HPP
#define EGW_EGW_HPP

#include "egw/benchmark.hpp"
#include "egw/cost.hpp"
#include "egw/debias.hpp"
#include "egw/hessian.hpp"
#include "egw/measure.hpp"
#include "egw/measure_io.hpp"
#include "egw/objective.hpp"
#include "egw/report_io.hpp"
#include "egw/sinkhorn.hpp"
#include "egw/solver.hpp"
#include "egw/types.hpp"

#endif  // EGW_EGW_HPP
