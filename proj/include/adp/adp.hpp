#pragma once

#include "adp/types.hpp"
#include "adp/grid.hpp"
#include "adp/expr.hpp"
#include "adp/model.hpp"
#include "adp/backup.hpp"
#include "adp/verify.hpp"
#include "adp/solve.hpp"
#include "adp/bench.hpp"
#include "adp/report.hpp"
