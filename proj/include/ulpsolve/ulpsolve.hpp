#pragma once

#include "fp_lattice.hpp"
#include "formula.hpp"
#include "normalize.hpp"
#include "smtlib.hpp"
#include "linalg.hpp"
#include "objectives.hpp"
#include "optimizer.hpp"
#include "engine.hpp"
#include "bench.hpp"
