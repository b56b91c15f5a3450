#pragma once

#include "analysis.hpp"
#include "basis.hpp"
#include "chebyshev.hpp"
#include "checkpoint.hpp"
#include "config.hpp"
#include "dense.hpp"
#include "error.hpp"
#include "gpb.hpp"
#include "harness.hpp"
#include "io.hpp"
#include "lanczos.hpp"
#include "model.hpp"
#include "parallel.hpp"
#include "random.hpp"
#include "scaling.hpp"
#include "sparse_operator.hpp"
#include "time_series.hpp"
#include "typicality.hpp"
