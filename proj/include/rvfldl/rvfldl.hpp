#pragma once

#include "rvfldl/enhance.hpp"
#include "rvfldl/errors.hpp"
#include "rvfldl/horseshoe.hpp"
#include "rvfldl/io.hpp"
#include "rvfldl/linalg.hpp"
#include "rvfldl/metrics.hpp"
#include "rvfldl/model_io.hpp"
#include "rvfldl/random.hpp"
#include "rvfldl/solver.hpp"
#include "rvfldl/svc.hpp"
#include "rvfldl/training.hpp"
