#pragma once

#include "blowup_lab/error.hpp"
#include "blowup_lab/geometry.hpp"
#include "blowup_lab/linalg.hpp"
#include "blowup_lab/operator.hpp"
#include "blowup_lab/eigen.hpp"
#include "blowup_lab/solve.hpp"
#include "blowup_lab/continuation.hpp"
#include "blowup_lab/estimates.hpp"
