#pragma once

#include "rfkit/common.hpp"
#include "rfkit/data.hpp"
#include "rfkit/features.hpp"
#include "rfkit/harness.hpp"
#include "rfkit/io.hpp"
#include "rfkit/selection.hpp"
#include "rfkit/solver.hpp"
#include "rfkit/spectrum.hpp"
