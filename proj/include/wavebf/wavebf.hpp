#pragma once

#include "wavebf/errors.hpp"
#include "wavebf/filters.hpp"
#include "wavebf/format.hpp"
#include "wavebf/harness.hpp"
#include "wavebf/linalg.hpp"
#include "wavebf/observation.hpp"
#include "wavebf/reconstruction.hpp"
#include "wavebf/wave_core.hpp"
