#pragma once

#include "mblingam/fastica.hpp"
#include "mblingam/hungarian.hpp"
#include "mblingam/io.hpp"
#include "mblingam/jet.hpp"
#include "mblingam/lingam.hpp"
#include "mblingam/model.hpp"
#include "mblingam/msboot.hpp"
#include "mblingam/normal.hpp"
#include "mblingam/optimize.hpp"
#include "mblingam/parallel.hpp"
#include "mblingam/psifit.hpp"
#include "mblingam/rng.hpp"
#include "mblingam/simulate.hpp"
#include "mblingam/types.hpp"
