#pragma once

#include "pfvar/cli.hpp"
#include "pfvar/config.hpp"
#include "pfvar/discrete.hpp"
#include "pfvar/errors.hpp"
#include "pfvar/exact.hpp"
#include "pfvar/experiments.hpp"
#include "pfvar/filter.hpp"
#include "pfvar/gaussian.hpp"
#include "pfvar/io.hpp"
#include "pfvar/lag.hpp"
#include "pfvar/model.hpp"
#include "pfvar/models.hpp"
#include "pfvar/resampling.hpp"
#include "pfvar/rng.hpp"
#include "pfvar/variance.hpp"
