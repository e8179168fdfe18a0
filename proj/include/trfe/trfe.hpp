#pragma once

#include "trfe/baselines.hpp"
#include "trfe/certificates.hpp"
#include "trfe/config.hpp"
#include "trfe/convexity.hpp"
#include "trfe/deriv.hpp"
#include "trfe/dual.hpp"
#include "trfe/errors.hpp"
#include "trfe/experiment.hpp"
#include "trfe/free_energy.hpp"
#include "trfe/model.hpp"
#include "trfe/plot.hpp"
#include "trfe/self_consistent.hpp"
#include "trfe/systems.hpp"
