#pragma once

#include "epm/analysis.hpp"
#include "epm/core.hpp"
#include "epm/datasets.hpp"
#include "epm/errors.hpp"
#include "epm/group_geometry.hpp"
#include "epm/partial_match.hpp"
#include "epm/registration.hpp"
