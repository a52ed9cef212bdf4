#pragma once

#include "evoheat/checks.hpp"
#include "evoheat/config.hpp"
#include "evoheat/constants.hpp"
#include "evoheat/errors.hpp"
#include "evoheat/estimators.hpp"
#include "evoheat/geometry.hpp"
#include "evoheat/oracle.hpp"
#include "evoheat/profile.hpp"
#include "evoheat/quadrature.hpp"
#include "evoheat/report.hpp"
#include "evoheat/rng.hpp"
#include "evoheat/series.hpp"
#include "evoheat/test_functions.hpp"
#include "evoheat/transport.hpp"
