#pragma once
// Umbrella header.

#include "qshift/adversarial.hpp"
#include "qshift/backends.hpp"
#include "qshift/core.hpp"
#include "qshift/datasets.hpp"
#include "qshift/error.hpp"
#include "qshift/formats.hpp"
#include "qshift/report.hpp"
#include "qshift/rng.hpp"
#include "qshift/runner.hpp"
#include "qshift/scoring.hpp"
#include "qshift/templates.hpp"
#include "qshift/wire.hpp"
