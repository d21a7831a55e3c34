#pragma once

// Umbrella header: the whole class-incremental learning engine.

#include "yono/config.hpp"
#include "yono/datasets.hpp"
#include "yono/encoder.hpp"
#include "yono/errors.hpp"
#include "yono/geometry.hpp"
#include "yono/losses.hpp"
#include "yono/metrics.hpp"
#include "yono/prototypes.hpp"
#include "yono/random.hpp"
#include "yono/report.hpp"
#include "yono/synthesis.hpp"
#include "yono/trainer.hpp"
