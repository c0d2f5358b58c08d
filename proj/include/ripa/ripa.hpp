// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The ripa-sim Authors
#pragma once

#include "ripa/analysis.hpp"
#include "ripa/array_synthesis.hpp"
#include "ripa/beam_optics.hpp"
#include "ripa/calibration.hpp"
#include "ripa/config.hpp"
#include "ripa/config_io.hpp"
#include "ripa/drive_compiler.hpp"
#include "ripa/errors.hpp"
#include "ripa/focal_solver.hpp"
#include "ripa/grid.hpp"
#include "ripa/io.hpp"
#include "ripa/time_engine.hpp"
