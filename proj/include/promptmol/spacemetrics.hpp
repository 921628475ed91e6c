// Copyright 2026 The promptmol Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "promptmol/spacemetrics/cliffs.hpp"
#include "promptmol/spacemetrics/clustering.hpp"
#include "promptmol/spacemetrics/correlation.hpp"
#include "promptmol/spacemetrics/hierarchy.hpp"
#include "promptmol/spacemetrics/rogi.hpp"
