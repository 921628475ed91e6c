// Copyright 2026 The promptmol Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "promptmol/losses/context_label.hpp"
#include "promptmol/losses/objectives.hpp"
#include "promptmol/losses/pretrain_objective.hpp"
