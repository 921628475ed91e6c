// Copyright 2026 The promptmol Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "promptmol/encoder/checkpoint.hpp"
#include "promptmol/encoder/gradcheck.hpp"
#include "promptmol/encoder/model.hpp"
#include "promptmol/encoder/ops.hpp"
#include "promptmol/encoder/optim.hpp"
#include "promptmol/encoder/tensor.hpp"
