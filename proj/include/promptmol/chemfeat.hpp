// Copyright 2026 The promptmol Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "promptmol/chemfeat/descriptors.hpp"
#include "promptmol/chemfeat/fingerprint.hpp"
#include "promptmol/chemfeat/scaffold.hpp"
