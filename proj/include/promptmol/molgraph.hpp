// Copyright 2026 The promptmol Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "promptmol/molgraph/element.hpp"
#include "promptmol/molgraph/graph.hpp"
#include "promptmol/molgraph/isomorphism.hpp"
#include "promptmol/molgraph/rings.hpp"
#include "promptmol/molgraph/smiles.hpp"
