// Copyright 2026 The promptmol Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "promptmol/pipeline/analysis.hpp"
#include "promptmol/pipeline/config.hpp"
#include "promptmol/pipeline/csv.hpp"
#include "promptmol/pipeline/dataset.hpp"
#include "promptmol/pipeline/finetune.hpp"
#include "promptmol/pipeline/metrics.hpp"
#include "promptmol/pipeline/pretrain.hpp"
#include "promptmol/pipeline/prompt_init.hpp"
#include "promptmol/pipeline/split.hpp"
#include "promptmol/pipeline/toy_corpus.hpp"
