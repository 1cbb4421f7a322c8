// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 ValuLens Contributors

#pragma once

#include "valulens/audit.hpp"
#include "valulens/corpus.hpp"
#include "valulens/error.hpp"
#include "valulens/report.hpp"
#include "valulens/serve.hpp"
#include "valulens/stats.hpp"
