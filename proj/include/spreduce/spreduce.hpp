// Copyright (c) spreduce contributors. All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "spreduce/errors.hpp"
#include "spreduce/generate.hpp"
#include "spreduce/greedy.hpp"
#include "spreduce/io.hpp"
#include "spreduce/linalg.hpp"
#include "spreduce/model.hpp"
#include "spreduce/parallel.hpp"
#include "spreduce/simulate.hpp"
#include "spreduce/sp.hpp"
#include "spreduce/stiefel.hpp"
