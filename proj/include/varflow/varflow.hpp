// Copyright 2026 The Varflow Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef VARFLOW_VARFLOW_HPP_
#define VARFLOW_VARFLOW_HPP_

#include "varflow/binary_io.hpp"
#include "varflow/config.hpp"
#include "varflow/core.hpp"
#include "varflow/error.hpp"
#include "varflow/eval.hpp"
#include "varflow/field.hpp"
#include "varflow/flops.hpp"
#include "varflow/losses.hpp"
#include "varflow/oracle.hpp"
#include "varflow/random.hpp"
#include "varflow/reference_net.hpp"
#include "varflow/sampler.hpp"
#include "varflow/scheduler.hpp"
#include "varflow/toyset.hpp"
#include "varflow/trainer.hpp"

#endif  // VARFLOW_VARFLOW_HPP_
