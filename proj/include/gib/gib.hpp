// Copyright 2026 The gibench Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef GIB_GIB_HPP_
#define GIB_GIB_HPP_

#include "gib/common.hpp"
#include "gib/csv.hpp"
#include "gib/datagen.hpp"
#include "gib/estimators.hpp"
#include "gib/loss_comparison.hpp"
#include "gib/nets.hpp"
#include "gib/objectives.hpp"
#include "gib/runner.hpp"

#endif  // GIB_GIB_HPP_
