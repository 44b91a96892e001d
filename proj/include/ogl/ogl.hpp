//
// Copyright 2026 The ogl-sim Authors
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
//


#ifndef OGL_OGL_HPP_
#define OGL_OGL_HPP_

#include "ogl/rng.hpp"
#include "ogl/topology.hpp"
#include "ogl/data.hpp"
#include "ogl/model.hpp"
#include "ogl/trainer.hpp"
#include "ogl/accountant.hpp"
#include "ogl/propagation.hpp"
#include "ogl/harness.hpp"

#endif  // OGL_OGL_HPP_
