/*
Copyright 2026 the cfreg contributors
Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at
    http://www.apache.org/licenses/LICENSE-2.0
Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
*/
#pragma once

// Convenience umbrella: the whole registration stack in one include.

#include "cfreg/adam.hpp"
#include "cfreg/autodiff.hpp"
#include "cfreg/checkpoint.hpp"
#include "cfreg/dataset.hpp"
#include "cfreg/errors.hpp"
#include "cfreg/eval.hpp"
#include "cfreg/field_ops.hpp"
#include "cfreg/losses.hpp"
#include "cfreg/model.hpp"
#include "cfreg/nifti_io.hpp"
#include "cfreg/phantom.hpp"
#include "cfreg/raw_io.hpp"
#include "cfreg/report.hpp"
#include "cfreg/rng.hpp"
#include "cfreg/tensor.hpp"
#include "cfreg/training.hpp"
#include "cfreg/volume.hpp"
