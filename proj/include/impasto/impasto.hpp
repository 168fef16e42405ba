// Copyright 2026 The impasto Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef IMPASTO_IMPASTO_HPP_
#define IMPASTO_IMPASTO_HPP_

#include "impasto/config_json.hpp"
#include "impasto/constraints.hpp"
#include "impasto/error.hpp"
#include "impasto/fusion.hpp"
#include "impasto/jnd.hpp"
#include "impasto/oracle.hpp"
#include "impasto/perceptual.hpp"
#include "impasto/png_io.hpp"
#include "impasto/protect.hpp"
#include "impasto/remote_oracle.hpp"
#include "impasto/surrogate_oracle.hpp"
#include "impasto/tensor.hpp"
#include "impasto/wavelet.hpp"
#include "impasto/wire.hpp"

#endif  // IMPASTO_IMPASTO_HPP_
