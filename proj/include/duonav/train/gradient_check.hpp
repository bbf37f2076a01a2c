/*
 * Copyright 2026 The duonav Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */


#ifndef DUONAV_TRAIN_GRADIENT_CHECK_HPP
#define DUONAV_TRAIN_GRADIENT_CHECK_HPP

#include <span>

#include "duonav/diffcore/gradcheck.hpp"
#include "duonav/train/losses.hpp"

namespace duonav::train {

/// Central-difference check of joint_loss() against reverse mode, over every
/// parameter of `nav`. Meaningful in double precision only.
diffcore::GradcheckReport check_joint_gradients(Navigator& nav, std::span<const Example> batch,
                                                const diffcore::GradcheckOptions& opts = {}, int itm_offset = 1);

}  // namespace duonav::train

#endif  // DUONAV_TRAIN_GRADIENT_CHECK_HPP
