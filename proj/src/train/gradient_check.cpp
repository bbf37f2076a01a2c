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


#include "duonav/train/gradient_check.hpp"

#include <vector>

namespace duonav::train {

diffcore::GradcheckReport check_joint_gradients(Navigator& nav, std::span<const Example> batch,
                                                const diffcore::GradcheckOptions& opts, int itm_offset) {
  std::vector<agent::Param*> params;
  auto& store = nav.parameters();
  for (std::size_t i = 0; i < store.size(); ++i) params.push_back(&store[i]);
  const Navigator& model = nav;
  return diffcore::gradcheck<Real>([&](Tape& tape) { return joint_loss(tape, model, batch, itm_offset); }, params,
                                   opts);
}

}  // namespace duonav::train
