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

#ifndef DUONAV_REAL_HPP
#define DUONAV_REAL_HPP

namespace duonav {

// Model precision. 64-bit unless the library is built with DUONAV_FLOAT32.
#ifdef DUONAV_FLOAT32
using Real = float;
#else
using Real = double;
#endif

}  // namespace duonav

#endif  // DUONAV_REAL_HPP
