// Copyright 2026 The spkdiar Authors.
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

#pragma once

#include <sstream>
#include <stdexcept>
#include <string>

namespace spkdiar {

/// Base exception for every failure raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

template <typename... Args>
[[noreturn]] void fail(const Args&... args) {
  std::ostringstream ss;
  (ss << ... << args);
  throw Error(ss.str());
}

}  // namespace detail

#define SPKDIAR_CHECK(cond, ...)                 \
  do {                                           \
    if (!(cond)) ::spkdiar::detail::fail(__VA_ARGS__); \
  } while (0)

}  // namespace spkdiar
