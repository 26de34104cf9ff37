// Copyright 2026 The knnmt-dual Authors
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

#include <iosfwd>

namespace knnmt::cli {

/// Parses and executes one subcommand. Returns the process exit code:
/// 0 ok, 2 usage, 3 missing input, 4 format violation, 5 numeric failure.
int Run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace knnmt::cli
