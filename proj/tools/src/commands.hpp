// Copyright 2026 The tocomm Authors.
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

#ifndef TOCOMM_TOOLS_COMMANDS_HPP_
#define TOCOMM_TOOLS_COMMANDS_HPP_

#include <iosfwd>
#include <string>
#include <vector>

namespace tocomm::cli {

enum ExitCode : int { kOk = 0, kFailure = 1, kConfigError = 2, kNumericFailure = 3 };

// Parses `args` (args[0] is the program name) and runs one subcommand.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace tocomm::cli

#endif  // TOCOMM_TOOLS_COMMANDS_HPP_
