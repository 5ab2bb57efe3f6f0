/* Copyright 2026 The rcfuse Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#ifndef RCFUSE_CLI_H_
#define RCFUSE_CLI_H_

#include <ostream>

namespace rcfuse {

// Exit codes of the command-line driver.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;

// Subcommands: generate, train, detect, eval, render, gradcheck, sweep.
// Reads its JSON config from --config or $RCFUSE_CONFIG.
int Run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace rcfuse

#endif  // RCFUSE_CLI_H_
