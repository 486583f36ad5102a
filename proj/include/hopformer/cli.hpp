// SPDX-License-Identifier: Apache-2.0
#pragma once

namespace hopformer {

/// Entry point behind the hopformer binary; exposed for in-process testing.
/// Exit codes: 0 success, 1 validation/input error, 2 numerical failure.
int run_cli(int argc, const char* const* argv);

}  // namespace hopformer
