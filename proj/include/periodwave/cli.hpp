#pragma once

namespace periodwave {

// Entry point of the `periodwave` tool. Returns the process exit code.
int run_cli(int argc, const char* const* argv);

}  // namespace periodwave
