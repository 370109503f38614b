#pragma once

namespace selnet::cli {

/// Entry point for the `selnet` tool. Returns 0 on success, 1 on a runtime
/// failure and 2 on a usage error.
int run(int argc, char** argv);

}  // namespace selnet::cli
