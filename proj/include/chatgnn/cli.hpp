#pragma once

namespace chatgnn::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntimeError = 1;
inline constexpr int kExitUsageError = 2;

/// Entry point of the `chatgnn` tool. Flag errors return kExitUsageError,
/// failures after parsing return kExitRuntimeError; messages go to stderr.
int run(int argc, char** argv);

}  // namespace chatgnn::cli
