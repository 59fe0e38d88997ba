#pragma once

namespace hasq::cli {

enum ExitCode : int {
  kOk = 0,
  kFailure = 1,
  kUsage = 2,
  kConnectivity = 3,
};

int run(int argc, char** argv);

}  // namespace hasq::cli
