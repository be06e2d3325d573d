#pragma once

#include <array>
#include <cstdio>
#include <string>
#include <sys/wait.h>

namespace testing {

struct RunResult {
  int exit_code = -1;
  std::string out;
};

// Runs `args` through the shell with the CLI binary prepended; stderr is
// discarded unless the arguments redirect it.
inline RunResult run_cli(const std::string& args) {
  const std::string cmd = std::string("'") + PERCLOSS_CLI_PATH + "' " + args;
  RunResult r;
  FILE* pipe = ::popen(cmd.c_str(), "r");
  if (!pipe) return r;
  std::array<char, 4096> buf{};
  std::size_t n = 0;
  while ((n = std::fread(buf.data(), 1, buf.size(), pipe)) > 0) r.out.append(buf.data(), n);
  const int status = ::pclose(pipe);
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

}  // namespace testing
