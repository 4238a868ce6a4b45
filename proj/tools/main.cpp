#include <vector>

#include "purekit/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return purekit::run_cli(args);
}
