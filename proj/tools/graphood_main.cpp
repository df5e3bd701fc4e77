#include <string>
#include <vector>

#include "graphood/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return graphood::run_cli(args);
}
