#include <string>
#include <vector>

#include "crackbench/cli.hpp"

int main(int argc, char** argv) {
  return crackbench::cli::run(std::vector<std::string>(argv, argv + argc));
}
