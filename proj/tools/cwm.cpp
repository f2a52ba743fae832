#include <vector>

#include "cwm/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return cwm::cli_dispatch(args);
}
