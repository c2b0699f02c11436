#include <string>
#include <vector>

#include "sessrank/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return sessrank::cli::dispatch(std::move(args));
}
