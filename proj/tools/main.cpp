#include "adp/cli.hpp"

int main(int argc, char** argv) {
  return adp::cli::cli_main(std::vector<std::string>(argv + 1, argv + argc));
}
