#include <iostream>

#include "vdpcn/cli.hpp"

int main(int argc, char **argv)
{
  std::vector<std::string> args(argv + 1, argv + argc);
  return vdpcn::cli::run(args, std::cout, std::cerr);
}
