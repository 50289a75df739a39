#include <iostream>
#include <string>
#include <vector>

#include "latent_steer_app/app.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return latent_steer::app::run_command(args, std::cout, std::cerr);
}
