// Prints the route table of a traffic-junction level (easy, medium or hard).
#include <iostream>

#include "ic3net/env/traffic_junction.hpp"

int main(int argc, char** argv) {
  if (argc != 2) {
    std::cerr << "usage: dump_routes <easy|medium|hard>\n";
    return 1;
  }
  try {
    std::cout << ic3net::tj::format_routes(ic3net::tj::build_routes(ic3net::tj::level_from_string(argv[1])));
  } catch (const std::exception& e) {
    std::cerr << e.what() << "\n";
    return 1;
  }
  return 0;
}
