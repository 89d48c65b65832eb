#include <vector>
#include <string>

#include "cbf/cli.hpp"

int main(int argc, char** argv) {
    return cbf::run_cli(std::vector<std::string>(argv + 1, argv + argc));
}
