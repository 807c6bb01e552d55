#include <string>
#include <vector>

#include "perclab/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return perclab::cli_run(args);
}
