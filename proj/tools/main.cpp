#include <string>
#include <vector>

#include "taxograph/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return taxograph::run_pipeline(args);
}
