#include "ssdda/cli.hpp"

int main(int argc, char** argv) {
    return ssdda::run_cli(argc, argv);
}
