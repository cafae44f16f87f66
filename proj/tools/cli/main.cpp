#include "commands.hpp"

int main(int argc, char** argv) {
    return leelab::cli::run_command(argc, argv);
}
