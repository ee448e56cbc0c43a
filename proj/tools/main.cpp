#include "voicescreen/cli.hpp"

int main(int argc, char** argv) {
    return voicescreen::cli::run(argc, argv);
}
