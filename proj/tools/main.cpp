#include "treemap/cli.hpp"

int main(int argc, char** argv) {
    return treemap::run({argv + 1, argv + argc});
}
