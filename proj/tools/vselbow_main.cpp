// Command line front end. Subcommands are registered as the library grows.

#include <cstdio>

int main(int argc, char** argv) {
    (void)argc;
    (void)argv;
    std::puts("vselbow: no subcommands wired yet");
    return 0;
}
