// command-line driver; subcommands are wired up in experiments.hpp
#include <cstdio>

int main() {
    std::puts("itpg: experiments not wired up yet");
    return 1;
}
