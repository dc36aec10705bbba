#include <cstdio>

int main() {
    std::puts("biphoton: subcommands not wired yet");
    return 1;
}
