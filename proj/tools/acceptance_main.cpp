#include <cstdio>
#include <cstdlib>
#include <cstring>

#include "acceptance.hpp"

// Standalone acceptance runner (also reachable as `kz verify`).
int main(int argc, char** argv) {
    setenv("OPENBLAS_NUM_THREADS", "1", 0);
    kz::accept::Options opt;
    for (int i = 1; i < argc; ++i) {
        if (std::strcmp(argv[i], "--long") == 0) {
            opt.long_mode = true;
        } else if (std::strcmp(argv[i], "--only") == 0 && i + 1 < argc) {
            opt.only = std::atoi(argv[++i]);
        } else {
            std::fprintf(stderr, "usage: %s [--long] [--only K]\n", argv[0]);
            return 2;
        }
    }
    return kz::accept::run_acceptance(opt) == 0 ? 0 : 1;
}
