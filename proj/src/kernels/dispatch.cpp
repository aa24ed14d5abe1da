#include <atomic>
#include <cstdlib>

#include "kz/errors.hpp"
#include "kz/kernels.hpp"

namespace kz::kernels {

bool avx2_supported() {
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
}

namespace {

std::atomic<const Table*> g_active{nullptr};

const Table* resolve(const std::string& name) {
    if (name == "scalar") return &scalar();
    if (name == "avx2") {
        if (!avx2_supported()) throw ConfigError("KZ_KERNELS=avx2 but CPU lacks AVX2/FMA");
        return &avx2();
    }
    if (name == "auto" || name.empty()) return avx2_supported() ? &avx2() : &scalar();
    throw ConfigError("unknown kernel set: " + name + " (want scalar|avx2|auto)");
}

} // namespace

const Table& active() {
    const Table* t = g_active.load(std::memory_order_acquire);
    if (!t) {
        const char* env = std::getenv("KZ_KERNELS");
        t = resolve(env ? env : "auto");
        g_active.store(t, std::memory_order_release);
    }
    return *t;
}

void set_active(const std::string& name) {
    g_active.store(resolve(name), std::memory_order_release);
}

} // namespace kz::kernels
