// Runtime backend selection. The AVX2 table is only installed when the CPU
// reports AVX2+FMA and the binary was built with that translation unit
// enabled. METAEU_KERNELS=scalar|avx2 overrides the automatic pick.

#include "metaeu/kernels.hpp"
#include "metaeu/error.hpp"

#include <cstdlib>
#include <cstring>

namespace metaeu::kern {

namespace {

bool cpu_has_avx2_fma() {
#if defined(__GNUC__) && (defined(__x86_64__) || defined(__i386__))
    __builtin_cpu_init();
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

struct Dispatch {
    const Ops* active;
    Backend backend;

    Dispatch() {
        const Ops* avx2 = avx2_available() ? avx2_ops_or_null() : nullptr;
        const char* env = std::getenv("METAEU_KERNELS");
        if (env && std::strcmp(env, "scalar") == 0) avx2 = nullptr;
        if (avx2) {
            active = avx2;
            backend = Backend::Avx2;
        } else {
            active = &scalar_ops();
            backend = Backend::Scalar;
        }
    }
};

Dispatch& dispatch() {
    static Dispatch d;
    return d;
}

} // namespace

bool avx2_available() {
    return avx2_ops_or_null() != nullptr && cpu_has_avx2_fma();
}

const Ops& ops() { return *dispatch().active; }

Backend active_backend() { return dispatch().backend; }

const char* backend_name() {
    return dispatch().backend == Backend::Avx2 ? "avx2" : "scalar";
}

void select(Backend b) {
    if (b == Backend::Avx2) {
        if (!avx2_available())
            throw Error("kernel_backend", "AVX2 kernels are not available on this machine");
        dispatch().active = avx2_ops_or_null();
        dispatch().backend = Backend::Avx2;
    } else {
        dispatch().active = &scalar_ops();
        dispatch().backend = Backend::Scalar;
    }
}

} // namespace metaeu::kern
