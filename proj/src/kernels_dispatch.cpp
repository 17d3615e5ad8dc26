#include "cmr/kernels.hpp"

#include <cstdlib>
#include <cstring>

namespace cmr::kernels {

#if defined(CMR_BUILD_AVX2)
const Ops* avx2_ops_impl();
#endif

const Ops* avx2_ops() {
#if defined(CMR_BUILD_AVX2)
    static const bool supported = __builtin_cpu_supports("avx2");
    return supported ? avx2_ops_impl() : nullptr;
#else
    return nullptr;
#endif
}

const Ops& active_ops() {
    static const Ops* selected = [] {
        const char* forced = std::getenv("CMR_KERNELS");
        if (forced != nullptr && std::strcmp(forced, "scalar") == 0) return &scalar_ops();
        const Ops* avx2 = avx2_ops();
        if (forced != nullptr && std::strcmp(forced, "avx2") == 0 && avx2 == nullptr)
            return &scalar_ops();
        return avx2 != nullptr ? avx2 : &scalar_ops();
    }();
    return *selected;
}

}  // namespace cmr::kernels
