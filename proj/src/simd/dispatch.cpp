#include <atomic>
#include <cstdlib>
#include <cstring>

#include "infoflow/error.hpp"
#include "infoflow/simd/pairwise.hpp"

namespace infoflow::simd {

#if defined(INFOFLOW_HAVE_AVX2)
const PairwiseKernels &avx2_kernels_table();
#endif

namespace {

bool cpu_has_avx2()
{
#if defined(INFOFLOW_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
    __builtin_cpu_init();
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

const PairwiseKernels *detect()
{
    const char *forced = std::getenv("INFOFLOW_ISA");
    if (forced != nullptr && std::strcmp(forced, "scalar") == 0)
    {
        return &scalar_kernels();
    }
    if (const PairwiseKernels *avx2 = avx2_kernels())
    {
        return avx2;
    }
    return &scalar_kernels();
}

std::atomic<const PairwiseKernels *> g_active{nullptr};

} // namespace

std::string to_string(Isa isa)
{
    return isa == Isa::kAvx2 ? "avx2" : "scalar";
}

const PairwiseKernels *avx2_kernels()
{
#if defined(INFOFLOW_HAVE_AVX2)
    static const bool supported = cpu_has_avx2();
    return supported ? &avx2_kernels_table() : nullptr;
#else
    return nullptr;
#endif
}

const PairwiseKernels &active_kernels()
{
    const PairwiseKernels *table = g_active.load(std::memory_order_acquire);
    if (table == nullptr)
    {
        table = detect();
        g_active.store(table, std::memory_order_release);
    }
    return *table;
}

void set_active_isa(Isa isa)
{
    if (isa == Isa::kScalar)
    {
        g_active.store(&scalar_kernels(), std::memory_order_release);
        return;
    }
    const PairwiseKernels *avx2 = avx2_kernels();
    if (avx2 == nullptr)
    {
        throw ConfigError("AVX2 kernels are not available on this build or CPU");
    }
    g_active.store(avx2, std::memory_order_release);
}

Isa active_isa()
{
    return active_kernels().isa;
}

} // namespace infoflow::simd
