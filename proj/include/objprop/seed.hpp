#pragma once

#include <cstdint>
#include <initializer_list>

namespace objprop {

/// Derives an independent stream seed from a base seed and stream ids
/// (splitmix64 finalizer), so results do not depend on evaluation order.
inline std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> ids)
{
    std::uint64_t h = base ^ 0x9e3779b97f4a7c15ULL;
    for (std::uint64_t id : ids) {
        h += 0x9e3779b97f4a7c15ULL + id;
        h = (h ^ (h >> 30)) * 0xbf58476d1ce4e5b9ULL;
        h = (h ^ (h >> 27)) * 0x94d049bb133111ebULL;
        h ^= h >> 31;
    }
    return h;
}

}  // namespace objprop
