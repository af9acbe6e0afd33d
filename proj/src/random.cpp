#include <mpslam/random.hpp>

namespace mpslam {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::uint64_t fnv1a(std::string_view text) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace

RandomStream rng_stream(std::uint64_t master_seed, std::uint64_t run_index, std::string_view purpose) {
    std::uint64_t state = splitmix64(master_seed);
    state = splitmix64(state ^ splitmix64(run_index + 0x632be59bd9b4e019ULL));
    state = splitmix64(state ^ fnv1a(purpose));
    return RandomStream(state);
}

}  // namespace mpslam
