#ifndef SKYVEIL_RNG_HPP
#define SKYVEIL_RNG_HPP

#include <array>
#include <cstdint>
#include <cstddef>
#include <span>
#include <vector>

namespace skyveil {

// ChaCha20-keyed random stream. `system()` draws the key from the OS;
// `seeded()` gives a reproducible stream for tests and replay.
class Rng {
public:
    static Rng system();
    static Rng seeded(uint64_t seed);

    void fill(std::span<uint8_t> out);
    uint8_t bit();
    uint64_t u64();
    // Uniform in [0, n), n >= 1.
    uint64_t below(uint64_t n);
    std::vector<uint8_t> bytes(size_t n);

private:
    explicit Rng(const std::array<uint8_t, 32>& key);
    void refill();

    std::array<uint8_t, 32> key_;
    std::array<uint8_t, 4096> buf_;
    size_t pos_;
    uint64_t block_;
};

}  // namespace skyveil

#endif
