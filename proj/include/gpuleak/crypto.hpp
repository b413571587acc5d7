#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "gpuleak/memory.hpp"

namespace gpuleak {

// AES-128 key with its expanded schedule. Words use the big-endian packing of
// the standard key schedule, so round_keys[0..3] equals the key words.
struct AesKey128 {
    std::array<Word, 4> key{};
    std::array<Word, 44> round_keys{};

    static AesKey128 from_words(const std::array<Word, 4>& words);
    static AesKey128 from_bytes(std::span<const std::uint8_t, 16> bytes);
    std::array<std::uint8_t, 16> key_bytes() const;
};

// ECB, no padding: length must be a multiple of 16. Throws ConfigError otherwise.
std::vector<std::uint8_t> aes128_encrypt_ecb(std::span<const std::uint8_t> plaintext,
                                             const AesKey128& key);
std::vector<std::uint8_t> aes128_decrypt_ecb(std::span<const std::uint8_t> ciphertext,
                                             const AesKey128& key);

std::array<std::uint8_t, 20> sha1(std::span<const std::uint8_t> message);

// Word-granular serialization used everywhere the simulator stores byte data.
std::vector<std::uint8_t> words_to_bytes(std::span<const Word> words);
std::vector<Word> bytes_to_words(std::span<const std::uint8_t> bytes);

struct PlaintextBuffer {
    std::vector<std::uint8_t> bytes;

    // The bundled case-study constant: 4KB of pairwise-distinct words, chosen
    // so that neither it, its ciphertext under the fixed key, nor the expanded
    // key schedule produces accidental scan-trigger collisions.
    static PlaintextBuffer fixed_4k();

    // 16KB constant hashed by the write-attack victim.
    static PlaintextBuffer fixed_16k();

    std::vector<Word> words() const { return bytes_to_words(bytes); }
};

// The case study's fixed 128-bit key, as words.
std::array<Word, 4> case_study_key_words();

}  // namespace gpuleak
