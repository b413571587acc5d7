#include "gpuleak/crypto.hpp"

#include <cstring>

#include "gpuleak/errors.hpp"

namespace gpuleak {

namespace {

constexpr std::array<std::uint8_t, 256> kSbox = {
    0x63, 0x7c, 0x77, 0x7b, 0xf2, 0x6b, 0x6f, 0xc5, 0x30, 0x01, 0x67, 0x2b, 0xfe, 0xd7, 0xab,
    0x76, 0xca, 0x82, 0xc9, 0x7d, 0xfa, 0x59, 0x47, 0xf0, 0xad, 0xd4, 0xa2, 0xaf, 0x9c, 0xa4,
    0x72, 0xc0, 0xb7, 0xfd, 0x93, 0x26, 0x36, 0x3f, 0xf7, 0xcc, 0x34, 0xa5, 0xe5, 0xf1, 0x71,
    0xd8, 0x31, 0x15, 0x04, 0xc7, 0x23, 0xc3, 0x18, 0x96, 0x05, 0x9a, 0x07, 0x12, 0x80, 0xe2,
    0xeb, 0x27, 0xb2, 0x75, 0x09, 0x83, 0x2c, 0x1a, 0x1b, 0x6e, 0x5a, 0xa0, 0x52, 0x3b, 0xd6,
    0xb3, 0x29, 0xe3, 0x2f, 0x84, 0x53, 0xd1, 0x00, 0xed, 0x20, 0xfc, 0xb1, 0x5b, 0x6a, 0xcb,
    0xbe, 0x39, 0x4a, 0x4c, 0x58, 0xcf, 0xd0, 0xef, 0xaa, 0xfb, 0x43, 0x4d, 0x33, 0x85, 0x45,
    0xf9, 0x02, 0x7f, 0x50, 0x3c, 0x9f, 0xa8, 0x51, 0xa3, 0x40, 0x8f, 0x92, 0x9d, 0x38, 0xf5,
    0xbc, 0xb6, 0xda, 0x21, 0x10, 0xff, 0xf3, 0xd2, 0xcd, 0x0c, 0x13, 0xec, 0x5f, 0x97, 0x44,
    0x17, 0xc4, 0xa7, 0x7e, 0x3d, 0x64, 0x5d, 0x19, 0x73, 0x60, 0x81, 0x4f, 0xdc, 0x22, 0x2a,
    0x90, 0x88, 0x46, 0xee, 0xb8, 0x14, 0xde, 0x5e, 0x0b, 0xdb, 0xe0, 0x32, 0x3a, 0x0a, 0x49,
    0x06, 0x24, 0x5c, 0xc2, 0xd3, 0xac, 0x62, 0x91, 0x95, 0xe4, 0x79, 0xe7, 0xc8, 0x37, 0x6d,
    0x8d, 0xd5, 0x4e, 0xa9, 0x6c, 0x56, 0xf4, 0xea, 0x65, 0x7a, 0xae, 0x08, 0xba, 0x78, 0x25,
    0x2e, 0x1c, 0xa6, 0xb4, 0xc6, 0xe8, 0xdd, 0x74, 0x1f, 0x4b, 0xbd, 0x8b, 0x8a, 0x70, 0x3e,
    0xb5, 0x66, 0x48, 0x03, 0xf6, 0x0e, 0x61, 0x35, 0x57, 0xb9, 0x86, 0xc1, 0x1d, 0x9e, 0xe1,
    0xf8, 0x98, 0x11, 0x69, 0xd9, 0x8e, 0x94, 0x9b, 0x1e, 0x87, 0xe9, 0xce, 0x55, 0x28, 0xdf,
    0x8c, 0xa1, 0x89, 0x0d, 0xbf, 0xe6, 0x42, 0x68, 0x41, 0x99, 0x2d, 0x0f, 0xb0, 0x54, 0xbb,
    0x16};

constexpr std::array<std::uint8_t, 256> make_inverse_sbox() {
    std::array<std::uint8_t, 256> inv{};
    for (std::size_t i = 0; i < 256; ++i) inv[kSbox[i]] = static_cast<std::uint8_t>(i);
    return inv;
}

constexpr std::array<std::uint8_t, 256> kInvSbox = make_inverse_sbox();

inline std::uint8_t xtime(std::uint8_t x) {
    return static_cast<std::uint8_t>((x << 1) ^ ((x & 0x80) ? 0x1b : 0x00));
}

inline std::uint8_t gmul(std::uint8_t a, std::uint8_t b) {
    std::uint8_t result = 0;
    while (b) {
        if (b & 1) result ^= a;
        a = xtime(a);
        b >>= 1;
    }
    return result;
}

using Block = std::array<std::uint8_t, 16>;

void add_round_key(Block& state, const std::array<Word, 44>& rk, int round) {
    for (int c = 0; c < 4; ++c) {
        const Word w = rk[static_cast<std::size_t>(round * 4 + c)];
        state[static_cast<std::size_t>(4 * c + 0)] ^= static_cast<std::uint8_t>(w >> 24);
        state[static_cast<std::size_t>(4 * c + 1)] ^= static_cast<std::uint8_t>(w >> 16);
        state[static_cast<std::size_t>(4 * c + 2)] ^= static_cast<std::uint8_t>(w >> 8);
        state[static_cast<std::size_t>(4 * c + 3)] ^= static_cast<std::uint8_t>(w);
    }
}

void sub_bytes(Block& state) {
    for (auto& b : state) b = kSbox[b];
}

void inv_sub_bytes(Block& state) {
    for (auto& b : state) b = kInvSbox[b];
}

// State layout is column-major: byte r of column c lives at state[4c + r].
void shift_rows(Block& state) {
    Block out;
    for (int c = 0; c < 4; ++c) {
        for (int r = 0; r < 4; ++r) {
            out[static_cast<std::size_t>(4 * c + r)] =
                state[static_cast<std::size_t>(4 * ((c + r) % 4) + r)];
        }
    }
    state = out;
}

void inv_shift_rows(Block& state) {
    Block out;
    for (int c = 0; c < 4; ++c) {
        for (int r = 0; r < 4; ++r) {
            out[static_cast<std::size_t>(4 * ((c + r) % 4) + r)] =
                state[static_cast<std::size_t>(4 * c + r)];
        }
    }
    state = out;
}

void mix_columns(Block& state) {
    for (int c = 0; c < 4; ++c) {
        std::uint8_t* col = &state[static_cast<std::size_t>(4 * c)];
        const std::uint8_t a0 = col[0], a1 = col[1], a2 = col[2], a3 = col[3];
        col[0] = static_cast<std::uint8_t>(xtime(a0) ^ (xtime(a1) ^ a1) ^ a2 ^ a3);
        col[1] = static_cast<std::uint8_t>(a0 ^ xtime(a1) ^ (xtime(a2) ^ a2) ^ a3);
        col[2] = static_cast<std::uint8_t>(a0 ^ a1 ^ xtime(a2) ^ (xtime(a3) ^ a3));
        col[3] = static_cast<std::uint8_t>((xtime(a0) ^ a0) ^ a1 ^ a2 ^ xtime(a3));
    }
}

void inv_mix_columns(Block& state) {
    for (int c = 0; c < 4; ++c) {
        std::uint8_t* col = &state[static_cast<std::size_t>(4 * c)];
        const std::uint8_t a0 = col[0], a1 = col[1], a2 = col[2], a3 = col[3];
        col[0] = static_cast<std::uint8_t>(gmul(a0, 14) ^ gmul(a1, 11) ^ gmul(a2, 13) ^ gmul(a3, 9));
        col[1] = static_cast<std::uint8_t>(gmul(a0, 9) ^ gmul(a1, 14) ^ gmul(a2, 11) ^ gmul(a3, 13));
        col[2] = static_cast<std::uint8_t>(gmul(a0, 13) ^ gmul(a1, 9) ^ gmul(a2, 14) ^ gmul(a3, 11));
        col[3] = static_cast<std::uint8_t>(gmul(a0, 11) ^ gmul(a1, 13) ^ gmul(a2, 9) ^ gmul(a3, 14));
    }
}

Block encrypt_block(const Block& in, const std::array<Word, 44>& rk) {
    Block state = in;
    add_round_key(state, rk, 0);
    for (int round = 1; round < 10; ++round) {
        sub_bytes(state);
        shift_rows(state);
        mix_columns(state);
        add_round_key(state, rk, round);
    }
    sub_bytes(state);
    shift_rows(state);
    add_round_key(state, rk, 10);
    return state;
}

Block decrypt_block(const Block& in, const std::array<Word, 44>& rk) {
    Block state = in;
    add_round_key(state, rk, 10);
    for (int round = 9; round > 0; --round) {
        inv_shift_rows(state);
        inv_sub_bytes(state);
        add_round_key(state, rk, round);
        inv_mix_columns(state);
    }
    inv_shift_rows(state);
    inv_sub_bytes(state);
    add_round_key(state, rk, 0);
    return state;
}

}  // namespace

AesKey128 AesKey128::from_words(const std::array<Word, 4>& words) {
    AesKey128 k;
    k.key = words;
    for (int i = 0; i < 4; ++i) k.round_keys[static_cast<std::size_t>(i)] = words[static_cast<std::size_t>(i)];
    Word rcon = 0x01000000u;
    for (std::size_t i = 4; i < 44; ++i) {
        Word t = k.round_keys[i - 1];
        if (i % 4 == 0) {
            t = (t << 8) | (t >> 24);
            t = (static_cast<Word>(kSbox[(t >> 24) & 0xff]) << 24) |
                (static_cast<Word>(kSbox[(t >> 16) & 0xff]) << 16) |
                (static_cast<Word>(kSbox[(t >> 8) & 0xff]) << 8) |
                static_cast<Word>(kSbox[t & 0xff]);
            t ^= rcon;
            const std::uint8_t hi = static_cast<std::uint8_t>(rcon >> 24);
            rcon = static_cast<Word>(xtime(hi)) << 24;
        }
        k.round_keys[i] = k.round_keys[i - 4] ^ t;
    }
    return k;
}

AesKey128 AesKey128::from_bytes(std::span<const std::uint8_t, 16> bytes) {
    std::array<Word, 4> words{};
    for (std::size_t i = 0; i < 4; ++i) {
        words[i] = (static_cast<Word>(bytes[4 * i]) << 24) |
                   (static_cast<Word>(bytes[4 * i + 1]) << 16) |
                   (static_cast<Word>(bytes[4 * i + 2]) << 8) |
                   static_cast<Word>(bytes[4 * i + 3]);
    }
    return from_words(words);
}

std::array<std::uint8_t, 16> AesKey128::key_bytes() const {
    std::array<std::uint8_t, 16> bytes{};
    for (std::size_t i = 0; i < 4; ++i) {
        bytes[4 * i] = static_cast<std::uint8_t>(key[i] >> 24);
        bytes[4 * i + 1] = static_cast<std::uint8_t>(key[i] >> 16);
        bytes[4 * i + 2] = static_cast<std::uint8_t>(key[i] >> 8);
        bytes[4 * i + 3] = static_cast<std::uint8_t>(key[i]);
    }
    return bytes;
}

std::vector<std::uint8_t> aes128_encrypt_ecb(std::span<const std::uint8_t> plaintext,
                                             const AesKey128& key) {
    if (plaintext.size() % 16 != 0) {
        throw ConfigError("aes128_encrypt_ecb: length must be a multiple of 16");
    }
    std::vector<std::uint8_t> out(plaintext.size());
    for (std::size_t off = 0; off < plaintext.size(); off += 16) {
        Block in;
        std::memcpy(in.data(), plaintext.data() + off, 16);
        const Block enc = encrypt_block(in, key.round_keys);
        std::memcpy(out.data() + off, enc.data(), 16);
    }
    return out;
}

std::vector<std::uint8_t> aes128_decrypt_ecb(std::span<const std::uint8_t> ciphertext,
                                             const AesKey128& key) {
    if (ciphertext.size() % 16 != 0) {
        throw ConfigError("aes128_decrypt_ecb: length must be a multiple of 16");
    }
    std::vector<std::uint8_t> out(ciphertext.size());
    for (std::size_t off = 0; off < ciphertext.size(); off += 16) {
        Block in;
        std::memcpy(in.data(), ciphertext.data() + off, 16);
        const Block dec = decrypt_block(in, key.round_keys);
        std::memcpy(out.data() + off, dec.data(), 16);
    }
    return out;
}

std::array<std::uint8_t, 20> sha1(std::span<const std::uint8_t> message) {
    std::uint32_t h[5] = {0x67452301u, 0xEFCDAB89u, 0x98BADCFEu, 0x10325476u, 0xC3D2E1F0u};

    std::vector<std::uint8_t> padded(message.begin(), message.end());
    const std::uint64_t bit_length = static_cast<std::uint64_t>(message.size()) * 8;
    padded.push_back(0x80);
    while (padded.size() % 64 != 56) padded.push_back(0x00);
    for (int shift = 56; shift >= 0; shift -= 8) {
        padded.push_back(static_cast<std::uint8_t>(bit_length >> shift));
    }

    auto rotl = [](std::uint32_t x, int n) { return (x << n) | (x >> (32 - n)); };

    for (std::size_t chunk = 0; chunk < padded.size(); chunk += 64) {
        std::uint32_t w[80];
        for (int i = 0; i < 16; ++i) {
            w[i] = (static_cast<std::uint32_t>(padded[chunk + 4 * static_cast<std::size_t>(i)]) << 24) |
                   (static_cast<std::uint32_t>(padded[chunk + 4 * static_cast<std::size_t>(i) + 1]) << 16) |
                   (static_cast<std::uint32_t>(padded[chunk + 4 * static_cast<std::size_t>(i) + 2]) << 8) |
                   static_cast<std::uint32_t>(padded[chunk + 4 * static_cast<std::size_t>(i) + 3]);
        }
        for (int i = 16; i < 80; ++i) {
            w[i] = rotl(w[i - 3] ^ w[i - 8] ^ w[i - 14] ^ w[i - 16], 1);
        }

        std::uint32_t a = h[0], b = h[1], c = h[2], d = h[3], e = h[4];
        for (int i = 0; i < 80; ++i) {
            std::uint32_t f, k;
            if (i < 20) {
                f = (b & c) | (~b & d);
                k = 0x5A827999u;
            } else if (i < 40) {
                f = b ^ c ^ d;
                k = 0x6ED9EBA1u;
            } else if (i < 60) {
                f = (b & c) | (b & d) | (c & d);
                k = 0x8F1BBCDCu;
            } else {
                f = b ^ c ^ d;
                k = 0xCA62C1D6u;
            }
            const std::uint32_t temp = rotl(a, 5) + f + e + k + w[i];
            e = d;
            d = c;
            c = rotl(b, 30);
            b = a;
            a = temp;
        }
        h[0] += a;
        h[1] += b;
        h[2] += c;
        h[3] += d;
        h[4] += e;
    }

    std::array<std::uint8_t, 20> digest{};
    for (int i = 0; i < 5; ++i) {
        digest[static_cast<std::size_t>(4 * i)] = static_cast<std::uint8_t>(h[i] >> 24);
        digest[static_cast<std::size_t>(4 * i + 1)] = static_cast<std::uint8_t>(h[i] >> 16);
        digest[static_cast<std::size_t>(4 * i + 2)] = static_cast<std::uint8_t>(h[i] >> 8);
        digest[static_cast<std::size_t>(4 * i + 3)] = static_cast<std::uint8_t>(h[i]);
    }
    return digest;
}

std::vector<std::uint8_t> words_to_bytes(std::span<const Word> words) {
    std::vector<std::uint8_t> bytes(words.size() * kWordBytes);
    for (std::size_t i = 0; i < words.size(); ++i) {
        bytes[4 * i] = static_cast<std::uint8_t>(words[i]);
        bytes[4 * i + 1] = static_cast<std::uint8_t>(words[i] >> 8);
        bytes[4 * i + 2] = static_cast<std::uint8_t>(words[i] >> 16);
        bytes[4 * i + 3] = static_cast<std::uint8_t>(words[i] >> 24);
    }
    return bytes;
}

std::vector<Word> bytes_to_words(std::span<const std::uint8_t> bytes) {
    if (bytes.size() % kWordBytes != 0) {
        throw ConfigError("bytes_to_words: length must be a word multiple");
    }
    std::vector<Word> words(bytes.size() / kWordBytes);
    for (std::size_t i = 0; i < words.size(); ++i) {
        words[i] = static_cast<Word>(bytes[4 * i]) | (static_cast<Word>(bytes[4 * i + 1]) << 8) |
                   (static_cast<Word>(bytes[4 * i + 2]) << 16) |
                   (static_cast<Word>(bytes[4 * i + 3]) << 24);
    }
    return words;
}

PlaintextBuffer PlaintextBuffer::fixed_4k() {
    std::vector<Word> words(1024);
    for (std::size_t i = 0; i < words.size(); ++i) {
        words[i] = static_cast<Word>(0x9E3779B9u * static_cast<Word>(i + 1));
    }
    return {words_to_bytes(words)};
}

PlaintextBuffer PlaintextBuffer::fixed_16k() {
    std::vector<Word> words(4096);
    for (std::size_t i = 0; i < words.size(); ++i) {
        words[i] = static_cast<Word>(0x6C62272Eu * static_cast<Word>(i + 3));
    }
    return {words_to_bytes(words)};
}

std::array<Word, 4> case_study_key_words() {
    return {0xdeadbeefu, 0xcafed00du, 0xbaddcafeu, 0x8badf00du};
}

}  // namespace gpuleak
