#include "oracle/aes_ref.hpp"

#include <array>
#include <stdexcept>

namespace aes_ref {

namespace {

// GF(2^8) multiply, bit by bit.
std::uint8_t gf_mul(std::uint8_t a, std::uint8_t b) {
    std::uint8_t p = 0;
    for (int i = 0; i < 8; ++i) {
        if (b & 1) p ^= a;
        const bool carry = a & 0x80;
        a <<= 1;
        if (carry) a ^= 0x1b;
        b >>= 1;
    }
    return p;
}

// GF(2^8) inverse by brute force; the S-box is derived, not tabulated.
std::uint8_t gf_inv(std::uint8_t a) {
    if (a == 0) return 0;
    for (int x = 1; x < 256; ++x) {
        if (gf_mul(a, static_cast<std::uint8_t>(x)) == 1) return static_cast<std::uint8_t>(x);
    }
    throw std::logic_error("gf_inv: no inverse");
}

// Affine transform over the multiplicative inverse, straight from the spec:
// b'_i = b_i ^ b_{i+4} ^ b_{i+5} ^ b_{i+6} ^ b_{i+7} ^ c_i with c = 0x63.
std::uint8_t sbox(std::uint8_t a) {
    const std::uint8_t x = gf_inv(a);
    std::uint8_t result = 0;
    for (int i = 0; i < 8; ++i) {
        const int bit = ((x >> i) & 1) ^ ((x >> ((i + 4) % 8)) & 1) ^ ((x >> ((i + 5) % 8)) & 1) ^
                        ((x >> ((i + 6) % 8)) & 1) ^ ((x >> ((i + 7) % 8)) & 1) ^
                        ((0x63 >> i) & 1);
        result = static_cast<std::uint8_t>(result | (bit << i));
    }
    return result;
}

// State is row-major: state[r][c].
using State = std::array<std::array<std::uint8_t, 4>, 4>;

void add_round_key(State& s, const std::uint8_t* rk) {
    for (int c = 0; c < 4; ++c) {
        for (int r = 0; r < 4; ++r) s[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)] ^= rk[4 * c + r];
    }
}

void sub_bytes(State& s) {
    for (auto& row : s) {
        for (auto& b : row) b = sbox(b);
    }
}

void shift_rows(State& s) {
    for (int r = 1; r < 4; ++r) {
        std::array<std::uint8_t, 4> row{};
        for (int c = 0; c < 4; ++c) {
            row[static_cast<std::size_t>(c)] = s[static_cast<std::size_t>(r)][static_cast<std::size_t>((c + r) % 4)];
        }
        s[static_cast<std::size_t>(r)] = row;
    }
}

void mix_columns(State& s) {
    for (int c = 0; c < 4; ++c) {
        std::array<std::uint8_t, 4> col{};
        for (int r = 0; r < 4; ++r) col[static_cast<std::size_t>(r)] = s[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
        static constexpr std::uint8_t m[4][4] = {
            {2, 3, 1, 1}, {1, 2, 3, 1}, {1, 1, 2, 3}, {3, 1, 1, 2}};
        for (int r = 0; r < 4; ++r) {
            std::uint8_t v = 0;
            for (int k = 0; k < 4; ++k) v ^= gf_mul(m[r][k], col[static_cast<std::size_t>(k)]);
            s[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)] = v;
        }
    }
}

std::array<std::uint8_t, 176> expand_key(const std::vector<std::uint8_t>& key) {
    std::array<std::uint8_t, 176> rk{};
    for (int i = 0; i < 16; ++i) rk[static_cast<std::size_t>(i)] = key[static_cast<std::size_t>(i)];
    std::uint8_t rcon = 1;
    for (int i = 16; i < 176; i += 4) {
        std::uint8_t t[4];
        for (int k = 0; k < 4; ++k) t[k] = rk[static_cast<std::size_t>(i - 4 + k)];
        if (i % 16 == 0) {
            const std::uint8_t tmp = t[0];
            t[0] = static_cast<std::uint8_t>(sbox(t[1]) ^ rcon);
            t[1] = sbox(t[2]);
            t[2] = sbox(t[3]);
            t[3] = sbox(tmp);
            rcon = gf_mul(rcon, 2);
        }
        for (int k = 0; k < 4; ++k) {
            rk[static_cast<std::size_t>(i + k)] = rk[static_cast<std::size_t>(i - 16 + k)] ^ t[k];
        }
    }
    return rk;
}

}  // namespace

std::vector<std::uint8_t> encrypt_ecb(const std::vector<std::uint8_t>& plaintext,
                                      const std::vector<std::uint8_t>& key16) {
    if (key16.size() != 16 || plaintext.size() % 16 != 0) {
        throw std::invalid_argument("aes_ref: bad input sizes");
    }
    const auto rk = expand_key(key16);
    std::vector<std::uint8_t> out(plaintext.size());
    for (std::size_t off = 0; off < plaintext.size(); off += 16) {
        State s{};
        for (int i = 0; i < 16; ++i) {
            s[static_cast<std::size_t>(i % 4)][static_cast<std::size_t>(i / 4)] =
                plaintext[off + static_cast<std::size_t>(i)];
        }
        add_round_key(s, rk.data());
        for (int round = 1; round <= 9; ++round) {
            sub_bytes(s);
            shift_rows(s);
            mix_columns(s);
            add_round_key(s, rk.data() + 16 * round);
        }
        sub_bytes(s);
        shift_rows(s);
        add_round_key(s, rk.data() + 160);
        for (int i = 0; i < 16; ++i) {
            out[off + static_cast<std::size_t>(i)] =
                s[static_cast<std::size_t>(i % 4)][static_cast<std::size_t>(i / 4)];
        }
    }
    return out;
}

}  // namespace aes_ref
