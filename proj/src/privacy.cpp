#include "cvqkd/privacy.hpp"

#include <cmath>

namespace cvqkd {

std::uint64_t secret_length(std::uint64_t n_symbols, std::uint32_t m_slices,
                            const LeakageLedger& ledger, double i_be_secure,
                            std::uint32_t safety_bits) {
  if (n_symbols == 0) return 0;
  const double per_symbol = static_cast<double>(ledger.disclosed_bits) /
                            static_cast<double>(n_symbols);
  const double retained =
      std::max(0.0, static_cast<double>(m_slices) - per_symbol);
  const double raw =
      std::floor(static_cast<double>(n_symbols) * (retained - i_be_secure));
  const double with_safety = raw - static_cast<double>(safety_bits);
  return with_safety > 0.0 ? static_cast<std::uint64_t>(with_safety) : 0;
}

std::vector<std::uint8_t> pack_bit_vector(
    const std::vector<std::uint8_t>& bits) {
  std::vector<std::uint8_t> out((bits.size() + 7) / 8, 0);
  for (std::size_t i = 0; i < bits.size(); ++i)
    if (bits[i]) out[i / 8] |= static_cast<std::uint8_t>(1u << (i % 8));
  return out;
}

SecretKey compress(const std::vector<std::uint8_t>& input_bits,
                   const std::vector<std::uint8_t>& seed_bits,
                   std::uint64_t out_bits) {
  const std::uint64_t n = input_bits.size();
  if (out_bits > n)
    throw InvalidArgument("compress: output longer than input");
  SecretKey key;
  key.length = out_bits;
  key.bytes.assign((out_bits + 7) / 8, 0);
  if (out_bits == 0) return key;
  if (seed_bits.size() != n + out_bits - 1)
    throw InvalidArgument("compress: seed must hold n + l - 1 bits");

  // Pack both operands into words; output bit j is
  // parity( AND_i input[i] & seed[j + i] ), a sliding-window dot product
  // over GF(2). The seed window is walked word-at-a-time.
  const std::uint64_t words = (n + 63) / 64;
  std::vector<std::uint64_t> in_w(words, 0);
  for (std::uint64_t i = 0; i < n; ++i)
    if (input_bits[i]) in_w[i / 64] |= 1ULL << (i % 64);
  const std::uint64_t seed_len = seed_bits.size();
  const std::uint64_t seed_words = (seed_len + 63) / 64 + 1;
  std::vector<std::uint64_t> seed_w(seed_words, 0);
  for (std::uint64_t i = 0; i < seed_len; ++i)
    if (seed_bits[i]) seed_w[i / 64] |= 1ULL << (i % 64);

  auto seed_word_at = [&](std::uint64_t bit_off) -> std::uint64_t {
    const std::uint64_t w = bit_off / 64, sh = bit_off % 64;
    std::uint64_t v = seed_w[w] >> sh;
    if (sh != 0 && w + 1 < seed_words) v |= seed_w[w + 1] << (64 - sh);
    return v;
  };

  for (std::uint64_t j = 0; j < out_bits; ++j) {
    std::uint64_t acc = 0;
    for (std::uint64_t w = 0; w < words; ++w) {
      std::uint64_t mask = in_w[w];
      if (w == words - 1 && n % 64 != 0) mask &= (1ULL << (n % 64)) - 1;
      acc ^= mask & seed_word_at(j + w * 64);
    }
    if (__builtin_parityll(acc))
      key.bytes[j / 8] |= static_cast<std::uint8_t>(1u << (j % 8));
  }
  key.confirmation_tag = key_tag(key);
  return key;
}

std::uint64_t key_tag(const SecretKey& key) {
  std::uint64_t h = hash64(&key.length, sizeof(key.length));
  return hash64_append(h, key.bytes.data(), key.bytes.size());
}

bool confirm_keys(const SecretKey& a, const SecretKey& b) {
  return key_tag(a) == key_tag(b);
}

}  // namespace cvqkd
