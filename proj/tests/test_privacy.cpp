#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "cvqkd/privacy.hpp"
#include "cvqkd/rates.hpp"
#include "cvqkd/rng.hpp"

using namespace cvqkd;

namespace {

LeakageLedger ledger_with(std::uint64_t n, std::uint32_t m,
                          double disclosed_per_symbol) {
  LeakageLedger ledger;
  ledger.per_slice.assign(m + 1, 0);
  ledger.n_symbols = n;
  ledger.add(0, static_cast<std::uint64_t>(disclosed_per_symbol * n));
  return ledger;
}

std::vector<std::uint8_t> random_bits(std::size_t n, Rng& rng) {
  std::vector<std::uint8_t> bits(n);
  for (auto& b : bits) b = rng.coin();
  return bits;
}

// reference implementation: explicit matrix-vector product over GF(2)
// with the diagonal-constant matrix T[j][i] = seed[j + i]
std::vector<std::uint8_t> toeplitz_oracle(
    const std::vector<std::uint8_t>& input,
    const std::vector<std::uint8_t>& seed, std::size_t out_bits) {
  std::vector<std::uint8_t> out(out_bits, 0);
  for (std::size_t j = 0; j < out_bits; ++j) {
    std::uint8_t acc = 0;
    for (std::size_t i = 0; i < input.size(); ++i)
      acc ^= input[i] & seed[j + i];
    out[j] = acc;
  }
  return out;
}

}  // namespace

TEST_CASE("no advantage means no key") {
  const auto ledger = ledger_with(40000, 5, 3.0);  // retained 2.0
  CHECK(secret_length(40000, 5, ledger, 2.5, 128) == 0);
  CHECK(secret_length(40000, 5, ledger, 2.0, 128) == 0);
}

TEST_CASE("secret length at the reference point") {
  // retained chosen so the net rate is 0.75 i_ab - i_be
  const double iab = i_ab(40, 1, 0.06, 0.6);
  const double ibe = i_be_max(40, 1, 0.06, 0.6);
  const std::uint64_t n = 40000;
  const auto ledger = ledger_with(n, 5, 5.0 - 0.75 * iab);
  const std::uint64_t ell = secret_length(n, 5, ledger, ibe, 128);
  // floor(n (0.75 i_ab - i_be)) - 128, evaluated exactly
  const double retained =
      5.0 - static_cast<double>(ledger.disclosed_bits) / n;
  const std::uint64_t expect = static_cast<std::uint64_t>(
      std::floor(n * (retained - ibe)) - 128.0);
  CHECK(ell == expect);
  CHECK(ell > 33000);
  CHECK(ell < 35000);
}

TEST_CASE("interception leaves nothing to distill") {
  const double iab = i_ab(40, 1, 2.0, 0.6);
  const double ibe = i_be_max(40, 1, 2.0, 0.6);
  const auto ledger = ledger_with(40000, 5, 5.0 - 0.75 * iab);
  CHECK(secret_length(40000, 5, ledger, ibe, 128) == 0);
}

TEST_CASE("secret length shrinks with the adversary bound and the ledger") {
  const std::uint64_t n = 10000;
  std::uint64_t prev = secret_length(n, 5, ledger_with(n, 5, 2.0), 0.5, 128);
  for (double ibe : {0.7, 0.9, 1.2, 1.8}) {
    const std::uint64_t cur = secret_length(n, 5, ledger_with(n, 5, 2.0), ibe, 128);
    CHECK(cur <= prev);
    prev = cur;
  }
  prev = secret_length(n, 5, ledger_with(n, 5, 1.0), 0.5, 128);
  for (double leak : {1.5, 2.0, 3.0, 4.0}) {
    const std::uint64_t cur =
        secret_length(n, 5, ledger_with(n, 5, leak), 0.5, 128);
    CHECK(cur <= prev);
    prev = cur;
  }
}

TEST_CASE("zero-length compression yields an empty key") {
  Rng rng(1);
  const auto input = random_bits(256, rng);
  const SecretKey key = compress(input, random_bits(255, rng), 0);
  CHECK(key.length == 0);
  CHECK(key.bytes.empty());
}

TEST_CASE("compression validates its inputs") {
  Rng rng(2);
  const auto input = random_bits(64, rng);
  CHECK_THROWS_AS(compress(input, random_bits(64 + 32 - 1, rng), 128),
                  InvalidArgument);
  CHECK_THROWS_AS(compress(input, random_bits(10, rng), 32), InvalidArgument);
}

TEST_CASE("golden vector: alternating input, all-ones seed") {
  // frozen from the matrix-product oracle: every output bit is the parity
  // of the 64 ones in the input, i.e. zero
  std::vector<std::uint8_t> input(128);
  for (std::size_t i = 0; i < input.size(); ++i) input[i] = (0xAA >> (i % 8)) & 1;
  const std::vector<std::uint8_t> seed(128 + 32 - 1, 1);
  const SecretKey key = compress(input, seed, 32);
  REQUIRE(key.length == 32);
  CHECK(key.bytes == std::vector<std::uint8_t>{0x00, 0x00, 0x00, 0x00});
  const auto oracle = toeplitz_oracle(input, seed, 32);
  for (std::size_t j = 0; j < 32; ++j) CHECK(key.bit(j) == (oracle[j] != 0));
}

TEST_CASE("golden vector: structured seed") {
  std::vector<std::uint8_t> input(128);
  for (std::size_t i = 0; i < input.size(); ++i) input[i] = (0xAA >> (i % 8)) & 1;
  std::vector<std::uint8_t> seed(128 + 32 - 1);
  for (std::size_t i = 0; i < seed.size(); ++i) seed[i] = (i * 7 + 3) % 5 < 2;
  const SecretKey key = compress(input, seed, 32);
  const auto oracle = toeplitz_oracle(input, seed, 32);
  for (std::size_t j = 0; j < 32; ++j) CHECK(key.bit(j) == (oracle[j] != 0));
  // frozen once from the oracle
  CHECK(key.bytes == std::vector<std::uint8_t>{0xa5, 0x94, 0x52, 0x4a});
}

TEST_CASE("compression agrees with the matrix oracle on random cases") {
  Rng rng(3);
  for (int rep = 0; rep < 50; ++rep) {
    const std::size_t n = 64 + rng.below(200);
    const std::size_t ell = 1 + rng.below(n);
    const auto input = random_bits(n, rng);
    const auto seed = random_bits(n + ell - 1, rng);
    const SecretKey key = compress(input, seed, ell);
    const auto oracle = toeplitz_oracle(input, seed, ell);
    for (std::size_t j = 0; j < ell; ++j)
      REQUIRE(key.bit(j) == (oracle[j] != 0));
  }
}

TEST_CASE("identical inputs produce identical keys") {
  Rng rng(4);
  const auto input = random_bits(1000, rng);
  const auto seed = random_bits(1000 + 100 - 1, rng);
  const SecretKey a = compress(input, seed, 100);
  const SecretKey b = compress(input, seed, 100);
  CHECK(a.bytes == b.bytes);
  CHECK(confirm_keys(a, b));
}

TEST_CASE("collision rate respects the universal-hash bound") {
  Rng rng(5);
  const auto x = random_bits(96, rng);
  auto y = x;
  y[17] ^= 1;
  y[60] ^= 1;
  for (std::size_t ell : {8, 12, 16}) {
    int collisions = 0;
    const int trials = 10000;
    for (int t = 0; t < trials; ++t) {
      const auto seed = random_bits(96 + ell - 1, rng);
      if (compress(x, seed, ell).bytes == compress(y, seed, ell).bytes)
        ++collisions;
    }
    CHECK(static_cast<double>(collisions) / trials <=
          2.0 * std::pow(2.0, -static_cast<double>(ell)));
  }
}

TEST_CASE("output bits stay balanced over random seeds") {
  Rng rng(6);
  const auto input = random_bits(128, rng);
  const int trials = 4000;
  std::vector<int> ones(16, 0);
  for (int t = 0; t < trials; ++t) {
    const auto seed = random_bits(128 + 16 - 1, rng);
    const SecretKey key = compress(input, seed, 16);
    for (std::size_t j = 0; j < 16; ++j) ones[j] += key.bit(j);
  }
  const double bound = 4.0 * std::sqrt(trials / 4.0);
  for (int j = 0; j < 16; ++j)
    CHECK(std::fabs(ones[j] - trials / 2.0) < bound);
}

TEST_CASE("one flipped bit breaks confirmation") {
  Rng rng(7);
  const auto input = random_bits(512, rng);
  const auto seed = random_bits(512 + 64 - 1, rng);
  const SecretKey a = compress(input, seed, 64);
  SecretKey b = a;
  b.bytes[3] ^= 0x10;
  CHECK(!confirm_keys(a, b));
}

TEST_CASE("empty keys confirm vacuously") {
  SecretKey a, b;
  CHECK(confirm_keys(a, b));
  CHECK(a.length == 0);
}
