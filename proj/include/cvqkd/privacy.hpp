#ifndef CVQKD_PRIVACY_HPP
#define CVQKD_PRIVACY_HPP

#include <cstdint>
#include <vector>

#include "cvqkd/core.hpp"
#include "cvqkd/reconciliation.hpp"

namespace cvqkd {

struct SecretKey {
  std::vector<std::uint8_t> bytes;  // ceil(length/8), LSB-first packing
  std::uint64_t length = 0;         // bits
  std::uint64_t confirmation_tag = 0;

  bool bit(std::uint64_t i) const {
    return (bytes[i / 8] >> (i % 8)) & 1u;
  }
};

/// Secret length after subtracting the eavesdropper bound and the safety
/// deduction: max(0, floor(n * retained_per_symbol - n * i_be_secure) -
/// safety_bits), with retained taken from the ledger.
std::uint64_t secret_length(std::uint64_t n_symbols, std::uint32_t m_slices,
                            const LeakageLedger& ledger, double i_be_secure,
                            std::uint32_t safety_bits);

/// Toeplitz (diagonal-constant) hash over GF(2). seed_bits must hold
/// input_bits + out_bits - 1 bits; output bit j is the parity of the
/// input masked by the seed window starting at j.
SecretKey compress(const std::vector<std::uint8_t>& input_bits,
                   const std::vector<std::uint8_t>& seed_bits,
                   std::uint64_t out_bits);

/// Packs one bit per byte into the LSB-first byte layout used by
/// SecretKey and the wire.
std::vector<std::uint8_t> pack_bit_vector(
    const std::vector<std::uint8_t>& bits);

/// 64-bit unkeyed hash of a key, for the confirmation exchange.
std::uint64_t key_tag(const SecretKey& key);

/// Compares two locally held keys the way the endpoints do over the wire:
/// equal tags. Empty keys compare equal but flag the session as aborted
/// upstream.
bool confirm_keys(const SecretKey& a, const SecretKey& b);

}  // namespace cvqkd

#endif
