#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

namespace offemma {

// SHA-256 of the given bytes as a lowercase hex string.
std::string sha256_hex(std::string_view bytes);

// Shortest decimal string that round-trips the double exactly.
std::string format_double(double value);

// Fixed-point formatting with half-up rounding at the last digit,
// e.g. format_fixed(2.0 / 3.0 * 100.0, 2) == "66.67".
std::string format_fixed(double value, int decimals);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view bytes);

// splitmix64 step; mutates the state and returns the next value.
uint64_t splitmix64(uint64_t& state);

// FNV-1a fold of salt bytes into a seed; decorrelates RNG streams.
uint64_t mix_seed(uint64_t seed, std::string_view salt);

// Uniform double in [0, 1) from a splitmix64 stream.
double splitmix_unit(uint64_t& state);

std::string base64_encode(std::string_view bytes);

}  // namespace offemma
