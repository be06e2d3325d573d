#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

namespace testing {

inline std::vector<double> random_vector(std::size_t n, std::uint64_t seed,
                                         double scale = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, scale);
  std::vector<double> v(n);
  for (double& x : v) x = g(rng);
  return v;
}

// Band-limited noise plus a tone: a smooth generic test signal.
inline std::vector<double> tone_and_noise(std::size_t n, std::uint64_t seed) {
  auto v = random_vector(n, seed, 0.02);
  double prev = 0.0;
  for (double& x : v) {
    prev = 0.7 * prev + x;
    x = prev;
  }
  for (std::size_t i = 0; i < n; ++i)
    v[i] += 0.1 * std::sin(2.0 * std::numbers::pi * 440.0 * static_cast<double>(i) / 16000.0);
  return v;
}

inline std::filesystem::path temp_dir(const std::string& tag) {
  auto dir = std::filesystem::temp_directory_path() /
             ("percloss_" + tag + "_" + std::to_string(::getpid()));
  std::filesystem::create_directories(dir);
  return dir;
}

inline void put_u32(std::ofstream& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.put(static_cast<char>((v >> (8 * i)) & 0xff));
}
inline void put_u16(std::ofstream& out, std::uint16_t v) {
  out.put(static_cast<char>(v & 0xff));
  out.put(static_cast<char>(v >> 8));
}

// Minimal PCM-16 WAV writer, independent of the library.
inline void write_pcm16(const std::filesystem::path& path,
                        const std::vector<std::int16_t>& interleaved, int rate,
                        int channels) {
  std::ofstream out(path, std::ios::binary);
  const auto data_bytes = static_cast<std::uint32_t>(interleaved.size() * 2);
  out.write("RIFF", 4);
  put_u32(out, 36 + data_bytes);
  out.write("WAVEfmt ", 8);
  put_u32(out, 16);
  put_u16(out, 1);
  put_u16(out, static_cast<std::uint16_t>(channels));
  put_u32(out, static_cast<std::uint32_t>(rate));
  put_u32(out, static_cast<std::uint32_t>(rate * channels * 2));
  put_u16(out, static_cast<std::uint16_t>(channels * 2));
  put_u16(out, 16);
  out.write("data", 4);
  put_u32(out, data_bytes);
  for (std::int16_t s : interleaved) put_u16(out, static_cast<std::uint16_t>(s));
}

// Direct DFT of one frame, e^{-i} kernel, bins 0..n/2.
inline std::vector<std::complex<double>> direct_dft(const std::vector<double>& frame) {
  const std::size_t n = frame.size();
  std::vector<std::complex<double>> out(n / 2 + 1);
  for (std::size_t k = 0; k <= n / 2; ++k) {
    std::complex<double> acc = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
      const double ang = -2.0 * std::numbers::pi * static_cast<double>(k * t % n) /
                         static_cast<double>(n);
      acc += frame[t] * std::complex<double>(std::cos(ang), std::sin(ang));
    }
    out[k] = acc;
  }
  return out;
}

}  // namespace testing
