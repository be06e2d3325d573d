#pragma once

#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

namespace percloss {

// Deterministic speech-like test material. Every generator is a pure function
// of its seed.

// Syllable-rate amplitude-modulated harmonic tones with formant shaping,
// band-pass noise bursts and a low broadband floor. RMS 0.05. When
// duration_s is 0 the length is drawn from [2, 4] s by the seed.
std::vector<double> clean_proxy(std::uint64_t seed, double duration_s = 0.0);

enum class NoiseType { White, Pink, Babble };

inline constexpr NoiseType kAllNoiseTypes[] = {NoiseType::White, NoiseType::Pink,
                                               NoiseType::Babble};

std::string_view noise_name(NoiseType type);
std::optional<NoiseType> parse_noise_name(std::string_view name);

// Noise of the requested type and length. Babble is a sum of delayed clean
// proxies drawn from the seed.
std::vector<double> make_noise(NoiseType type, std::size_t length, std::uint64_t seed);

}  // namespace percloss
