#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "percloss/errors.hpp"
#include "percloss/pesq.hpp"

namespace percloss {

namespace detail {
extern const char kPesqTablesText[];
}

namespace {

constexpr std::string_view kChecksumHeader = "[checksum]";

using Sections = std::map<std::string, std::vector<std::string>, std::less<>>;

Sections split_sections(std::string_view text) {
  Sections sections;
  std::string current;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto first = line.find_first_not_of(" \t");
    if (first == std::string::npos || line[first] == '#') continue;
    if (line[first] == '[') {
      const auto close = line.find(']', first);
      if (close == std::string::npos)
        throw FormatError("pesq tables: unterminated section header: " + line);
      current = line.substr(first + 1, close - first - 1);
      if (sections.contains(current))
        throw FormatError("pesq tables: duplicate section [" + current + "]");
      sections[current];
      continue;
    }
    if (current.empty())
      throw FormatError("pesq tables: data outside any section");
    if (current == "revision") {
      sections[current].push_back(line.substr(first));
      continue;
    }
    std::istringstream tokens(line);
    std::string token;
    while (tokens >> token) sections[current].push_back(token);
  }
  return sections;
}

const std::vector<std::string>& section(const Sections& s, std::string_view name) {
  const auto it = s.find(name);
  if (it == s.end())
    throw FormatError("pesq tables: missing section [" + std::string(name) + "]");
  return it->second;
}

double to_number(const std::string& token, std::string_view name) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(token, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != token.size() || !std::isfinite(v))
    throw FormatError("pesq tables: bad number '" + token + "' in [" +
                      std::string(name) + "]");
  return v;
}

BarkFrame band_values(const Sections& s, std::string_view name) {
  const auto& tokens = section(s, name);
  if (tokens.size() != kBarkBands)
    throw FormatError("pesq tables: [" + std::string(name) + "] has " +
                      std::to_string(tokens.size()) + " entries, expected 49");
  BarkFrame out{};
  for (std::size_t i = 0; i < kBarkBands; ++i) {
    out[i] = to_number(tokens[i], name);
    if (!(out[i] > 0.0))
      throw FormatError("pesq tables: [" + std::string(name) +
                        "] entries must be positive");
  }
  return out;
}

double scalar(const Sections& s, std::string_view name) {
  const auto& tokens = section(s, name);
  if (tokens.size() != 1)
    throw FormatError("pesq tables: [" + std::string(name) +
                      "] must hold one value");
  return to_number(tokens[0], name);
}

}  // namespace

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xCBF29CE484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001B3ull;
  }
  return h;
}

PesqTables PesqTables::parse(std::string_view text) {
  auto marker = text.find(std::string("\n") + std::string(kChecksumHeader));
  if (marker == std::string_view::npos)
    throw FormatError("pesq tables: missing [checksum] section");
  const std::string_view body = text.substr(0, marker + 1);

  const Sections s = split_sections(text);
  const auto& sum = section(s, "checksum");
  if (sum.size() != 2 || sum[0] != "fnv1a64")
    throw FormatError("pesq tables: checksum must read 'fnv1a64 <hex>'");
  std::uint64_t expected = 0;
  try {
    expected = std::stoull(sum[1], nullptr, 16);
  } catch (const std::exception&) {
    throw FormatError("pesq tables: unreadable checksum '" + sum[1] + "'");
  }
  if (fnv1a64(body) != expected)
    throw FormatError("pesq tables: checksum mismatch");

  PesqTables t;
  t.version = static_cast<int>(scalar(s, "version"));
  const auto& rev = section(s, "revision");
  t.revision = rev.empty() ? std::string() : rev.front();

  const auto& bins_tokens = section(s, "bins_per_band");
  if (bins_tokens.size() != kBarkBands)
    throw FormatError("pesq tables: [bins_per_band] needs 49 entries");
  std::array<std::size_t, kBarkBands> bins{};
  t.band_edges[0] = 0;
  for (std::size_t i = 0; i < kBarkBands; ++i) {
    const double v = to_number(bins_tokens[i], "bins_per_band");
    if (v < 1.0 || v != std::floor(v))
      throw FormatError("pesq tables: [bins_per_band] entries must be positive integers");
    bins[i] = static_cast<std::size_t>(v);
    t.band_edges[i + 1] = t.band_edges[i] + bins[i];
  }
  if (t.band_edges.back() != kWindowLength / 2)
    throw FormatError("pesq tables: bands must cover the 256 bins below Nyquist");

  const BarkFrame width_bark = band_values(s, "band_width_bark");
  const BarkFrame threshold_ref = band_values(s, "hearing_threshold");
  const BarkFrame correction = band_values(s, "power_correction");
  const double power_scale = scalar(s, "power_scale");
  const double loudness_scale = scalar(s, "loudness_scale");
  const double silence_factor = scalar(s, "silence_factor");
  t.zwicker_power = scalar(s, "zwicker_power");
  if (!(power_scale > 0.0 && loudness_scale > 0.0 && silence_factor > 0.0 &&
        t.zwicker_power > 0.0))
    throw FormatError("pesq tables: scalars must be positive");

  // The reference tables act on power densities of 16-bit-scale audio whose
  // mean square is 1e7. Here level alignment instead sets the in-band bin
  // power sum to 1e7, and Bark powers are bin means, so a reference power
  // equals unit[i] times ours. For a band-limited stationary signal, the
  // one-sided in-band sum of a Hann-windowed N-point DFT is
  // (N/2) * sum(w^2) * sigma^2 = 3 N^2 / 16 * sigma^2.
  const double n = static_cast<double>(kWindowLength);
  const double level_ratio = 3.0 * n * n / 16.0;
  for (std::size_t i = 0; i < kBarkBands; ++i) {
    const double unit = level_ratio * power_scale * correction[i] *
                        static_cast<double>(bins[i]);
    t.hearing_threshold[i] = threshold_ref[i] / unit;
    t.silence_clean[i] = silence_factor * t.hearing_threshold[i];
    t.silence_noisy[i] = t.silence_clean[i];
    t.band_weight[i] = width_bark[i];
    t.loudness_scale[i] = loudness_scale * std::pow(unit, t.zwicker_power);
  }
  return t;
}

PesqTables PesqTables::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open pesq tables " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

std::string_view PesqTables::builtin_text() { return detail::kPesqTablesText; }

const PesqTables& PesqTables::builtin() {
  static const PesqTables tables = parse(builtin_text());
  return tables;
}

}  // namespace percloss
