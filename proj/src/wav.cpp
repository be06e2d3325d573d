#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>

#include "percloss/errors.hpp"
#include "percloss/signal.hpp"

namespace percloss {

namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

std::uint16_t read_u16(const std::uint8_t* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

std::uint32_t read_u32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) |
         (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) |
         (static_cast<std::uint32_t>(p[3]) << 24);
}

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xFF));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i)
    out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xFF));
}

void put_tag(std::vector<std::uint8_t>& out, const char* tag) {
  out.insert(out.end(), tag, tag + 4);
}

struct Format {
  std::uint16_t code = 0;
  std::uint16_t channels = 0;
  std::uint32_t sample_rate = 0;
  std::uint16_t bits = 0;
};

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path,
                const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

std::vector<std::uint8_t> wav_header(std::uint16_t code, std::uint16_t bits,
                                     std::uint32_t data_bytes) {
  std::vector<std::uint8_t> out;
  const std::uint16_t block_align = bits / 8;
  put_tag(out, "RIFF");
  put_u32(out, 36 + data_bytes);
  put_tag(out, "WAVE");
  put_tag(out, "fmt ");
  put_u32(out, 16);
  put_u16(out, code);
  put_u16(out, 1);
  put_u32(out, kSampleRate);
  put_u32(out, kSampleRate * block_align);
  put_u16(out, block_align);
  put_u16(out, bits);
  put_tag(out, "data");
  put_u32(out, data_bytes);
  return out;
}

}  // namespace

Signal load_wav(const std::filesystem::path& path, Diagnostics* diagnostics) {
  const auto bytes = read_file(path);
  const std::string name = path.string();
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
    throw FormatError(name + ": not a RIFF/WAVE file");

  Format fmt;
  bool have_fmt = false;
  const std::uint8_t* data = nullptr;
  std::size_t data_size = 0;

  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const std::uint8_t* chunk = bytes.data() + pos;
    const std::size_t size = read_u32(chunk + 4);
    const std::size_t body = pos + 8;
    const std::size_t avail = std::min(size, bytes.size() - body);
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (avail < 16) throw FormatError(name + ": truncated fmt chunk");
      const std::uint8_t* f = bytes.data() + body;
      fmt.code = read_u16(f);
      fmt.channels = read_u16(f + 2);
      fmt.sample_rate = read_u32(f + 4);
      fmt.bits = read_u16(f + 14);
      if (fmt.code == kFormatExtensible) {
        if (avail < 26) throw FormatError(name + ": truncated extensible fmt");
        fmt.code = read_u16(f + 24);  // first two bytes of the subformat GUID
      }
      have_fmt = true;
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      data = bytes.data() + body;
      data_size = avail;
    }
    pos = body + size + (size & 1);
  }

  if (!have_fmt) throw FormatError(name + ": missing fmt chunk");
  if (data == nullptr) throw FormatError(name + ": missing data chunk");
  const bool pcm16 = fmt.code == kFormatPcm && fmt.bits == 16;
  const bool float32 = fmt.code == kFormatFloat && fmt.bits == 32;
  if (!pcm16 && !float32)
    throw FormatError(name + ": unsupported codec (format " +
                      std::to_string(fmt.code) + ", " +
                      std::to_string(fmt.bits) +
                      " bits); expected PCM-16 or float-32");
  if (fmt.channels == 0) throw FormatError(name + ": zero channels");
  if (fmt.sample_rate != static_cast<std::uint32_t>(kSampleRate))
    throw FormatError(name + ": sample rate " +
                      std::to_string(fmt.sample_rate) +
                      " Hz, expected 16000 Hz (no resampling is done)");

  const std::size_t stride = static_cast<std::size_t>(fmt.bits / 8) * fmt.channels;
  const std::size_t count = data_size / stride;
  if (count == 0) throw FormatError(name + ": no audio samples");
  if (fmt.channels > 1 && diagnostics != nullptr)
    diagnostics->warnings.push_back(name + ": " + std::to_string(fmt.channels) +
                                    " channels, using channel 0");

  Signal signal;
  signal.samples.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    const std::uint8_t* p = data + i * stride;
    if (pcm16) {
      const auto v = static_cast<std::int16_t>(read_u16(p));
      signal.samples[i] = static_cast<double>(v) / 32768.0;
    } else {
      const float v = std::bit_cast<float>(read_u32(p));
      if (!std::isfinite(v))
        throw FormatError(name + ": non-finite sample at index " +
                          std::to_string(i));
      signal.samples[i] = static_cast<double>(v);
    }
  }
  return signal;
}

void save_wav_float(const std::filesystem::path& path, const Signal& signal,
                    Diagnostics* diagnostics) {
  const auto data_bytes = static_cast<std::uint32_t>(signal.size() * 4);
  auto out = wav_header(kFormatFloat, 32, data_bytes);
  double peak = 0.0;
  for (double x : signal.samples) {
    if (!std::isfinite(x)) throw InvalidArgument("non-finite sample in output");
    peak = std::max(peak, std::abs(x));
    put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(x)));
  }
  if (peak > 1.0 && diagnostics != nullptr)
    diagnostics->warnings.push_back(path.string() + ": peak " +
                                    std::to_string(peak) +
                                    " exceeds full scale, written unclipped");
  write_file(path, out);
}

void save_wav_pcm16(const std::filesystem::path& path, const Signal& signal) {
  const auto data_bytes = static_cast<std::uint32_t>(signal.size() * 2);
  auto out = wav_header(kFormatPcm, 16, data_bytes);
  for (double x : signal.samples) {
    const double q = std::clamp(std::round(x * 32768.0), -32768.0, 32767.0);
    put_u16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(q)));
  }
  write_file(path, out);
}

}  // namespace percloss
