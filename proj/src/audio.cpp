#include "mga/audio.hpp"

#include <cstring>
#include <fstream>

namespace mga {

namespace {

uint32_t read_u32(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (!in) throw IoError("unexpected end of WAV file");
  return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
         (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}

uint16_t read_u16(std::istream& in) {
  unsigned char b[2];
  in.read(reinterpret_cast<char*>(b), 2);
  if (!in) throw IoError("unexpected end of WAV file");
  return static_cast<uint16_t>(b[0] | (b[1] << 8));
}

void write_u32(std::ostream& out, uint32_t v) {
  char b[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
               static_cast<char>((v >> 16) & 0xff),
               static_cast<char>((v >> 24) & 0xff)};
  out.write(b, 4);
}

void write_u16(std::ostream& out, uint16_t v) {
  char b[2] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff)};
  out.write(b, 2);
}

}  // namespace

WavData load_wav(const std::string& path, int expected_rate) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open WAV file: " + path);

  char tag[4];
  in.read(tag, 4);
  if (!in || std::memcmp(tag, "RIFF", 4) != 0)
    throw IoError(path + ": not a RIFF file");
  read_u32(in);  // riff size
  in.read(tag, 4);
  if (!in || std::memcmp(tag, "WAVE", 4) != 0)
    throw IoError(path + ": not a WAVE file");

  bool have_fmt = false;
  uint16_t format = 0, channels = 0, bits = 0;
  uint32_t rate = 0;
  WavData wav;

  while (in.read(tag, 4)) {
    uint32_t chunk_size = read_u32(in);
    if (std::memcmp(tag, "fmt ", 4) == 0) {
      format = read_u16(in);
      channels = read_u16(in);
      rate = read_u32(in);
      read_u32(in);  // byte rate
      read_u16(in);  // block align
      bits = read_u16(in);
      if (chunk_size > 16) in.seekg(chunk_size - 16, std::ios::cur);
      have_fmt = true;
    } else if (std::memcmp(tag, "data", 4) == 0) {
      if (!have_fmt) throw IoError(path + ": data chunk before fmt chunk");
      if (format != 1) throw IoError(path + ": unsupported encoding (want PCM)");
      if (channels != 1) throw IoError(path + ": unsupported channel count " +
                                       std::to_string(channels) + " (want mono)");
      if (bits != 16) throw IoError(path + ": unsupported sample width " +
                                    std::to_string(bits) + " (want 16-bit)");
      if (expected_rate > 0 && static_cast<int>(rate) != expected_rate)
        throw IoError(path + ": unsupported sample rate " + std::to_string(rate) +
                      " (want " + std::to_string(expected_rate) + ")");
      const uint32_t n = chunk_size / 2;
      wav.samples.resize(n);
      std::vector<char> raw(chunk_size);
      in.read(raw.data(), chunk_size);
      if (!in) throw IoError(path + ": truncated data chunk");
      for (uint32_t i = 0; i < n; ++i) {
        const int16_t s = static_cast<int16_t>(
            static_cast<unsigned char>(raw[2 * i]) |
            (static_cast<unsigned char>(raw[2 * i + 1]) << 8));
        wav.samples[i] = static_cast<double>(s) / 32768.0;
      }
      wav.sample_rate = static_cast<int>(rate);
      return wav;
    } else {
      in.seekg(chunk_size + (chunk_size & 1), std::ios::cur);
    }
  }
  throw IoError(path + ": no data chunk found");
}

void save_wav(const std::string& path, const std::vector<double>& samples,
              int sample_rate) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write WAV file: " + path);
  const uint32_t data_size = static_cast<uint32_t>(samples.size() * 2);
  out.write("RIFF", 4);
  write_u32(out, 36 + data_size);
  out.write("WAVE", 4);
  out.write("fmt ", 4);
  write_u32(out, 16);
  write_u16(out, 1);  // PCM
  write_u16(out, 1);  // mono
  write_u32(out, static_cast<uint32_t>(sample_rate));
  write_u32(out, static_cast<uint32_t>(sample_rate * 2));
  write_u16(out, 2);
  write_u16(out, 16);
  out.write("data", 4);
  write_u32(out, data_size);
  for (double s : samples) {
    double c = s < -1.0 ? -1.0 : (s > 1.0 ? 1.0 : s);
    const int16_t v = static_cast<int16_t>(std::lround(c * 32767.0));
    write_u16(out, static_cast<uint16_t>(v));
  }
  if (!out) throw IoError("short write: " + path);
}

}  // namespace mga
