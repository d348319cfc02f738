#include "cpdm/wavedump.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

namespace cpdm {

namespace {
constexpr char kMagic[8] = {'C', 'P', 'D', 'M', 'W', 'A', 'V', 'E'};
}

void write_waveform(const std::string& path, const ComplexWaveform& w) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("write_waveform: cannot open " + path);
  f.write(kMagic, 8);
  const double rate = w.sample_rate;
  f.write(reinterpret_cast<const char*>(&rate), 8);
  const uint64_t n = static_cast<uint64_t>(w.size());
  f.write(reinterpret_cast<const char*>(&n), 8);
  const char reserved[8] = {};
  f.write(reserved, 8);
  for (Index i = 0; i < w.size(); ++i) {
    const double re = w.samples[i].real(), im = w.samples[i].imag();
    f.write(reinterpret_cast<const char*>(&re), 8);
    f.write(reinterpret_cast<const char*>(&im), 8);
  }
  if (!f) throw std::runtime_error("write_waveform: write failed for " + path);
}

ComplexWaveform read_waveform(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("read_waveform: cannot open " + path);
  char magic[8];
  f.read(magic, 8);
  if (!f || std::memcmp(magic, kMagic, 8) != 0)
    throw std::runtime_error("read_waveform: bad magic in " + path);
  ComplexWaveform w;
  uint64_t n = 0;
  f.read(reinterpret_cast<char*>(&w.sample_rate), 8);
  f.read(reinterpret_cast<char*>(&n), 8);
  f.ignore(8);
  w.samples.resize(static_cast<Index>(n));
  for (uint64_t i = 0; i < n; ++i) {
    double re = 0, im = 0;
    f.read(reinterpret_cast<char*>(&re), 8);
    f.read(reinterpret_cast<char*>(&im), 8);
    w.samples[static_cast<Index>(i)] = cd(re, im);
  }
  if (!f) throw std::runtime_error("read_waveform: truncated file " + path);
  return w;
}

}  // namespace cpdm
