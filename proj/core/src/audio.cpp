#include "attenuate/audio.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>

namespace attenuate {

double rms(std::span<const double> x) {
  if (x.empty()) return 0.0;
  double acc = 0.0;
  for (double v : x) acc += v * v;
  return std::sqrt(acc / double(x.size()));
}

double power_db(std::span<const double> x) {
  double acc = 0.0;
  for (double v : x) acc += v * v;
  const double p = x.empty() ? 0.0 : acc / double(x.size());
  return 10.0 * std::log10(std::max(p, 1e-300));
}

// ---------------------------------------------------------------------------
// WAV

namespace {

std::uint32_t rd_u32(std::istream& is) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4)) throw CorruptFileError("wav: truncated header");
  return std::uint32_t(b[0]) | (std::uint32_t(b[1]) << 8) | (std::uint32_t(b[2]) << 16) |
         (std::uint32_t(b[3]) << 24);
}

std::uint16_t rd_u16(std::istream& is) {
  unsigned char b[2];
  if (!is.read(reinterpret_cast<char*>(b), 2)) throw CorruptFileError("wav: truncated header");
  return std::uint16_t(b[0] | (b[1] << 8));
}

void wr_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

void wr_u16(std::ostream& os, std::uint16_t v) {
  unsigned char b[2] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8)};
  os.write(reinterpret_cast<const char*>(b), 2);
}

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

}  // namespace

AudioBuffer read_wav(std::istream& in) {
  char tag[4];
  if (!in.read(tag, 4) || std::memcmp(tag, "RIFF", 4) != 0) {
    throw CorruptFileError("wav: not a RIFF file");
  }
  (void)rd_u32(in);  // riff size
  if (!in.read(tag, 4) || std::memcmp(tag, "WAVE", 4) != 0) {
    throw CorruptFileError("wav: not a WAVE file");
  }

  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  bool have_fmt = false;
  std::vector<char> data;

  while (in.read(tag, 4)) {
    const std::uint32_t size = rd_u32(in);
    if (std::memcmp(tag, "fmt ", 4) == 0) {
      if (size < 16) throw CorruptFileError("wav: fmt chunk too small");
      format = rd_u16(in);
      channels = rd_u16(in);
      rate = rd_u32(in);
      (void)rd_u32(in);  // byte rate
      (void)rd_u16(in);  // block align
      bits = rd_u16(in);
      if (size > 16) {
        if (format == kFormatExtensible && size >= 40) {
          (void)rd_u16(in);                    // extension size
          (void)rd_u16(in);                    // valid bits
          (void)rd_u32(in);                    // channel mask
          format = rd_u16(in);                 // sub-format GUID starts with the code
          in.ignore(size - 16 - 2 - 2 - 4 - 2);
        } else {
          in.ignore(size - 16);
        }
      }
      have_fmt = true;
    } else if (std::memcmp(tag, "data", 4) == 0) {
      data.resize(size);
      if (!in.read(data.data(), size)) throw CorruptFileError("wav: truncated data chunk");
    } else {
      in.ignore(size + (size & 1));  // chunks are word-aligned
    }
    if (!data.empty() && have_fmt) break;
  }
  if (!have_fmt) throw CorruptFileError("wav: missing fmt chunk");
  if (channels < 1 || channels > 2) throw FormatError("wav: only mono and stereo are supported");

  const std::size_t bytes_per = bits / 8;
  if (bytes_per == 0 || data.size() % (bytes_per * channels) != 0) {
    throw CorruptFileError("wav: data size does not match the sample format");
  }
  const std::size_t frames = data.size() / (bytes_per * channels);

  AudioBuffer buf;
  buf.sample_rate = static_cast<int>(rate);
  buf.samples.resize(frames);

  auto sample_at = [&](std::size_t frame, int chan) -> double {
    const char* p = data.data() + (frame * channels + std::size_t(chan)) * bytes_per;
    if (format == kFormatPcm && bits == 16) {
      std::int16_t v;
      std::memcpy(&v, p, 2);
      return std::clamp(double(v) / 32767.0, -1.0, 1.0);
    }
    if (format == kFormatFloat && bits == 32) {
      float v;
      std::memcpy(&v, p, 4);
      return std::clamp(double(v), -1.0, 1.0);
    }
    throw FormatError("wav: only 16-bit PCM and 32-bit float are supported");
  };

  for (std::size_t f = 0; f < frames; ++f) {
    double v = sample_at(f, 0);
    if (channels == 2) v = 0.5 * (v + sample_at(f, 1));
    buf.samples[f] = v;
  }
  return buf;
}

AudioBuffer read_wav(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw CorruptFileError("wav: cannot open " + path);
  return read_wav(f);
}

void write_wav(const AudioBuffer& buf, std::ostream& out) {
  const std::uint32_t data_size = static_cast<std::uint32_t>(buf.samples.size() * 2);
  out.write("RIFF", 4);
  wr_u32(out, 36 + data_size);
  out.write("WAVE", 4);
  out.write("fmt ", 4);
  wr_u32(out, 16);
  wr_u16(out, kFormatPcm);
  wr_u16(out, 1);  // mono
  wr_u32(out, std::uint32_t(buf.sample_rate));
  wr_u32(out, std::uint32_t(buf.sample_rate) * 2);
  wr_u16(out, 2);
  wr_u16(out, 16);
  out.write("data", 4);
  wr_u32(out, data_size);
  for (double v : buf.samples) {
    const double c = std::clamp(v, -1.0, 1.0);
    const std::int16_t s = static_cast<std::int16_t>(std::lround(c * 32767.0));
    unsigned char b[2] = {static_cast<unsigned char>(std::uint16_t(s)),
                          static_cast<unsigned char>(std::uint16_t(s) >> 8)};
    out.write(reinterpret_cast<const char*>(b), 2);
  }
  if (!out) throw CorruptFileError("wav: write failed");
}

void write_wav(const AudioBuffer& buf, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw CorruptFileError("wav: cannot open " + path);
  write_wav(buf, f);
}

// ---------------------------------------------------------------------------
// mu-law

double mulaw_roundtrip_sample(double x, int bits, double mu) {
  const double k = double((1 << (bits - 1)) - 1);  // positive levels
  const double lnmu = std::log1p(mu);
  const double ax = std::min(std::abs(x), 1.0);
  const double y = std::log1p(mu * ax) / lnmu;
  double q = std::round(y * k) / k;  // midtread: 0 and 1 are exact levels
  const double dec = (std::pow(1.0 + mu, q) - 1.0) / mu;
  const double s = x < 0 ? -1.0 : 1.0;
  return s * std::min(dec, 1.0);
}

AudioBuffer mulaw_degrade(const AudioBuffer& buf, int bits, double mu) {
  if (bits < 2 || bits > 16) throw FactorError("mulaw_degrade: bits must be in [2, 16]");
  if (mu <= 0.0) throw FactorError("mulaw_degrade: mu must be positive");
  AudioBuffer out;
  out.sample_rate = buf.sample_rate;
  out.samples.resize(buf.samples.size());
  for (std::size_t i = 0; i < buf.samples.size(); ++i) {
    out.samples[i] = mulaw_roundtrip_sample(buf.samples[i], bits, mu);
  }
  return out;
}

// ---------------------------------------------------------------------------
// downsample-and-repeat

namespace {

// Hamming-windowed sinc, odd length, zero-phase application.
std::vector<double> lowpass_taps(double cutoff_norm, int half) {
  const int len = 2 * half + 1;
  std::vector<double> taps(len);
  double sum = 0.0;
  for (int i = 0; i < len; ++i) {
    const int k = i - half;
    const double x = 2.0 * cutoff_norm * k;
    const double sinc = k == 0 ? 1.0 : std::sin(std::numbers::pi * x) / (std::numbers::pi * x);
    const double win = 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * i / (len - 1));
    taps[i] = 2.0 * cutoff_norm * sinc * win;
    sum += taps[i];
  }
  for (double& t : taps) t /= sum;  // unity DC gain
  return taps;
}

}  // namespace

AudioBuffer downsample_and_repeat(const AudioBuffer& buf, int factor, bool antialias) {
  if (factor != 1 && factor != 2 && factor != 4) {
    throw FactorError("downsample_and_repeat: factor must be 1, 2 or 4");
  }
  AudioBuffer out;
  out.sample_rate = buf.sample_rate;
  if (factor == 1) {
    out.samples = buf.samples;
    return out;
  }

  const std::vector<double>* src = &buf.samples;
  std::vector<double> filtered;
  if (antialias) {
    // cutoff at 0.45 * target Nyquist = 0.45 / (2 * factor) cycles/sample
    const std::vector<double> taps = lowpass_taps(0.45 / (2.0 * factor), 32);
    const int half = int(taps.size() / 2);
    filtered.assign(buf.samples.size(), 0.0);
    const std::int64_t n = std::int64_t(buf.samples.size());
    for (std::int64_t t = 0; t < n; ++t) {
      double acc = 0.0;
      for (std::size_t i = 0; i < taps.size(); ++i) {
        const std::int64_t u = t + std::int64_t(i) - half;
        if (u >= 0 && u < n) acc += taps[i] * buf.samples[std::size_t(u)];
      }
      filtered[std::size_t(t)] = std::clamp(acc, -1.0, 1.0);
    }
    src = &filtered;
  }

  out.samples.resize(buf.samples.size());
  for (std::size_t i = 0; i < out.samples.size(); ++i) {
    out.samples[i] = (*src)[(i / std::size_t(factor)) * std::size_t(factor)];
  }
  return out;
}

AudioBuffer degrade(const AudioBuffer& buf, const DegradeSpec& spec, bool antialias) {
  if (spec.target_rate != 4000 && spec.target_rate != 8000 && spec.target_rate != 16000) {
    throw FactorError("degrade: target rate must be 4000, 8000 or 16000");
  }
  if (spec.bits != 4 && spec.bits != 8 && spec.bits != 16) {
    throw FactorError("degrade: bits must be 4, 8 or 16");
  }
  if (buf.sample_rate != 16000) throw FactorError("degrade: expects a 16000 Hz buffer");
  const int factor = 16000 / spec.target_rate;
  // Down-sampling first, then quantization.
  AudioBuffer down = downsample_and_repeat(buf, factor, antialias);
  return mulaw_degrade(down, spec.bits, spec.mu);
}

// ---------------------------------------------------------------------------
// SNR mixing

MixResult mix_at_snr_paired(const AudioBuffer& clean, const AudioBuffer& noise, double snr_db,
                            double level_db, std::uint64_t seed) {
  const std::size_t n = clean.samples.size();
  if (n == 0) throw SilentInputError("mix_at_snr: empty clean signal");
  if (noise.samples.empty()) throw SilentInputError("mix_at_snr: empty noise signal");

  double p_clean = 0.0;
  for (double v : clean.samples) p_clean += v * v;
  p_clean /= double(n);
  if (p_clean < 1e-12) throw SilentInputError("mix_at_snr: clean power below 1e-12");

  // Tile/truncate the noise to the clean length, starting at a seeded offset.
  Rng rng(seed);
  const std::size_t offset =
      std::size_t(rng.next_u64() % std::uint64_t(noise.samples.size()));
  std::vector<double> nz(n);
  for (std::size_t i = 0; i < n; ++i) nz[i] = noise.samples[(offset + i) % noise.samples.size()];

  double p_noise = 0.0;
  for (double v : nz) p_noise += v * v;
  p_noise /= double(n);
  if (p_noise < 1e-12) throw SilentInputError("mix_at_snr: noise power below 1e-12");

  // 10*log10(p_clean / (scale^2 p_noise)) = snr_db
  const double scale = std::sqrt(p_clean / (p_noise * std::pow(10.0, snr_db / 10.0)));

  MixResult res;
  res.noise_scale = scale;
  std::vector<double> mix(n);
  double p_mix = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mix[i] = clean.samples[i] + scale * nz[i];
    p_mix += mix[i] * mix[i];
  }
  p_mix /= double(n);
  res.measured_snr_db = 10.0 * std::log10(p_clean / (scale * scale * p_noise));

  const double target_rms = std::pow(10.0, level_db / 20.0);
  const double gain = p_mix > 0.0 ? target_rms / std::sqrt(p_mix) : 0.0;
  res.level_gain = gain;

  res.noisy.sample_rate = clean.sample_rate;
  res.noisy.samples.resize(n);
  res.leveled_clean.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double v = gain * mix[i];
    if (v > 1.0 || v < -1.0) ++res.clipped;
    res.noisy.samples[i] = std::clamp(v, -1.0, 1.0);
    res.leveled_clean[i] = gain * clean.samples[i];
  }
  return res;
}

AudioBuffer mix_at_snr(const AudioBuffer& clean, const AudioBuffer& noise, double snr_db,
                       double level_db, std::uint64_t seed) {
  return mix_at_snr_paired(clean, noise, snr_db, level_db, seed).noisy;
}

}  // namespace attenuate
