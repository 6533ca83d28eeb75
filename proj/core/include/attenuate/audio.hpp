#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "attenuate/common.hpp"

namespace attenuate {

/// Mono signal in [-1, +1], the I/O currency of the whole pipeline.
struct AudioBuffer {
  std::vector<double> samples;
  int sample_rate = 16000;
};

struct DegradeSpec {
  int target_rate = 16000;  // one of 4000, 8000, 16000
  int bits = 16;            // one of 4, 8, 16
  double mu = 255.0;
};

// 16-bit PCM and 32-bit float WAV are accepted; stereo is downmixed by
// averaging. Writing always emits 16-bit PCM mono, little-endian.
AudioBuffer read_wav(std::istream& in);
AudioBuffer read_wav(const std::string& path);
void write_wav(const AudioBuffer& buf, std::ostream& out);
void write_wav(const AudioBuffer& buf, const std::string& path);

/// Companding round trip at a reduced bitwidth: mu-law encode, quantize with
/// a symmetric midtread quantizer over 2^bits - 1 levels, decode back to
/// [-1, +1]. 0 and +-1 are exact fixed points at every bitwidth.
AudioBuffer mulaw_degrade(const AudioBuffer& buf, int bits, double mu = 255.0);
double mulaw_roundtrip_sample(double x, int bits, double mu = 255.0);

/// Decimate by keeping every factor-th sample, then repeat each kept sample
/// factor times; length and rate tag are preserved. A linear-phase low-pass
/// at 0.45x the target Nyquist runs before decimation unless bypassed.
AudioBuffer downsample_and_repeat(const AudioBuffer& buf, int factor, bool antialias = true);

AudioBuffer degrade(const AudioBuffer& buf, const DegradeSpec& spec, bool antialias = true);

struct MixResult {
  AudioBuffer noisy;                 // leveled, clipped mix
  std::vector<double> leveled_clean; // clean reference under the same gain
  double noise_scale = 0.0;          // scale applied to the noise pre-leveling
  double level_gain = 0.0;           // gain applied to the sum
  double measured_snr_db = 0.0;      // pre-leveling, pre-clip
  std::int64_t clipped = 0;          // samples hard-clipped after leveling
};

/// Scales noise to hit snr_db against the clean signal, levels the sum to
/// level_db dBFS (RMS re 1.0), hard-clips to [-1, +1]. Noise is tiled or
/// truncated to the clean length; the seed picks the tiling offset.
MixResult mix_at_snr_paired(const AudioBuffer& clean, const AudioBuffer& noise, double snr_db,
                            double level_db, std::uint64_t seed);
AudioBuffer mix_at_snr(const AudioBuffer& clean, const AudioBuffer& noise, double snr_db,
                       double level_db, std::uint64_t seed);

double rms(std::span<const double> x);
double power_db(std::span<const double> x);

}  // namespace attenuate
