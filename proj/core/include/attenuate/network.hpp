#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "attenuate/ssm.hpp"

namespace attenuate {

enum class Stage { kEncoder, kNeck, kDecoder, kOutput };
enum class NormKind { kLayer, kBatch };
enum class ActKind { kSilu, kRelu };

struct BlockSpec {
  Stage stage = Stage::kEncoder;
  int resample_factor = 1;
  int out_channels = 1;
  bool has_preconv = false;
  NormKind norm = NormKind::kLayer;
  ActKind activation = ActKind::kSilu;
};

/// Block-structured hourglass description. Encoder blocks run
/// PreConv -> Norm -> SSM -> Act -> Down; decoder blocks run
/// Up -> (+skip) -> PreConv -> Norm -> SSM -> Act; neck and output blocks are
/// plain SSM blocks. Skip connections pair each encoder block's
/// pre-downsample features with the decoder block whose post-upsample
/// features have the same shape.
struct NetworkConfig {
  int sample_rate = 16000;
  int state_size = 256;
  std::vector<BlockSpec> blocks;

  /// The shipped default: 4,4,2,2,2,2 encoder over 16..256 channels, two
  /// 256-channel neck blocks, the mirrored decoder, two 1-channel output
  /// blocks, PreConv everywhere it is eligible.
  static NetworkConfig hourglass_default();

  static NetworkConfig parse(std::string_view text);
  std::string to_text() const;

  void validate() const;  // throws ConfigError
  int total_resample_factor() const;

  void strip_preconv();          // "no PreConvs" variant
  void strip_decoder_preconv();  // "PreConvs only in encoder" variant
};

/// Derived per-block layout facts, in block order.
struct BlockInfo {
  Stage stage;
  int index_in_stage = 0;   // 1-based
  int ssm_channels = 0;     // channels the PreConv/Norm/SSM/Act run at
  int in_channels = 0;      // channels entering the block
  int resample_factor = 1;
  std::int64_t frame = 1;   // input samples per feature frame at the SSM
  bool has_preconv = false;
  bool has_norm = false;    // single-channel blocks carry no norm
  int skip_peer = -1;       // pairing index (encoder <-> decoder), -1 if none
  int proj_in = 0;          // projection input width (0 when factor == 1)
  int proj_out = 0;
};

std::vector<BlockInfo> block_layout(const NetworkConfig& cfg);

struct BlockWeights {
  std::vector<double> preconv_w;  // ssm_channels x 3
  std::vector<double> preconv_b;  // ssm_channels
  std::vector<double> norm_gamma, norm_beta;
  std::vector<double> norm_rmean, norm_rvar;  // batch-norm running stats
  ContinuousSsm ssm;
  std::vector<double> proj_w;  // proj_out x proj_in
  std::vector<double> proj_b;  // proj_out
};

struct Network {
  NetworkConfig config;
  std::vector<BlockWeights> blocks;
};

Network build_network(const NetworkConfig& cfg, std::uint64_t seed);

/// Theoretical latency: one full resampling frame plus one frame period per
/// PreConv at its operating rate.
std::int64_t latency_samples(const NetworkConfig& cfg);
double compute_latency_ms(const NetworkConfig& cfg);

std::int64_t count_params(const Network& net);
double count_macs(const Network& net, double sample_rate);

// Resampling and PreConv primitives (batch form, double precision).
// downsample groups r consecutive frames into channels, then projects:
// (ch, len) -> (out_ch, len/r). upsample is the mirror. preconv is a
// per-channel centered width-3 convolution, zero-padded, with one frame of
// look-ahead.
std::vector<double> downsample(std::span<const double> x, int ch, std::size_t len, int r,
                               std::span<const double> w, std::span<const double> bias, int out_ch);
std::vector<double> upsample(std::span<const double> x, int ch, std::size_t len, int r,
                             std::span<const double> w, std::span<const double> bias, int out_ch);
std::vector<double> preconv(std::span<const double> x, int ch, std::size_t len,
                            std::span<const double> kernels, std::span<const double> bias);

// Weight file I/O ("ATNN" container, little-endian, bit-exact round trip).
void save_weights(const Network& net, std::ostream& out);
void save_weights(const Network& net, const std::string& path);
Network load_weights(std::istream& in, const NetworkConfig* expected = nullptr);
Network load_weights(const std::string& path, const NetworkConfig* expected = nullptr);

enum class Precision { kFloat32, kFloat64 };

/// Full pipeline over a 1 x len waveform; len must be a multiple of the
/// total resampling factor. Output has the same length.
std::vector<double> forward_batch(const Network& net, std::span<const double> input,
                                  Precision precision = Precision::kFloat64);

/// Streaming state over the whole layer stack: per-layer complex SSM states,
/// PreConv look-ahead buffers, resampler remainders, skip FIFOs and the
/// output delay line. One stream is advanced by one thread at a time.
class StreamState {
 public:
  StreamState();
  StreamState(StreamState&&) noexcept;
  StreamState& operator=(StreamState&&) noexcept;
  ~StreamState();

  std::int64_t latency() const;

  struct Impl;
  Impl* impl() const { return impl_.get(); }

 private:
  friend StreamState reset_stream(const Network&, Precision);
  std::unique_ptr<Impl> impl_;
};

StreamState reset_stream(const Network& net, Precision precision = Precision::kFloat64);

/// Feeds one chunk (a positive multiple of the total resampling factor) and
/// returns exactly chunk-length output samples. The emitted stream equals the
/// batch output delayed by latency_samples(cfg), zero-filled before that.
std::vector<double> run_streaming(const Network& net, StreamState& state,
                                  std::span<const double> chunk);

}  // namespace attenuate
