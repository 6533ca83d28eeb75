#include "attenuate/network.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include "engine_ops.hpp"

namespace attenuate {

namespace {

const char* stage_name(Stage s) {
  switch (s) {
    case Stage::kEncoder: return "encoder";
    case Stage::kNeck: return "neck";
    case Stage::kDecoder: return "decoder";
    case Stage::kOutput: return "output";
  }
  return "?";
}

const char* stage_prefix(Stage s) {
  switch (s) {
    case Stage::kEncoder: return "enc";
    case Stage::kNeck: return "neck";
    case Stage::kDecoder: return "dec";
    case Stage::kOutput: return "out";
  }
  return "?";
}

}  // namespace

std::vector<BlockInfo> block_layout(const NetworkConfig& cfg) {
  if (cfg.sample_rate < 1) throw ConfigError("sample_rate must be positive");
  if (cfg.state_size < 1) throw ConfigError("state_size must be positive");
  if (cfg.blocks.empty()) throw ConfigError("config has no blocks");

  // Stages must appear grouped in pipeline order.
  int stage_rank = 0;
  std::size_t n_enc = 0, n_neck = 0, n_dec = 0, n_out = 0;
  for (const BlockSpec& b : cfg.blocks) {
    const int rank = static_cast<int>(b.stage);
    if (rank < stage_rank) throw ConfigError("blocks must be ordered encoder, neck, decoder, output");
    stage_rank = rank;
    if (b.resample_factor < 1) throw ConfigError("resample factor must be >= 1");
    if (b.out_channels < 1) throw ConfigError("out_channels must be >= 1");
    switch (b.stage) {
      case Stage::kEncoder: ++n_enc; break;
      case Stage::kNeck: ++n_neck; break;
      case Stage::kDecoder: ++n_dec; break;
      case Stage::kOutput: ++n_out; break;
    }
  }
  if (n_enc < 1 || n_dec < 1) throw ConfigError("need at least one encoder and one decoder block");
  if (n_enc != n_dec) throw ConfigError("encoder/decoder block counts must match for skip pairing");

  std::vector<BlockInfo> out;
  out.reserve(cfg.blocks.size());

  int cur_ch = 1;
  std::int64_t frame = 1;
  std::int64_t enc_product = 1;
  std::vector<int> enc_pre_ch;
  std::vector<std::int64_t> enc_pre_frame;
  std::vector<std::size_t> enc_pos;

  int idx_enc = 0, idx_neck = 0, idx_dec = 0, idx_out = 0;
  for (const BlockSpec& b : cfg.blocks) {
    BlockInfo info;
    info.stage = b.stage;
    info.resample_factor = b.resample_factor;
    switch (b.stage) {
      case Stage::kEncoder: {
        info.index_in_stage = ++idx_enc;
        info.in_channels = cur_ch;
        info.ssm_channels = cur_ch;
        info.frame = frame;
        info.proj_in = cur_ch * b.resample_factor;
        info.proj_out = b.out_channels;
        enc_pre_ch.push_back(cur_ch);
        enc_pre_frame.push_back(frame);
        enc_pos.push_back(out.size());
        cur_ch = b.out_channels;
        frame *= b.resample_factor;
        enc_product *= b.resample_factor;
        break;
      }
      case Stage::kNeck: {
        info.index_in_stage = ++idx_neck;
        if (b.resample_factor != 1) throw ConfigError("neck blocks must not resample");
        if (b.out_channels != cur_ch) throw ConfigError("neck blocks must preserve channel count");
        info.in_channels = cur_ch;
        info.ssm_channels = cur_ch;
        info.frame = frame;
        break;
      }
      case Stage::kDecoder: {
        info.index_in_stage = ++idx_dec;
        const int r = b.resample_factor;
        if (cur_ch % r != 0) throw ConfigError("decoder channels must be divisible by the upsample factor");
        if (frame % r != 0) throw ConfigError("decoder upsampling exceeds the encoder downsampling");
        info.in_channels = cur_ch;
        info.proj_in = cur_ch / r;
        info.proj_out = b.out_channels;
        frame /= r;
        info.frame = frame;
        info.ssm_channels = b.out_channels;
        // Skip pairing: decoder block j pairs with encoder block k+1-j; the
        // post-upsample features must match that encoder block's
        // pre-downsample features in both channels and rate.
        const int peer = static_cast<int>(n_enc) - idx_dec;  // 0-based encoder index
        if (peer < 0) throw ConfigError("more decoder than encoder blocks");
        if (enc_pre_ch[peer] != b.out_channels) {
          throw ConfigError("skip channel mismatch between encoder and decoder");
        }
        if (enc_pre_frame[peer] != frame) {
          throw ConfigError("skip rate mismatch between encoder and decoder");
        }
        info.skip_peer = static_cast<int>(enc_pos[peer]);
        cur_ch = b.out_channels;
        break;
      }
      case Stage::kOutput: {
        info.index_in_stage = ++idx_out;
        if (b.resample_factor != 1) throw ConfigError("output blocks must not resample");
        if (b.out_channels != cur_ch) throw ConfigError("output blocks must preserve channel count");
        info.in_channels = cur_ch;
        info.ssm_channels = cur_ch;
        info.frame = frame;
        break;
      }
    }
    const bool preconv_ok =
        info.ssm_channels > 1 && (b.stage == Stage::kEncoder || b.stage == Stage::kDecoder);
    if (b.has_preconv && !preconv_ok) {
      throw ConfigError("preconv not allowed in neck/output blocks or single-channel blocks");
    }
    info.has_preconv = b.has_preconv;
    info.has_norm = info.ssm_channels > 1;
    out.push_back(info);
  }
  if (frame != 1) throw ConfigError("encoder and decoder resampling products differ");
  if (cur_ch != 1) throw ConfigError("network must end at one channel");

  // Fill the encoder side of the pairing.
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (out[i].stage == Stage::kDecoder && out[i].skip_peer >= 0) {
      out[std::size_t(out[i].skip_peer)].skip_peer = static_cast<int>(i);
    }
  }
  return out;
}

void NetworkConfig::validate() const { (void)block_layout(*this); }

int NetworkConfig::total_resample_factor() const {
  int total = 1;
  for (const BlockSpec& b : blocks) {
    if (b.stage == Stage::kEncoder) total *= b.resample_factor;
  }
  return total;
}

void NetworkConfig::strip_preconv() {
  for (BlockSpec& b : blocks) b.has_preconv = false;
}

void NetworkConfig::strip_decoder_preconv() {
  for (BlockSpec& b : blocks) {
    if (b.stage == Stage::kDecoder) b.has_preconv = false;
  }
}

NetworkConfig NetworkConfig::hourglass_default() {
  NetworkConfig cfg;
  cfg.sample_rate = 16000;
  cfg.state_size = 256;
  const int enc_factors[6] = {4, 4, 2, 2, 2, 2};
  const int enc_channels[6] = {16, 32, 64, 96, 128, 256};
  const int dec_factors[6] = {2, 2, 2, 2, 4, 4};
  const int dec_channels[6] = {128, 96, 64, 32, 16, 1};
  for (int i = 0; i < 6; ++i) {
    BlockSpec b;
    b.stage = Stage::kEncoder;
    b.resample_factor = enc_factors[i];
    b.out_channels = enc_channels[i];
    b.has_preconv = i > 0;  // block 1 runs on a single channel
    cfg.blocks.push_back(b);
  }
  for (int i = 0; i < 2; ++i) {
    BlockSpec b;
    b.stage = Stage::kNeck;
    b.out_channels = 256;
    cfg.blocks.push_back(b);
  }
  for (int i = 0; i < 6; ++i) {
    BlockSpec b;
    b.stage = Stage::kDecoder;
    b.resample_factor = dec_factors[i];
    b.out_channels = dec_channels[i];
    b.has_preconv = i < 5;  // last block ends on a single channel
    cfg.blocks.push_back(b);
  }
  for (int i = 0; i < 2; ++i) {
    BlockSpec b;
    b.stage = Stage::kOutput;
    b.out_channels = 1;
    cfg.blocks.push_back(b);
  }
  return cfg;
}

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::vector<std::string> tokens(std::string_view s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      if (!cur.empty()) out.push_back(std::move(cur)), cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

int parse_int(const std::string& s, const char* what) {
  try {
    std::size_t pos = 0;
    const int v = std::stoi(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ConfigError(std::string("bad integer for ") + what + ": '" + s + "'");
  }
}

}  // namespace

NetworkConfig NetworkConfig::parse(std::string_view text) {
  NetworkConfig cfg;
  cfg.blocks.clear();
  NormKind norm = NormKind::kLayer;
  ActKind act = ActKind::kSilu;
  // -1 = default (on where eligible), 0 = off, 1 = forced on
  std::vector<int> preconv_mode;

  std::size_t pos = 0;
  int lineno = 0;
  while (pos <= text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    std::string_view raw = text.substr(pos, eol - pos);
    pos = eol + 1;
    ++lineno;
    if (std::size_t hash = raw.find('#'); hash != std::string_view::npos) raw = raw.substr(0, hash);
    raw = trim(raw);
    if (raw.empty()) continue;

    if (std::size_t eq = raw.find('='); eq != std::string_view::npos) {
      const std::string key(trim(raw.substr(0, eq)));
      const std::string val(trim(raw.substr(eq + 1)));
      if (key == "sample_rate") {
        cfg.sample_rate = parse_int(val, "sample_rate");
      } else if (key == "state_size") {
        cfg.state_size = parse_int(val, "state_size");
      } else if (key == "norm") {
        if (val == "layer") norm = NormKind::kLayer;
        else if (val == "batch") norm = NormKind::kBatch;
        else throw ConfigError("norm must be 'layer' or 'batch'");
      } else if (key == "activation") {
        if (val == "silu") act = ActKind::kSilu;
        else if (val == "relu") act = ActKind::kRelu;
        else throw ConfigError("activation must be 'silu' or 'relu'");
      } else {
        throw ConfigError("unknown config key '" + key + "' (line " + std::to_string(lineno) + ")");
      }
      continue;
    }

    const std::vector<std::string> tok = tokens(raw);
    if (tok.empty()) continue;
    if (tok[0] != "block") {
      throw ConfigError("unrecognized config line " + std::to_string(lineno));
    }
    if (tok.size() < 4 || tok.size() > 5) {
      throw ConfigError("block line needs: block <stage> <factor> <channels> [preconv|nopreconv]");
    }
    BlockSpec b;
    if (tok[1] == "encoder") b.stage = Stage::kEncoder;
    else if (tok[1] == "neck") b.stage = Stage::kNeck;
    else if (tok[1] == "decoder") b.stage = Stage::kDecoder;
    else if (tok[1] == "output") b.stage = Stage::kOutput;
    else throw ConfigError("unknown stage '" + tok[1] + "'");
    b.resample_factor = parse_int(tok[2], "resample factor");
    b.out_channels = parse_int(tok[3], "channels");
    int mode = -1;
    if (tok.size() == 5) {
      if (tok[4] == "preconv") mode = 1;
      else if (tok[4] == "nopreconv") mode = 0;
      else throw ConfigError("block flag must be 'preconv' or 'nopreconv'");
    }
    b.has_preconv = false;
    cfg.blocks.push_back(b);
    preconv_mode.push_back(mode);
  }

  for (BlockSpec& b : cfg.blocks) {
    b.norm = norm;
    b.activation = act;
  }

  // Resolve preconv defaults against eligibility: the layout does not depend
  // on the preconv flags, so a provisional pass is safe.
  const std::vector<BlockInfo> layout = block_layout(cfg);
  for (std::size_t i = 0; i < cfg.blocks.size(); ++i) {
    const bool eligible = layout[i].ssm_channels > 1 &&
                          (layout[i].stage == Stage::kEncoder || layout[i].stage == Stage::kDecoder);
    if (preconv_mode[i] == 1 && !eligible) {
      throw ConfigError("preconv requested on an ineligible block");
    }
    cfg.blocks[i].has_preconv = preconv_mode[i] != 0 && eligible;
  }
  cfg.validate();
  return cfg;
}

std::string NetworkConfig::to_text() const {
  std::ostringstream os;
  os << "sample_rate = " << sample_rate << "\n";
  os << "state_size = " << state_size << "\n";
  const NormKind norm = blocks.empty() ? NormKind::kLayer : blocks.front().norm;
  const ActKind act = blocks.empty() ? ActKind::kSilu : blocks.front().activation;
  os << "norm = " << (norm == NormKind::kLayer ? "layer" : "batch") << "\n";
  os << "activation = " << (act == ActKind::kSilu ? "silu" : "relu") << "\n";
  for (const BlockSpec& b : blocks) {
    os << "block " << stage_name(b.stage) << " " << b.resample_factor << " " << b.out_channels;
    if (b.stage == Stage::kEncoder || b.stage == Stage::kDecoder) {
      os << (b.has_preconv ? " preconv" : " nopreconv");
    }
    os << "\n";
  }
  return os.str();
}

Network build_network(const NetworkConfig& cfg, std::uint64_t seed) {
  const std::vector<BlockInfo> layout = block_layout(cfg);
  Network net;
  net.config = cfg;
  net.blocks.resize(cfg.blocks.size());
  Rng rng(seed);
  for (std::size_t i = 0; i < cfg.blocks.size(); ++i) {
    const BlockInfo& info = layout[i];
    BlockWeights& w = net.blocks[i];
    if (info.has_preconv) {
      w.preconv_w.resize(std::size_t(info.ssm_channels) * 3);
      for (int c = 0; c < info.ssm_channels; ++c) {
        w.preconv_w[std::size_t(c) * 3 + 0] = 0.02 * rng.normal();
        w.preconv_w[std::size_t(c) * 3 + 1] = 1.0 + 0.02 * rng.normal();
        w.preconv_w[std::size_t(c) * 3 + 2] = 0.02 * rng.normal();
      }
      w.preconv_b.assign(info.ssm_channels, 0.0);
    }
    if (info.has_norm) {
      w.norm_gamma.assign(info.ssm_channels, 1.0);
      w.norm_beta.assign(info.ssm_channels, 0.0);
      if (cfg.blocks[i].norm == NormKind::kBatch) {
        w.norm_rmean.assign(info.ssm_channels, 0.0);
        w.norm_rvar.assign(info.ssm_channels, 1.0);
      }
    }
    w.ssm = init_ssm(info.ssm_channels, info.ssm_channels, cfg.state_size, rng.next_u64());
    if (info.proj_in > 0) {
      w.proj_w.resize(std::size_t(info.proj_out) * info.proj_in);
      const double stddev = std::sqrt(2.0 / info.proj_in);
      for (auto& v : w.proj_w) v = rng.normal(0.0, stddev);
      w.proj_b.assign(info.proj_out, 0.0);
    }
  }
  return net;
}

std::int64_t latency_samples(const NetworkConfig& cfg) {
  const std::vector<BlockInfo> layout = block_layout(cfg);
  std::int64_t lat = cfg.total_resample_factor();
  for (const BlockInfo& info : layout) {
    if (info.has_preconv) lat += info.frame;
  }
  return lat;
}

double compute_latency_ms(const NetworkConfig& cfg) {
  return static_cast<double>(latency_samples(cfg)) * 1000.0 / cfg.sample_rate;
}

std::int64_t count_params(const Network& net) {
  std::int64_t total = 0;
  for (const BlockWeights& w : net.blocks) {
    total += std::int64_t(w.preconv_w.size() + w.preconv_b.size());
    total += std::int64_t(w.norm_gamma.size() + w.norm_beta.size());
    total += std::int64_t(w.ssm.a_re.size() + w.ssm.a_im.size() + w.ssm.b.size() +
                          w.ssm.c.size() + w.ssm.dt.size());
    total += std::int64_t(w.proj_w.size() + w.proj_b.size());
  }
  return total;
}

double count_macs(const Network& net, double sample_rate) {
  const std::vector<BlockInfo> layout = block_layout(net.config);
  const double h = static_cast<double>(net.config.state_size);
  double total = 0.0;
  for (const BlockInfo& info : layout) {
    const double rate = sample_rate / static_cast<double>(info.frame);
    const double ch = static_cast<double>(info.ssm_channels);
    if (info.has_preconv) total += 3.0 * ch * rate;
    if (info.has_norm) total += ch * rate;
    // SSM step: input projection h*n, complex diagonal state update 4h,
    // readout m*h on Re(x).
    total += (h * ch + 4.0 * h + ch * h) * rate;
    total += ch * rate;  // activation
    if (info.stage == Stage::kEncoder) {
      const double out_rate = rate / info.resample_factor;
      total += double(info.proj_in) * double(info.proj_out) * out_rate;
    } else if (info.stage == Stage::kDecoder) {
      total += double(info.proj_in) * double(info.proj_out) * rate;
    }
  }
  return total;
}

std::vector<double> downsample(std::span<const double> x, int ch, std::size_t len, int r,
                               std::span<const double> w, std::span<const double> bias,
                               int out_ch) {
  if (ch < 1 || r < 1 || out_ch < 1) throw DimensionError("downsample: bad dimensions");
  if (x.size() != std::size_t(ch) * len) throw ShapeError("downsample: input size mismatch");
  if (len % std::size_t(r) != 0) throw DimensionError("downsample: length not divisible by factor");
  if (w.size() != std::size_t(out_ch) * ch * r) throw ShapeError("downsample: projection shape mismatch");
  if (!bias.empty() && bias.size() != std::size_t(out_ch)) throw ShapeError("downsample: bias size mismatch");
  return detail::downsample_apply<double>(x, ch, len, r, w, bias, out_ch);
}

std::vector<double> upsample(std::span<const double> x, int ch, std::size_t len, int r,
                             std::span<const double> w, std::span<const double> bias,
                             int out_ch) {
  if (ch < 1 || r < 1 || out_ch < 1) throw DimensionError("upsample: bad dimensions");
  if (x.size() != std::size_t(ch) * len) throw ShapeError("upsample: input size mismatch");
  if (ch % r != 0) throw DimensionError("upsample: channels not divisible by factor");
  if (w.size() != std::size_t(out_ch) * (ch / r)) throw ShapeError("upsample: projection shape mismatch");
  if (!bias.empty() && bias.size() != std::size_t(out_ch)) throw ShapeError("upsample: bias size mismatch");
  return detail::upsample_apply<double>(x, ch, len, r, w, bias, out_ch);
}

std::vector<double> preconv(std::span<const double> x, int ch, std::size_t len,
                            std::span<const double> kernels, std::span<const double> bias) {
  if (ch < 1) throw DimensionError("preconv: bad channel count");
  if (x.size() != std::size_t(ch) * len) throw ShapeError("preconv: input size mismatch");
  if (kernels.size() != std::size_t(ch) * 3) throw ShapeError("preconv: kernel shape mismatch");
  if (!bias.empty() && bias.size() != std::size_t(ch)) throw ShapeError("preconv: bias size mismatch");
  return detail::preconv_apply<double>(x, ch, len, kernels, bias);
}

// ---------------------------------------------------------------------------
// Weight file: "ATNN", version, embedded config text, named tensor records.

namespace {

constexpr std::uint32_t kWeightVersion = 1;
constexpr std::uint8_t kDtypeF64 = 1;

void put_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

void put_u64(std::ostream& os, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 8);
}

void put_f64(std::ostream& os, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  put_u64(os, bits);
}

std::uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4)) throw CorruptFileError("weight file truncated");
  return std::uint32_t(b[0]) | (std::uint32_t(b[1]) << 8) | (std::uint32_t(b[2]) << 16) |
         (std::uint32_t(b[3]) << 24);
}

std::uint64_t get_u64(std::istream& is) {
  unsigned char b[8];
  if (!is.read(reinterpret_cast<char*>(b), 8)) throw CorruptFileError("weight file truncated");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= std::uint64_t(b[i]) << (8 * i);
  return v;
}

double get_f64(std::istream& is) {
  const std::uint64_t bits = get_u64(is);
  double v;
  std::memcpy(&v, &bits, 8);
  return v;
}

struct TensorRef {
  std::string name;
  std::vector<std::uint64_t> dims;
  std::vector<double>* data;
  bool filled = false;
};

std::string block_prefix(const BlockInfo& info) {
  return std::string(stage_prefix(info.stage)) + std::to_string(info.index_in_stage);
}

std::vector<TensorRef> tensor_table(Network& net) {
  const std::vector<BlockInfo> layout = block_layout(net.config);
  std::vector<TensorRef> refs;
  for (std::size_t i = 0; i < net.blocks.size(); ++i) {
    const BlockInfo& info = layout[i];
    BlockWeights& w = net.blocks[i];
    const std::string p = block_prefix(info);
    const std::uint64_t ch = std::uint64_t(info.ssm_channels);
    const std::uint64_t h = std::uint64_t(net.config.state_size);
    if (info.has_preconv) {
      refs.push_back({p + ".preconv.w", {ch, 3}, &w.preconv_w});
      refs.push_back({p + ".preconv.b", {ch}, &w.preconv_b});
    }
    if (info.has_norm) {
      refs.push_back({p + ".norm.gamma", {ch}, &w.norm_gamma});
      refs.push_back({p + ".norm.beta", {ch}, &w.norm_beta});
      if (net.config.blocks[i].norm == NormKind::kBatch) {
        refs.push_back({p + ".norm.rmean", {ch}, &w.norm_rmean});
        refs.push_back({p + ".norm.rvar", {ch}, &w.norm_rvar});
      }
    }
    refs.push_back({p + ".ssm.a_re", {h}, &w.ssm.a_re});
    refs.push_back({p + ".ssm.a_im", {h}, &w.ssm.a_im});
    refs.push_back({p + ".ssm.b", {h, ch}, &w.ssm.b});
    refs.push_back({p + ".ssm.c", {ch, h}, &w.ssm.c});
    refs.push_back({p + ".ssm.dt", {h}, &w.ssm.dt});
    if (!w.proj_w.empty()) {
      refs.push_back({p + ".proj.w", {std::uint64_t(info.proj_out), std::uint64_t(info.proj_in)},
                      &w.proj_w});
      refs.push_back({p + ".proj.b", {std::uint64_t(info.proj_out)}, &w.proj_b});
    }
  }
  return refs;
}

}  // namespace

void save_weights(const Network& net, std::ostream& out) {
  Network& mut = const_cast<Network&>(net);  // table only reads through the refs here
  const std::vector<TensorRef> refs = tensor_table(mut);
  out.write("ATNN", 4);
  put_u32(out, kWeightVersion);
  const std::string cfg = net.config.to_text();
  put_u32(out, static_cast<std::uint32_t>(cfg.size()));
  out.write(cfg.data(), std::streamsize(cfg.size()));
  put_u32(out, static_cast<std::uint32_t>(refs.size()));
  for (const TensorRef& r : refs) {
    put_u32(out, static_cast<std::uint32_t>(r.name.size()));
    out.write(r.name.data(), std::streamsize(r.name.size()));
    out.put(char(kDtypeF64));
    put_u32(out, static_cast<std::uint32_t>(r.dims.size()));
    std::uint64_t count = 1;
    for (std::uint64_t d : r.dims) {
      put_u64(out, d);
      count *= d;
    }
    if (count != r.data->size()) throw ShapeError("save_weights: tensor size mismatch for " + r.name);
    for (double v : *r.data) put_f64(out, v);
  }
  if (!out) throw CorruptFileError("save_weights: write failed");
}

void save_weights(const Network& net, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw CorruptFileError("save_weights: cannot open " + path);
  save_weights(net, f);
}

Network load_weights(std::istream& in, const NetworkConfig* expected) {
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, "ATNN", 4) != 0) {
    throw CorruptFileError("weight file: bad magic");
  }
  const std::uint32_t version = get_u32(in);
  if (version != kWeightVersion) {
    throw VersionError("weight file: unsupported version " + std::to_string(version));
  }
  const std::uint32_t cfg_len = get_u32(in);
  std::string cfg_text(cfg_len, '\0');
  if (!in.read(cfg_text.data(), cfg_len)) throw CorruptFileError("weight file truncated");
  const NetworkConfig file_cfg = NetworkConfig::parse(cfg_text);
  const NetworkConfig& cfg = expected ? *expected : file_cfg;

  Network net = build_network(cfg, 0);
  std::vector<TensorRef> refs = tensor_table(net);
  std::map<std::string, TensorRef*> by_name;
  for (TensorRef& r : refs) by_name[r.name] = &r;

  const std::uint32_t count = get_u32(in);
  std::size_t filled = 0;
  for (std::uint32_t t = 0; t < count; ++t) {
    const std::uint32_t name_len = get_u32(in);
    std::string name(name_len, '\0');
    if (!in.read(name.data(), name_len)) throw CorruptFileError("weight file truncated");
    const int dtype = in.get();
    if (dtype == std::char_traits<char>::eof()) throw CorruptFileError("weight file truncated");
    if (dtype != kDtypeF64) throw FormatError("weight file: unsupported dtype tag");
    const std::uint32_t rank = get_u32(in);
    std::vector<std::uint64_t> dims(rank);
    std::uint64_t n = 1;
    for (std::uint32_t d = 0; d < rank; ++d) {
      dims[d] = get_u64(in);
      n *= dims[d];
    }
    auto it = by_name.find(name);
    if (it == by_name.end()) throw ShapeError("weight file: unexpected tensor '" + name + "'");
    if (dims != it->second->dims) throw ShapeError("weight file: shape mismatch for '" + name + "'");
    std::vector<double>& dst = *it->second->data;
    dst.resize(n);
    for (std::uint64_t k = 0; k < n; ++k) dst[k] = get_f64(in);
    if (!it->second->filled) {
      it->second->filled = true;
      ++filled;
    }
  }
  if (filled != refs.size()) throw ShapeError("weight file: missing tensors for this config");
  return net;
}

Network load_weights(const std::string& path, const NetworkConfig* expected) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw CorruptFileError("load_weights: cannot open " + path);
  return load_weights(f, expected);
}

}  // namespace attenuate
