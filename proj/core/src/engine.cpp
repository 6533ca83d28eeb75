// Whole-network execution: batch FFT forward and chunked streaming, shared
// between float and double builds of the pipeline.
#include <cassert>
#include <deque>

#include "attenuate/exec.hpp"
#include "attenuate/network.hpp"
#include "engine_ops.hpp"

namespace attenuate {

namespace {

using detail::SsmLayerT;
using detail::SsmPlanT;

template <typename Real>
std::vector<Real> cast_vec(const std::vector<double>& v) {
  return std::vector<Real>(v.begin(), v.end());
}

template <typename Real>
struct CompiledBlock {
  BlockInfo info;
  NormKind norm = NormKind::kLayer;
  ActKind act = ActKind::kSilu;
  std::vector<Real> preconv_w, preconv_b;
  std::vector<Real> gamma, beta, rmean, rvar;
  DiscreteSsm ssm_d;       // double form, used to seed FFT plans
  SsmLayerT<Real> ssm;
  std::vector<Real> proj_w, proj_b;
};

template <typename Real>
struct CompiledNet {
  int total_factor = 1;
  std::int64_t latency = 0;
  int state_size = 0;
  std::vector<CompiledBlock<Real>> blocks;
};

template <typename Real>
CompiledNet<Real> compile(const Network& net) {
  const std::vector<BlockInfo> layout = block_layout(net.config);
  CompiledNet<Real> cn;
  cn.total_factor = net.config.total_resample_factor();
  cn.latency = latency_samples(net.config);
  cn.state_size = net.config.state_size;
  cn.blocks.reserve(net.blocks.size());
  for (std::size_t i = 0; i < net.blocks.size(); ++i) {
    const BlockWeights& w = net.blocks[i];
    CompiledBlock<Real> cb;
    cb.info = layout[i];
    cb.norm = net.config.blocks[i].norm;
    cb.act = net.config.blocks[i].activation;
    cb.preconv_w = cast_vec<Real>(w.preconv_w);
    cb.preconv_b = cast_vec<Real>(w.preconv_b);
    cb.gamma = cast_vec<Real>(w.norm_gamma);
    cb.beta = cast_vec<Real>(w.norm_beta);
    cb.rmean = cast_vec<Real>(w.norm_rmean);
    cb.rvar = cast_vec<Real>(w.norm_rvar);
    cb.ssm_d = discretize_zoh(w.ssm);
    cb.ssm = detail::cast_ssm<Real>(cb.ssm_d);
    cb.proj_w = cast_vec<Real>(w.proj_w);
    cb.proj_b = cast_vec<Real>(w.proj_b);
    cn.blocks.push_back(std::move(cb));
  }
  return cn;
}

template <typename Real>
void norm_apply(std::vector<Real>& x, int ch, std::size_t len, const CompiledBlock<Real>& cb) {
  if (!cb.info.has_norm) return;
  std::vector<Real> frame(ch);
  for (std::size_t t = 0; t < len; ++t) {
    for (int c = 0; c < ch; ++c) frame[c] = x[std::size_t(c) * len + t];
    if (cb.norm == NormKind::kLayer) {
      detail::layernorm_frame(frame.data(), ch, cb.gamma.data(), cb.beta.data());
    } else {
      detail::batchnorm_frame(frame.data(), ch, cb.gamma.data(), cb.beta.data(), cb.rmean.data(),
                              cb.rvar.data());
    }
    for (int c = 0; c < ch; ++c) x[std::size_t(c) * len + t] = frame[c];
  }
}

template <typename Real>
void act_apply(std::vector<Real>& x, ActKind act) {
  if (act == ActKind::kSilu) {
    for (Real& v : x) v = detail::silu(v);
  } else {
    for (Real& v : x) v = detail::relu(v);
  }
}

template <typename Real>
std::vector<Real> ssm_batch(const CompiledBlock<Real>& cb, const std::vector<Real>& x,
                            std::size_t len) {
  SsmPlanT<Real> plan = detail::make_ssm_plan<Real>(cb.ssm_d, len);
  ContractionDims dims;
  dims.batch = 1;
  dims.in_ch = std::uint64_t(cb.ssm.n);
  dims.out_ch = std::uint64_t(cb.ssm.m);
  dims.states = std::uint64_t(cb.ssm.h);
  dims.modes = plan.fft_len;
  const ContractionVariant order = plan_contraction(dims).variant;
  return detail::ssm_conv<Real>(x, len, cb.ssm, plan, order);
}

template <typename Real>
std::vector<double> forward_batch_impl(const Network& net, std::span<const double> input) {
  CompiledNet<Real> cn = compile<Real>(net);
  const std::size_t total = std::size_t(cn.total_factor);
  if (input.empty() || input.size() % total != 0) {
    throw AlignmentError("forward_batch: input length must be a positive multiple of " +
                         std::to_string(total));
  }
  std::vector<Real> x(input.begin(), input.end());
  std::size_t len = input.size();
  int ch = 1;
  std::vector<std::vector<Real>> skips(cn.blocks.size());

  for (std::size_t i = 0; i < cn.blocks.size(); ++i) {
    const CompiledBlock<Real>& cb = cn.blocks[i];
    switch (cb.info.stage) {
      case Stage::kEncoder: {
        if (cb.info.has_preconv) {
          x = detail::preconv_apply<Real>(x, ch, len, cb.preconv_w, cb.preconv_b);
        }
        norm_apply(x, ch, len, cb);
        x = ssm_batch(cb, x, len);
        act_apply(x, cb.act);
        skips[i] = x;
        x = detail::downsample_apply<Real>(x, ch, len, cb.info.resample_factor, cb.proj_w,
                                           cb.proj_b, cb.info.proj_out);
        ch = cb.info.proj_out;
        len /= std::size_t(cb.info.resample_factor);
        break;
      }
      case Stage::kNeck:
      case Stage::kOutput: {
        norm_apply(x, ch, len, cb);
        x = ssm_batch(cb, x, len);
        act_apply(x, cb.act);
        break;
      }
      case Stage::kDecoder: {
        x = detail::upsample_apply<Real>(x, ch, len, cb.info.resample_factor, cb.proj_w, cb.proj_b,
                                         cb.info.proj_out);
        ch = cb.info.proj_out;
        len *= std::size_t(cb.info.resample_factor);
        const std::vector<Real>& sk = skips[std::size_t(cb.info.skip_peer)];
        assert(sk.size() == x.size());
        for (std::size_t k = 0; k < x.size(); ++k) x[k] += sk[k];
        if (cb.info.has_preconv) {
          x = detail::preconv_apply<Real>(x, ch, len, cb.preconv_w, cb.preconv_b);
        }
        norm_apply(x, ch, len, cb);
        x = ssm_batch(cb, x, len);
        act_apply(x, cb.act);
        break;
      }
    }
  }
  return std::vector<double>(x.begin(), x.end());
}

}  // namespace

std::vector<double> forward_batch(const Network& net, std::span<const double> input,
                                  Precision precision) {
  return precision == Precision::kFloat64 ? forward_batch_impl<double>(net, input)
                                          : forward_batch_impl<float>(net, input);
}

// ---------------------------------------------------------------------------
// Streaming. Frames move through the stages in frame-major order and every
// stage emits greedily: a PreConv holds back exactly one frame, a downsampler
// holds whatever does not yet fill a group, skip taps queue until the decoder
// consumes them. The output delay line starts with latency_samples zeros so
// emitted sample t is batch sample t - latency.

struct StreamState::Impl {
  virtual ~Impl() = default;
  virtual std::vector<double> process(std::span<const double> chunk) = 0;
  int total_factor = 1;
  std::int64_t latency_samples = 0;
};

namespace {

template <typename Real>
struct StreamImpl final : StreamState::Impl {
  CompiledNet<Real> net;

  struct BlockState {
    std::vector<Real> pre_hist;  // two frames of PreConv history
    std::uint64_t pre_seen = 0;
    std::vector<std::complex<Real>> x;
    std::vector<Real> down_rem;  // partial resampling group, frame-major
  };
  std::vector<BlockState> bstate;
  std::vector<std::deque<Real>> skip_fifo;
  std::deque<Real> out_fifo;

  explicit StreamImpl(const Network& n) : net(compile<Real>(n)) {
    total_factor = net.total_factor;
    latency_samples = net.latency;
    bstate.resize(net.blocks.size());
    skip_fifo.resize(net.blocks.size());
    for (std::size_t i = 0; i < net.blocks.size(); ++i) {
      bstate[i].x.assign(std::size_t(net.state_size), std::complex<Real>{});
      if (net.blocks[i].info.has_preconv) {
        bstate[i].pre_hist.assign(std::size_t(net.blocks[i].info.ssm_channels) * 2, Real(0));
      }
    }
    for (std::int64_t k = 0; k < latency_samples; ++k) out_fifo.push_back(Real(0));
  }

  // Emits every frame whose one-frame look-ahead has arrived.
  std::vector<Real> preconv_stream(const CompiledBlock<Real>& cb, BlockState& st,
                                   const std::vector<Real>& in, int ch, std::size_t& frames) {
    const std::size_t tin = frames;
    std::vector<Real> ext((tin + 2) * std::size_t(ch));
    std::copy(st.pre_hist.begin(), st.pre_hist.end(), ext.begin());
    std::copy(in.begin(), in.end(), ext.begin() + 2 * ch);

    const std::size_t count = tin == 0 ? 0 : (st.pre_seen == 0 ? tin - 1 : tin);
    const std::size_t off = st.pre_seen == 0 ? 1 : 0;
    std::vector<Real> out(count * std::size_t(ch));
    for (std::size_t e = 0; e < count; ++e) {
      const Real* f0 = &ext[(e + off) * ch];
      const Real* f1 = f0 + ch;
      const Real* f2 = f1 + ch;
      Real* o = &out[e * ch];
      for (int c = 0; c < ch; ++c) {
        o[c] = cb.preconv_w[std::size_t(c) * 3 + 0] * f0[c] +
               cb.preconv_w[std::size_t(c) * 3 + 1] * f1[c] +
               cb.preconv_w[std::size_t(c) * 3 + 2] * f2[c] + cb.preconv_b[c];
      }
    }
    std::copy(ext.end() - 2 * ch, ext.end(), st.pre_hist.begin());
    st.pre_seen += tin;
    frames = count;
    return out;
  }

  void norm_stream(const CompiledBlock<Real>& cb, std::vector<Real>& buf, int ch,
                   std::size_t frames) {
    if (!cb.info.has_norm) return;
    for (std::size_t t = 0; t < frames; ++t) {
      Real* frame = &buf[t * ch];
      if (cb.norm == NormKind::kLayer) {
        detail::layernorm_frame(frame, ch, cb.gamma.data(), cb.beta.data());
      } else {
        detail::batchnorm_frame(frame, ch, cb.gamma.data(), cb.beta.data(), cb.rmean.data(),
                                cb.rvar.data());
      }
    }
  }

  void ssm_stream(const CompiledBlock<Real>& cb, BlockState& st, std::vector<Real>& buf, int ch,
                  std::size_t frames) {
    std::vector<Real> y(ch);
    for (std::size_t t = 0; t < frames; ++t) {
      Real* frame = &buf[t * ch];
      detail::ssm_step(cb.ssm, st.x.data(), frame, y.data());
      std::copy(y.begin(), y.end(), frame);
    }
  }

  std::vector<Real> down_stream(const CompiledBlock<Real>& cb, BlockState& st,
                                const std::vector<Real>& in, int ch, std::size_t& frames) {
    const int r = cb.info.resample_factor;
    std::vector<Real> pend = std::move(st.down_rem);
    pend.insert(pend.end(), in.begin(), in.end());
    const std::size_t total = pend.size() / std::size_t(ch);
    const std::size_t groups = total / std::size_t(r);
    const int in_dim = ch * r;
    const int out_ch = cb.info.proj_out;
    std::vector<Real> out(groups * std::size_t(out_ch));
    for (std::size_t g = 0; g < groups; ++g) {
      const Real* v = &pend[g * in_dim];
      Real* o = &out[g * out_ch];
      for (int oc = 0; oc < out_ch; ++oc) {
        Real acc = cb.proj_b.empty() ? Real(0) : cb.proj_b[oc];
        const Real* wr = &cb.proj_w[std::size_t(oc) * in_dim];
        for (int k = 0; k < in_dim; ++k) acc += wr[k] * v[k];
        o[oc] = acc;
      }
    }
    st.down_rem.assign(pend.begin() + std::ptrdiff_t(groups * in_dim), pend.end());
    frames = groups;
    return out;
  }

  std::vector<Real> up_stream(const CompiledBlock<Real>& cb, const std::vector<Real>& in, int ch,
                              std::size_t& frames) {
    const int r = cb.info.resample_factor;
    const int sub = ch / r;
    const int out_ch = cb.info.proj_out;
    std::vector<Real> out(frames * std::size_t(r) * out_ch);
    for (std::size_t t = 0; t < frames; ++t) {
      const Real* v = &in[t * ch];
      for (int q = 0; q < r; ++q) {
        Real* o = &out[(t * r + q) * out_ch];
        const Real* s = v + std::size_t(q) * sub;
        for (int oc = 0; oc < out_ch; ++oc) {
          Real acc = cb.proj_b.empty() ? Real(0) : cb.proj_b[oc];
          const Real* wr = &cb.proj_w[std::size_t(oc) * sub];
          for (int c = 0; c < sub; ++c) acc += wr[c] * s[c];
          o[oc] = acc;
        }
      }
    }
    frames *= std::size_t(r);
    return out;
  }

  std::vector<double> process(std::span<const double> chunk) override {
    std::vector<Real> buf(chunk.begin(), chunk.end());
    std::size_t frames = chunk.size();
    int ch = 1;

    for (std::size_t i = 0; i < net.blocks.size(); ++i) {
      const CompiledBlock<Real>& cb = net.blocks[i];
      BlockState& st = bstate[i];
      switch (cb.info.stage) {
        case Stage::kEncoder: {
          if (cb.info.has_preconv) buf = preconv_stream(cb, st, buf, ch, frames);
          norm_stream(cb, buf, ch, frames);
          ssm_stream(cb, st, buf, ch, frames);
          act_apply(buf, cb.act);
          std::deque<Real>& fifo = skip_fifo[i];
          fifo.insert(fifo.end(), buf.begin(), buf.end());
          buf = down_stream(cb, st, buf, ch, frames);
          ch = cb.info.proj_out;
          break;
        }
        case Stage::kNeck:
        case Stage::kOutput: {
          norm_stream(cb, buf, ch, frames);
          ssm_stream(cb, st, buf, ch, frames);
          act_apply(buf, cb.act);
          break;
        }
        case Stage::kDecoder: {
          buf = up_stream(cb, buf, ch, frames);
          ch = cb.info.proj_out;
          std::deque<Real>& fifo = skip_fifo[std::size_t(cb.info.skip_peer)];
          if (fifo.size() < buf.size()) {
            throw Error("streaming: skip queue underrun (internal)");
          }
          for (std::size_t k = 0; k < buf.size(); ++k) {
            buf[k] += fifo.front();
            fifo.pop_front();
          }
          if (cb.info.has_preconv) buf = preconv_stream(cb, st, buf, ch, frames);
          norm_stream(cb, buf, ch, frames);
          ssm_stream(cb, st, buf, ch, frames);
          act_apply(buf, cb.act);
          break;
        }
      }
    }

    out_fifo.insert(out_fifo.end(), buf.begin(), buf.end());
    if (out_fifo.size() < chunk.size()) {
      throw Error("streaming: output delay line underrun (internal)");
    }
    std::vector<double> out(chunk.size());
    for (std::size_t k = 0; k < chunk.size(); ++k) {
      out[k] = double(out_fifo.front());
      out_fifo.pop_front();
    }
    return out;
  }
};

}  // namespace

StreamState::StreamState() = default;
StreamState::StreamState(StreamState&&) noexcept = default;
StreamState& StreamState::operator=(StreamState&&) noexcept = default;
StreamState::~StreamState() = default;

std::int64_t StreamState::latency() const {
  return impl_ ? impl_->latency_samples : 0;
}

StreamState reset_stream(const Network& net, Precision precision) {
  net.config.validate();
  StreamState state;
  if (precision == Precision::kFloat64) {
    state.impl_ = std::make_unique<StreamImpl<double>>(net);
  } else {
    state.impl_ = std::make_unique<StreamImpl<float>>(net);
  }
  return state;
}

std::vector<double> run_streaming(const Network& net, StreamState& state,
                                  std::span<const double> chunk) {
  (void)net;  // the state is compiled from the network at reset_stream time
  if (!state.impl()) throw Error("run_streaming: state not initialized");
  const std::size_t total = std::size_t(state.impl()->total_factor);
  if (chunk.empty() || chunk.size() % total != 0) {
    throw AlignmentError("run_streaming: chunk length must be a positive multiple of " +
                         std::to_string(total));
  }
  return state.impl()->process(chunk);
}

}  // namespace attenuate
