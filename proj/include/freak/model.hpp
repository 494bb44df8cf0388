#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "freak/kv.hpp"
#include "freak/layers.hpp"

namespace freak {

// Architecture description. The network shape is a pure function of this
// struct: encoders with one strided block per stage, frequency modulators at
// each scale, an audio encoder that lands on the scale-t grid, and a decoder
// fed by the modulated skips.
struct ModelConfig {
    int image_size = 64;
    int stages = 4;
    std::vector<int> widths = {16, 32, 64, 128};
    int expansion = 2;
    bool use_vefm = true;
    bool use_avfm = true;
    uint64_t seed = 0;

    int audio_channels() const { return widths.empty() ? 0 : widths.back(); }
    int bottleneck_grid() const { return image_size >> stages; }

    void validate() const {
        if (stages < 2) throw ConfigError("stages must be >= 2");
        if (static_cast<int>(widths.size()) != stages)
            throw ConfigError("widths must list one channel count per stage");
        for (int w : widths)
            if (w < 1) throw ConfigError("channel widths must be positive");
        if (expansion < 1) throw ConfigError("expansion must be >= 1");
        if (image_size < (1 << stages) || image_size % (1 << stages) != 0)
            throw ConfigError("image_size must be divisible by 2^stages");
        const int grid = bottleneck_grid();
        if (grid > 32 || (32 % grid) != 0 || (grid & (grid - 1)) != 0)
            throw ConfigError("audio grid (image_size/2^stages) must be a power of two <= 32");
    }

    std::string to_text() const {
        std::string s;
        s += "image_size = " + std::to_string(image_size) + "\n";
        s += "stages = " + std::to_string(stages) + "\n";
        s += "widths = " + kv::join_ints(widths) + "\n";
        s += "expansion = " + std::to_string(expansion) + "\n";
        s += "use_vefm = " + std::string(use_vefm ? "1" : "0") + "\n";
        s += "use_avfm = " + std::string(use_avfm ? "1" : "0") + "\n";
        s += "seed = " + std::to_string(seed) + "\n";
        return s;
    }

    static ModelConfig from_text(const std::string& text) {
        ModelConfig c;
        for (const auto& [k, v] : kv::parse(text)) {
            if (k == "image_size") c.image_size = std::stoi(v);
            else if (k == "stages") c.stages = std::stoi(v);
            else if (k == "widths") c.widths = kv::parse_int_list(v);
            else if (k == "expansion") c.expansion = std::stoi(v);
            else if (k == "use_vefm") c.use_vefm = kv::parse_bool(v);
            else if (k == "use_avfm") c.use_avfm = kv::parse_bool(v);
            else if (k == "seed") c.seed = std::stoull(v);
            else throw ConfigError("unknown model config key: " + k);
        }
        c.validate();
        return c;
    }
};

// Couples the masked-branch feature spectrum with a real filter derived from
// the reference branch: filter = 1x1 conv of Re(FFT(reference feature)),
// applied by element-wise spectral multiplication after a gated conv cleans
// the masked feature.
template <typename T>
struct VefmBlock {
    int ref_ch = 0, masked_ch = 0, grid_h = 0, grid_w = 0;
    GatedConvLayer<T> gate;
    Conv2dLayer<T> filter;

    VefmBlock() = default;
    VefmBlock(int ref_channels, int masked_channels, int h, int w)
        : ref_ch(ref_channels), masked_ch(masked_channels), grid_h(h), grid_w(w),
          gate(masked_channels),
          filter(ref_channels, masked_channels, 1, 1, 0, 1, true) {}

    void init(Rng& rng) {
        gate.init(rng);
        // filter starts near the all-pass configuration
        const double std = 0.05 / std::sqrt(static_cast<double>(ref_ch) * grid_h * grid_w);
        filter.init(rng, std, 1.0);
    }

    int forward(Tape<T>& t, int f_ref, int f_masked, bool trainable) {
        const Tensor<T>& rv = t.value(f_ref);
        const Tensor<T>& mv = t.value(f_masked);
        if (rv.dim(2) != mv.dim(2) || rv.dim(3) != mv.dim(3))
            throw ContractViolation("vefm: reference/masked spatial size mismatch");
        auto [rr, ri] = t.fft2(f_ref);
        (void)ri;  // the imaginary part of the reference spectrum is discarded
        const int h_r = filter.forward(t, rr, trainable);
        const int cleaned = gate.forward(t, f_masked, trainable);
        auto [mr, mi] = t.fft2(cleaned);
        return t.ifft2_real(t.mul(mr, h_r), t.mul(mi, h_r));
    }

    void visit(const std::string& prefix, ParamList<T>& out) {
        gate.visit(prefix + ".gc", out);
        filter.visit(prefix + ".filter", out);
    }
};

// Modulates the visual bottleneck spectrum with a real filter produced from
// the audio feature map by a 1x1 conv.
template <typename T>
struct AvfmBlock {
    int audio_ch = 0, visual_ch = 0;
    Conv2dLayer<T> filter;

    AvfmBlock() = default;
    AvfmBlock(int audio_channels, int visual_channels)
        : audio_ch(audio_channels), visual_ch(visual_channels),
          filter(audio_channels, visual_channels, 1, 1, 0, 1, true) {}

    void init(Rng& rng) {
        filter.init(rng, 0.1 / std::sqrt(static_cast<double>(audio_ch)), 1.0);
    }

    int forward(Tape<T>& t, int f_mod, int f_audio, bool trainable) {
        const Tensor<T>& mv = t.value(f_mod);
        const Tensor<T>& av = t.value(f_audio);
        if (mv.dim(2) != av.dim(2) || mv.dim(3) != av.dim(3))
            throw ContractViolation("avfm: visual/audio spatial size mismatch");
        const int h = filter.forward(t, f_audio, trainable);
        auto [vr, vi] = t.fft2(f_mod);
        return t.ifft2_real(t.mul(vr, h), t.mul(vi, h));
    }

    void visit(const std::string& prefix, ParamList<T>& out) {
        filter.visit(prefix + ".filter", out);
    }
};

template <typename T>
struct FreakModel {
    ModelConfig cfg;

    std::vector<InvertedResidualBlock<T>> enc_ref, enc_masked, audio_enc;
    std::vector<VefmBlock<T>> vefm;          // when use_vefm
    std::vector<Conv2dLayer<T>> fuse_visual; // concat baseline otherwise
    AvfmBlock<T> avfm;                       // when use_avfm
    Conv2dLayer<T> fuse_audio;               // concat baseline otherwise
    std::vector<Conv2dLayer<T>> dec_fuse;
    std::vector<InstanceNormLayer<T>> dec_fuse_norm;
    std::vector<InvertedResidualBlock<T>> dec_block;
    InvertedResidualBlock<T> head_block;
    Conv2dLayer<T> out_conv;

    static FreakModel build(const ModelConfig& cfg_in) {
        ModelConfig cfg = cfg_in;
        cfg.validate();
        FreakModel m;
        m.cfg = cfg;
        const int t_stages = cfg.stages;
        const int e = cfg.expansion;

        auto make_encoder = [&](std::vector<InvertedResidualBlock<T>>& enc) {
            int prev = 3;
            for (int i = 0; i < t_stages; ++i) {
                enc.emplace_back(prev, cfg.widths[static_cast<size_t>(i)], 2, e);
                prev = cfg.widths[static_cast<size_t>(i)];
            }
        };
        make_encoder(m.enc_ref);
        make_encoder(m.enc_masked);

        // audio path: [32,32,32] input grid down to the scale-t grid
        const int c_a = cfg.audio_channels();
        const int grid = cfg.bottleneck_grid();
        int down_steps = 0;
        for (int g = 32; g > grid; g >>= 1) ++down_steps;
        int prev = 32;
        for (int k = 1; k <= down_steps; ++k) {
            const int ch = std::max(8, c_a >> (down_steps - k));
            m.audio_enc.emplace_back(prev, ch, 2, e);
            prev = ch;
        }
        m.audio_enc.emplace_back(prev, c_a, 1, e);  // stride-1 refinement

        const int c_t = cfg.widths.back();
        if (cfg.use_vefm) {
            int size = cfg.image_size;
            for (int i = 0; i < t_stages; ++i) {
                size >>= 1;
                const int ch = cfg.widths[static_cast<size_t>(i)];
                m.vefm.emplace_back(ch, ch, size, size);
            }
        } else {
            for (int i = 0; i < t_stages; ++i) {
                const int ch = cfg.widths[static_cast<size_t>(i)];
                m.fuse_visual.emplace_back(2 * ch, ch, 1, 1, 0, 1, true);
            }
        }
        if (cfg.use_avfm) m.avfm = AvfmBlock<T>(c_a, c_t);
        else m.fuse_audio = Conv2dLayer<T>(c_t + c_a, c_t, 1, 1, 0, 1, true);

        int carry = c_t;
        for (int i = t_stages - 2; i >= 0; --i) {
            const int skip_ch = cfg.widths[static_cast<size_t>(i)];
            m.dec_fuse.emplace_back(carry + skip_ch, skip_ch, 1, 1, 0, 1, false);
            m.dec_fuse_norm.emplace_back(skip_ch);
            m.dec_block.emplace_back(skip_ch, skip_ch, 1, e);
            carry = skip_ch;
        }
        m.head_block = InvertedResidualBlock<T>(carry, carry, 1, e);
        m.out_conv = Conv2dLayer<T>(carry, 3, 3, 1, 1, 1, true);

        Rng rng(cfg.seed);
        m.init_all(rng);
        return m;
    }

    void init_all(Rng& rng) {
        for (auto& b : enc_ref) b.init(rng);
        for (auto& b : enc_masked) b.init(rng);
        for (auto& b : audio_enc) b.init(rng);
        for (auto& v : vefm) v.init(rng);
        for (auto& f : fuse_visual) f.init(rng);
        if (cfg.use_avfm) avfm.init(rng);
        else fuse_audio.init(rng);
        for (auto& f : dec_fuse) f.init(rng);
        for (auto& b : dec_block) b.init(rng);
        head_block.init(rng);
        out_conv.init(rng);
    }

    // reference/masked: [N,3,S,S]; audio: [N,32,32,32]; returns [N,3,S,S].
    int forward(Tape<T>& t, int reference, int masked, int audio, bool trainable = true) {
        const Tensor<T>& rv = t.value(reference);
        if (rv.rank() != 4 || rv.dim(1) != 3 || rv.dim(2) != cfg.image_size ||
            rv.dim(3) != cfg.image_size)
            throw ContractViolation("model forward: reference shape mismatch with config");
        const Tensor<T>& mv = t.value(masked);
        if (!rv.same_shape(mv))
            throw ContractViolation("model forward: masked shape mismatch");
        const Tensor<T>& av = t.value(audio);
        if (av.rank() != 4 || av.dim(1) != 32 || av.dim(2) != 32 || av.dim(3) != 32)
            throw ContractViolation("model forward: audio must be [N,32,32,32]");

        std::vector<int> f_ref(static_cast<size_t>(cfg.stages));
        std::vector<int> f_masked(static_cast<size_t>(cfg.stages));
        int r = reference, mk = masked;
        for (int i = 0; i < cfg.stages; ++i) {
            r = enc_ref[static_cast<size_t>(i)].forward(t, r, trainable);
            mk = enc_masked[static_cast<size_t>(i)].forward(t, mk, trainable);
            f_ref[static_cast<size_t>(i)] = r;
            f_masked[static_cast<size_t>(i)] = mk;
        }

        int a = audio;
        for (auto& b : audio_enc) a = b.forward(t, a, trainable);

        std::vector<int> f_mod(static_cast<size_t>(cfg.stages));
        for (int i = 0; i < cfg.stages; ++i) {
            if (cfg.use_vefm) {
                f_mod[static_cast<size_t>(i)] = vefm[static_cast<size_t>(i)].forward(
                    t, f_ref[static_cast<size_t>(i)], f_masked[static_cast<size_t>(i)], trainable);
            } else {
                const int cat = t.concat_channels(f_ref[static_cast<size_t>(i)],
                                                  f_masked[static_cast<size_t>(i)]);
                f_mod[static_cast<size_t>(i)] =
                    fuse_visual[static_cast<size_t>(i)].forward(t, cat, trainable);
            }
        }

        int x = f_mod[static_cast<size_t>(cfg.stages - 1)];
        if (cfg.use_avfm) {
            x = avfm.forward(t, x, a, trainable);
        } else {
            x = fuse_audio.forward(t, t.concat_channels(x, a), trainable);
        }

        for (size_t d = 0; d < dec_block.size(); ++d) {
            const int skip_scale = cfg.stages - 2 - static_cast<int>(d);
            x = t.upsample2x(x);
            x = t.concat_channels(x, f_mod[static_cast<size_t>(skip_scale)]);
            x = dec_fuse[d].forward(t, x, trainable);
            x = dec_fuse_norm[d].forward(t, x, trainable);
            x = t.silu(x);
            x = dec_block[d].forward(t, x, trainable);
        }
        x = t.upsample2x(x);
        x = head_block.forward(t, x, trainable);
        x = out_conv.forward(t, x, trainable);
        return t.sigmoid(x);
    }

    // Audio branch alone: [N,32,32,32] -> [N,C_a,grid,grid].
    int audio_forward(Tape<T>& t, int audio, bool trainable = true) {
        int a = audio;
        for (auto& b : audio_enc) a = b.forward(t, a, trainable);
        return a;
    }

    // Single-sample convenience without gradients: [3,S,S] + [32,32,32].
    Tensor<T> forward_one(const Tensor<T>& reference, const Tensor<T>& masked,
                          const Tensor<T>& audio) {
        Tape<T> t(false);
        const int r = t.constant(reference.reshaped({1, reference.dim(0), reference.dim(1),
                                                     reference.dim(2)}));
        const int m = t.constant(masked.reshaped({1, masked.dim(0), masked.dim(1), masked.dim(2)}));
        const int a = t.constant(audio.reshaped({1, 32, 32, 32}));
        const int out = forward(t, r, m, a, false);
        return t.value(out).reshaped({3, cfg.image_size, cfg.image_size});
    }

    void collect_params(ParamList<T>& out) {
        for (size_t i = 0; i < enc_ref.size(); ++i)
            enc_ref[i].visit("enc_ref.s" + std::to_string(i), out);
        for (size_t i = 0; i < enc_masked.size(); ++i)
            enc_masked[i].visit("enc_masked.s" + std::to_string(i), out);
        for (size_t i = 0; i < audio_enc.size(); ++i)
            audio_enc[i].visit("audio.s" + std::to_string(i), out);
        for (size_t i = 0; i < vefm.size(); ++i)
            vefm[i].visit("vefm" + std::to_string(i), out);
        for (size_t i = 0; i < fuse_visual.size(); ++i)
            fuse_visual[i].visit("fuse_visual" + std::to_string(i), out);
        if (cfg.use_avfm) avfm.visit("avfm", out);
        else fuse_audio.visit("fuse_audio", out);
        for (size_t i = 0; i < dec_fuse.size(); ++i) {
            dec_fuse[i].visit("dec.fuse" + std::to_string(i), out);
            dec_fuse_norm[i].visit("dec.fuse_norm" + std::to_string(i), out);
        }
        for (size_t i = 0; i < dec_block.size(); ++i)
            dec_block[i].visit("dec.block" + std::to_string(i), out);
        head_block.visit("head", out);
        out_conv.visit("out", out);
    }

    int64_t param_count() {
        ParamList<T> params;
        collect_params(params);
        int64_t n = 0;
        for (const auto& p : params) n += p.value->numel();
        return n;
    }
};

}  // namespace freak
