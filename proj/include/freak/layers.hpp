#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "freak/autograd.hpp"
#include "freak/rng.hpp"

namespace freak {

template <typename T>
struct ParamInfo {
    std::string name;
    Tensor<T>* value = nullptr;
    int* ref = nullptr;  // tape leaf from the most recent forward, -1 if unbound
};

template <typename T>
using ParamList = std::vector<ParamInfo<T>>;

template <typename T>
struct Conv2dLayer {
    int in_ch = 0, out_ch = 0, kernel = 1, stride = 1, pad = 0, groups = 1;
    bool has_bias = false;
    Tensor<T> w, b;
    int w_ref = -1, b_ref = -1;

    Conv2dLayer() = default;
    Conv2dLayer(int in, int out, int k, int s, int p, int g, bool bias)
        : in_ch(in), out_ch(out), kernel(k), stride(s), pad(p), groups(g), has_bias(bias) {
        w = Tensor<T>({out_ch, in_ch / groups, kernel, kernel});
        if (has_bias) b = Tensor<T>({out_ch});
    }

    // He-style init unless an explicit weight scale is requested.
    void init(Rng& rng, double w_std = 0.0, double bias_value = 0.0) {
        const double fan_in = static_cast<double>(in_ch / groups) * kernel * kernel;
        const double std = w_std > 0.0 ? w_std : std::sqrt(2.0 / fan_in);
        for (int64_t i = 0; i < w.numel(); ++i) w[i] = static_cast<T>(rng.normal(0.0, std));
        if (has_bias)
            for (int64_t i = 0; i < b.numel(); ++i) b[i] = static_cast<T>(bias_value);
    }

    int forward(Tape<T>& t, int x, bool trainable) {
        w_ref = t.input(w, trainable);
        b_ref = has_bias ? t.input(b, trainable) : Tape<T>::kNone;
        return t.conv2d(x, w_ref, b_ref, stride, pad, groups);
    }

    void visit(const std::string& prefix, ParamList<T>& out) {
        out.push_back({prefix + ".w", &w, &w_ref});
        if (has_bias) out.push_back({prefix + ".b", &b, &b_ref});
    }
};

template <typename T>
struct InstanceNormLayer {
    int channels = 0;
    Tensor<T> gamma, beta;
    int g_ref = -1, b_ref = -1;

    InstanceNormLayer() = default;
    explicit InstanceNormLayer(int ch) : channels(ch), gamma({ch}), beta({ch}) {
        gamma.fill(T(1));
    }

    int forward(Tape<T>& t, int x, bool trainable) {
        g_ref = t.input(gamma, trainable);
        b_ref = t.input(beta, trainable);
        return t.instance_norm(x, g_ref, b_ref);
    }

    void visit(const std::string& prefix, ParamList<T>& out) {
        out.push_back({prefix + ".gamma", &gamma, &g_ref});
        out.push_back({prefix + ".beta", &beta, &b_ref});
    }
};

// Expand (1x1) -> depthwise 3x3 -> project (1x1), residual when stride 1 and
// the channel count is preserved.
template <typename T>
struct InvertedResidualBlock {
    int in_ch = 0, out_ch = 0, stride = 1, expansion = 2;
    Conv2dLayer<T> expand, depthwise, project;
    InstanceNormLayer<T> expand_norm, dw_norm, project_norm;
    bool has_expand = true;

    InvertedResidualBlock() = default;
    InvertedResidualBlock(int in, int out, int s, int e)
        : in_ch(in), out_ch(out), stride(s), expansion(e) {
        if (s != 1 && s != 2) throw ConfigError("inverted residual stride must be 1 or 2");
        const int hidden = in_ch * expansion;
        has_expand = expansion != 1;
        if (has_expand) {
            expand = Conv2dLayer<T>(in_ch, hidden, 1, 1, 0, 1, false);
            expand_norm = InstanceNormLayer<T>(hidden);
        }
        depthwise = Conv2dLayer<T>(hidden, hidden, 3, stride, 1, hidden, false);
        dw_norm = InstanceNormLayer<T>(hidden);
        project = Conv2dLayer<T>(hidden, out_ch, 1, 1, 0, 1, false);
        project_norm = InstanceNormLayer<T>(out_ch);
    }

    bool uses_residual() const { return stride == 1 && in_ch == out_ch; }

    void init(Rng& rng) {
        if (has_expand) expand.init(rng);
        depthwise.init(rng);
        project.init(rng);
    }

    int forward(Tape<T>& t, int x, bool trainable) {
        int h = x;
        if (has_expand) {
            h = expand.forward(t, h, trainable);
            h = expand_norm.forward(t, h, trainable);
            h = t.silu(h);
        }
        h = depthwise.forward(t, h, trainable);
        h = dw_norm.forward(t, h, trainable);
        h = t.silu(h);
        h = project.forward(t, h, trainable);
        h = project_norm.forward(t, h, trainable);
        if (uses_residual()) h = t.add(x, h);
        return h;
    }

    void visit(const std::string& prefix, ParamList<T>& out) {
        if (has_expand) {
            expand.visit(prefix + ".expand", out);
            expand_norm.visit(prefix + ".expand_norm", out);
        }
        depthwise.visit(prefix + ".dw", out);
        dw_norm.visit(prefix + ".dw_norm", out);
        project.visit(prefix + ".project", out);
        project_norm.visit(prefix + ".project_norm", out);
    }
};

// Linear feature branch gated by a sigmoid branch (GLU-style), so an exact
// identity configuration exists: delta-kernel feature weights + saturated gate.
template <typename T>
struct GatedConvLayer {
    int channels = 0;
    Conv2dLayer<T> feature, gate;

    GatedConvLayer() = default;
    explicit GatedConvLayer(int ch)
        : channels(ch),
          feature(ch, ch, 3, 1, 1, 1, true),
          gate(ch, ch, 3, 1, 1, 1, true) {}

    void init(Rng& rng) {
        feature.init(rng);
        gate.init(rng);
    }

    int forward(Tape<T>& t, int x, bool trainable) {
        const int f = feature.forward(t, x, trainable);
        const int g = t.sigmoid(gate.forward(t, x, trainable));
        return t.mul(f, g);
    }

    void visit(const std::string& prefix, ParamList<T>& out) {
        feature.visit(prefix + ".f", out);
        gate.visit(prefix + ".g", out);
    }
};

}  // namespace freak
