#include "ssdda/model.hpp"

#include <algorithm>
#include <cmath>

#include "ssdda/rng.hpp"

namespace ssdda {

void NetworkConfig::validate() const {
    if (in_channels <= 0)
        throw InvalidConfig("in_channels must be positive");
    if (num_classes < 2)
        throw InvalidConfig("num_classes must be >= 2");
    if (hidden_channels.empty())
        throw InvalidConfig("hidden_channels must be non-empty");
    for (int h : hidden_channels)
        if (h <= 0)
            throw InvalidConfig("hidden channel counts must be positive");
    if (kernel_size <= 0 || kernel_size % 2 == 0)
        throw InvalidConfig("kernel_size must be odd and positive");
}

std::vector<LayerShape> layer_shapes(const NetworkConfig& cfg) {
    cfg.validate();
    std::vector<LayerShape> layers;
    int in_ch = cfg.in_channels;
    for (std::size_t i = 0; i < cfg.hidden_channels.size(); ++i) {
        layers.push_back({"conv" + std::to_string(i + 1), in_ch, cfg.hidden_channels[i],
                          cfg.kernel_size});
        in_ch = cfg.hidden_channels[i];
    }
    layers.push_back({"head", in_ch, cfg.num_classes, 1});
    return layers;
}

SegNetwork init_network(const NetworkConfig& cfg) {
    cfg.validate();
    Rng rng(cfg.seed);
    SegNetwork net;
    net.config = cfg;
    for (const auto& l : layer_shapes(cfg)) {
        const int fan_in = l.in_ch * l.ksize * l.ksize;
        const double bound = std::sqrt(6.0 / fan_in);
        std::vector<double> w(static_cast<std::size_t>(l.out_ch) * l.in_ch * l.ksize * l.ksize);
        for (double& v : w)
            v = rng.uniform(-bound, bound);
        net.params.add(l.name + ".weight",
                       {static_cast<std::uint32_t>(l.out_ch), static_cast<std::uint32_t>(l.in_ch),
                        static_cast<std::uint32_t>(l.ksize), static_cast<std::uint32_t>(l.ksize)},
                       std::move(w));
        net.params.add_zeros(l.name + ".bias", {static_cast<std::uint32_t>(l.out_ch)});
    }
    net.params_version = 1;
    return net;
}

namespace {

// Copy of t with a zero border of `pad` cells on every side of each plane,
// so convolution inner loops run branch-free over full rows.
Tensor3 zero_padded(const Tensor3& t, int pad) {
    const int Wp = t.width + 2 * pad;
    Tensor3 padded(t.channels, t.height + 2 * pad, Wp);
    for (int c = 0; c < t.channels; ++c) {
        const double* src = t.plane(c);
        double* dst = padded.plane(c) + static_cast<std::size_t>(pad) * Wp + pad;
        for (int y = 0; y < t.height; ++y)
            std::copy(src + static_cast<std::size_t>(y) * t.width,
                      src + static_cast<std::size_t>(y + 1) * t.width,
                      dst + static_cast<std::size_t>(y) * Wp);
    }
    return padded;
}

// acc[x] += sum over the k*k taps of w (optionally flipped) against the
// padded rows starting at prow0. Elementwise in x, so it vectorizes without
// reordering any floating-point sums.
inline void accumulate_rows_3x3(double* acc, const double* prow0, std::size_t stride,
                                const double* wk, bool flipped, int W) {
    const double w0 = wk[flipped ? 8 : 0], w1 = wk[flipped ? 7 : 1], w2 = wk[flipped ? 6 : 2];
    const double w3 = wk[flipped ? 5 : 3], w4 = wk[flipped ? 4 : 4], w5 = wk[flipped ? 3 : 5];
    const double w6 = wk[flipped ? 2 : 6], w7 = wk[flipped ? 1 : 7], w8 = wk[flipped ? 0 : 8];
    const double* r0 = prow0;
    const double* r1 = prow0 + stride;
    const double* r2 = prow0 + 2 * stride;
    for (int x = 0; x < W; ++x)
        acc[x] += w0 * r0[x] + w1 * r0[x + 1] + w2 * r0[x + 2] + w3 * r1[x] + w4 * r1[x + 1] +
                  w5 * r1[x + 2] + w6 * r2[x] + w7 * r2[x + 1] + w8 * r2[x + 2];
}

inline void accumulate_rows_generic(double* acc, const double* prow0, std::size_t stride,
                                    const double* wk, bool flipped, int k, int W) {
    for (int ky = 0; ky < k; ++ky) {
        const double* prow = prow0 + static_cast<std::size_t>(ky) * stride;
        for (int kx = 0; kx < k; ++kx) {
            const double wv = flipped ? wk[(k - 1 - ky) * k + (k - 1 - kx)] : wk[ky * k + kx];
            const double* src = prow + kx;
            for (int x = 0; x < W; ++x)
                acc[x] += wv * src[x];
        }
    }
}

// out[oc] = bias[oc] + sum_ic correlate(in[ic], w[oc][ic]); same padding,
// stride 1.
void conv_forward(const Tensor3& in, const double* w, const double* b, int out_ch, int k,
                  Tensor3& out) {
    const int H = in.height, W = in.width, IC = in.channels;
    const int pad = k / 2;
    const std::size_t Wp = static_cast<std::size_t>(W) + 2 * pad;
    out = Tensor3(out_ch, H, W);
    const Tensor3 padded = zero_padded(in, pad);
    for (int oc = 0; oc < out_ch; ++oc) {
        double* op = out.plane(oc);
        std::fill(op, op + static_cast<std::size_t>(H) * W, b[oc]);
        for (int ic = 0; ic < IC; ++ic) {
            const double* pp = padded.plane(ic);
            const double* wk = w + (static_cast<std::size_t>(oc) * IC + ic) * k * k;
            for (int y = 0; y < H; ++y) {
                double* orow = op + static_cast<std::size_t>(y) * W;
                const double* prow0 = pp + static_cast<std::size_t>(y) * Wp;
                if (k == 3)
                    accumulate_rows_3x3(orow, prow0, Wp, wk, false, W);
                else
                    accumulate_rows_generic(orow, prow0, Wp, wk, false, k, W);
            }
        }
    }
}

// delta_in[ic] = sum_oc convolve(delta_out[oc], w[oc][ic]): the transpose of
// the forward correlation, i.e. correlation with the 180-degree-flipped
// kernel over the padded upstream gradient.
void conv_backward_input(const Tensor3& delta_out, const double* w, int in_ch, int k,
                         Tensor3& delta_in) {
    const int H = delta_out.height, W = delta_out.width, OC = delta_out.channels;
    const int pad = k / 2;
    const std::size_t Wp = static_cast<std::size_t>(W) + 2 * pad;
    delta_in = Tensor3(in_ch, H, W);
    const Tensor3 padded = zero_padded(delta_out, pad);
    for (int ic = 0; ic < in_ch; ++ic) {
        double* dip = delta_in.plane(ic);
        for (int oc = 0; oc < OC; ++oc) {
            const double* pp = padded.plane(oc);
            const double* wk = w + (static_cast<std::size_t>(oc) * in_ch + ic) * k * k;
            for (int y = 0; y < H; ++y) {
                double* drow = dip + static_cast<std::size_t>(y) * W;
                const double* prow0 = pp + static_cast<std::size_t>(y) * Wp;
                if (k == 3)
                    accumulate_rows_3x3(drow, prow0, Wp, wk, true, W);
                else
                    accumulate_rows_generic(drow, prow0, Wp, wk, true, k, W);
            }
        }
    }
}

// gw[oc][ic][ky][kx] = <delta_out[oc], shifted in[ic]>; gb[oc] = sum delta_out[oc].
// One pass per (oc, ic) with k*k independent accumulators.
void conv_backward_params(const Tensor3& delta_out, const Tensor3& in, int k, double* gw,
                          double* gb) {
    const int H = in.height, W = in.width, IC = in.channels, OC = delta_out.channels;
    const int pad = k / 2;
    const std::size_t Wp = static_cast<std::size_t>(W) + 2 * pad;
    const Tensor3 padded = zero_padded(in, pad);
    std::vector<double> acc(static_cast<std::size_t>(k) * k);
    for (int oc = 0; oc < OC; ++oc) {
        const double* dop = delta_out.plane(oc);
        double acc_b = 0.0;
        for (std::size_t i = 0; i < static_cast<std::size_t>(H) * W; ++i)
            acc_b += dop[i];
        gb[oc] = acc_b;
        for (int ic = 0; ic < IC; ++ic) {
            const double* pp = padded.plane(ic);
            double* gwk = gw + (static_cast<std::size_t>(oc) * IC + ic) * k * k;
            if (k == 3) {
                double a0 = 0, a1 = 0, a2 = 0, a3 = 0, a4 = 0, a5 = 0, a6 = 0, a7 = 0, a8 = 0;
                for (int y = 0; y < H; ++y) {
                    const double* dorow = dop + static_cast<std::size_t>(y) * W;
                    const double* r0 = pp + static_cast<std::size_t>(y) * Wp;
                    const double* r1 = r0 + Wp;
                    const double* r2 = r1 + Wp;
                    for (int x = 0; x < W; ++x) {
                        const double d = dorow[x];
                        a0 += d * r0[x];
                        a1 += d * r0[x + 1];
                        a2 += d * r0[x + 2];
                        a3 += d * r1[x];
                        a4 += d * r1[x + 1];
                        a5 += d * r1[x + 2];
                        a6 += d * r2[x];
                        a7 += d * r2[x + 1];
                        a8 += d * r2[x + 2];
                    }
                }
                gwk[0] = a0, gwk[1] = a1, gwk[2] = a2;
                gwk[3] = a3, gwk[4] = a4, gwk[5] = a5;
                gwk[6] = a6, gwk[7] = a7, gwk[8] = a8;
            } else {
                std::fill(acc.begin(), acc.end(), 0.0);
                for (int y = 0; y < H; ++y) {
                    const double* dorow = dop + static_cast<std::size_t>(y) * W;
                    const double* prow0 = pp + static_cast<std::size_t>(y) * Wp;
                    for (int ky = 0; ky < k; ++ky) {
                        const double* prow = prow0 + static_cast<std::size_t>(ky) * Wp;
                        for (int kx = 0; kx < k; ++kx) {
                            double a = 0.0;
                            const double* src = prow + kx;
                            for (int x = 0; x < W; ++x)
                                a += dorow[x] * src[x];
                            acc[static_cast<std::size_t>(ky) * k + kx] += a;
                        }
                    }
                }
                std::copy(acc.begin(), acc.end(), gwk);
            }
        }
    }
}

Tensor3 relu(const Tensor3& z) {
    Tensor3 a = z;
    for (double& v : a.data)
        v = v > 0.0 ? v : 0.0;
    return a;
}

Tensor3 image_to_planes(const SegImage& x) {
    Tensor3 t(x.channels, x.height, x.width);
    const std::size_t pixels = static_cast<std::size_t>(x.height) * x.width;
    for (int c = 0; c < x.channels; ++c) {
        double* p = t.plane(c);
        for (std::size_t i = 0; i < pixels; ++i)
            p[i] = x.data[i * x.channels + c];
    }
    return t;
}

Tensor3 field_to_planes(const PixelField& f) {
    Tensor3 t(f.channels, f.height, f.width);
    const std::size_t pixels = static_cast<std::size_t>(f.height) * f.width;
    for (int c = 0; c < f.channels; ++c) {
        double* p = t.plane(c);
        for (std::size_t i = 0; i < pixels; ++i)
            p[i] = f.data[i * f.channels + c];
    }
    return t;
}

ProbMap softmax_pixels(const Tensor3& logits) {
    const int C = logits.channels, H = logits.height, W = logits.width;
    ProbMap out(H, W, C);
    const std::size_t plane = static_cast<std::size_t>(H) * W;
    std::vector<double> row(C);
    for (std::size_t i = 0; i < plane; ++i) {
        double mx = logits.data[i];
        for (int c = 1; c < C; ++c)
            mx = std::max(mx, logits.data[c * plane + i]);
        double sum = 0.0;
        for (int c = 0; c < C; ++c) {
            row[c] = std::exp(logits.data[c * plane + i] - mx);
            sum += row[c];
        }
        const double inv = 1.0 / sum;
        for (int c = 0; c < C; ++c)
            out.data[i * C + c] = row[c] * inv;
    }
    return out;
}

struct LayerView {
    const double* w;
    const double* b;
    int in_ch;
    int out_ch;
    int k;
};

std::vector<LayerView> layer_views(const SegNetwork& net) {
    std::vector<LayerView> views;
    for (const auto& l : layer_shapes(net.config)) {
        const auto& w = net.params.at(l.name + ".weight");
        const auto& b = net.params.at(l.name + ".bias");
        views.push_back({w.values.data(), b.values.data(), l.in_ch, l.out_ch, l.ksize});
    }
    return views;
}

Tensor3 run_layers(const SegNetwork& net, const SegImage& x, ForwardTrace* trace) {
    if (x.channels != net.config.in_channels)
        throw InvalidInput("forward: input has " + std::to_string(x.channels) +
                           " channels, network expects " +
                           std::to_string(net.config.in_channels));
    const auto views = layer_views(net);
    Tensor3 act = image_to_planes(x);
    if (trace) {
        trace->height = x.height;
        trace->width = x.width;
        trace->params_version = net.params_version;
        trace->input = act;
        trace->pre.clear();
        trace->pre.reserve(views.size());
    }
    for (std::size_t l = 0; l < views.size(); ++l) {
        Tensor3 z;
        conv_forward(act, views[l].w, views[l].b, views[l].out_ch, views[l].k, z);
        if (trace)
            trace->pre.push_back(z);
        act = (l + 1 < views.size()) ? relu(z) : std::move(z);
    }
    return act;
}

} // namespace

std::pair<ProbMap, ForwardTrace> forward(const SegNetwork& net, const SegImage& x) {
    ForwardTrace trace;
    Tensor3 logits = run_layers(net, x, &trace);
    return {softmax_pixels(logits), std::move(trace)};
}

ProbMap forward_probs(const SegNetwork& net, const SegImage& x) {
    return softmax_pixels(run_layers(net, x, nullptr));
}

ParamSet backward(const SegNetwork& net, const ForwardTrace& trace, const PixelField& grad_logits) {
    const auto layers = layer_shapes(net.config);
    if (trace.params_version != net.params_version)
        throw InvalidInput("backward: trace is stale for this network's parameters");
    if (trace.pre.size() != layers.size())
        throw InvalidInput("backward: trace layer count mismatch");
    if (grad_logits.height != trace.height || grad_logits.width != trace.width ||
        grad_logits.channels != net.config.num_classes)
        throw InvalidInput("backward: grad_logits shape mismatch");

    const auto views = layer_views(net);
    ParamSet grads = zeros_like(net.params);

    Tensor3 delta = field_to_planes(grad_logits);
    Tensor3 a_prev_buf;
    for (int l = static_cast<int>(views.size()) - 1; l >= 0; --l) {
        if (l > 0)
            a_prev_buf = relu(trace.pre[l - 1]);
        const Tensor3& a_prev = (l == 0) ? trace.input : a_prev_buf;
        double* gw = grads.at(layers[l].name + ".weight").values.data();
        double* gb = grads.at(layers[l].name + ".bias").values.data();
        conv_backward_params(delta, a_prev, views[l].k, gw, gb);
        if (l > 0) {
            Tensor3 delta_prev;
            conv_backward_input(delta, views[l].w, views[l].in_ch, views[l].k, delta_prev);
            // ReLU gate of the previous layer
            const Tensor3& z_prev = trace.pre[l - 1];
            for (std::size_t i = 0; i < delta_prev.data.size(); ++i)
                if (z_prev.data[i] <= 0.0)
                    delta_prev.data[i] = 0.0;
            delta = std::move(delta_prev);
        }
    }
    return grads;
}

NetworkConfig infer_network_config(const ParamSet& params) {
    const auto shape_of = [&](const std::string& name) -> const std::vector<std::uint32_t>& {
        if (!params.has(name))
            throw FormatError("parameter set lacks entry " + name);
        return params.at(name).shape;
    };
    NetworkConfig cfg;
    cfg.hidden_channels.clear();
    int prev_ch = 0;
    for (int i = 1;; ++i) {
        const std::string name = "conv" + std::to_string(i) + ".weight";
        if (!params.has(name))
            break;
        const auto& s = shape_of(name);
        if (s.size() != 4 || s[2] != s[3])
            throw FormatError("entry " + name + " is not a square conv kernel");
        if (i == 1) {
            cfg.in_channels = static_cast<int>(s[1]);
            cfg.kernel_size = static_cast<int>(s[2]);
        } else if (static_cast<int>(s[1]) != prev_ch) {
            throw FormatError("entry " + name + " does not chain onto the previous layer");
        }
        prev_ch = static_cast<int>(s[0]);
        cfg.hidden_channels.push_back(prev_ch);
    }
    if (cfg.hidden_channels.empty())
        throw FormatError("parameter set has no conv1.weight entry");
    const auto& head = shape_of("head.weight");
    if (head.size() != 4 || head[2] != 1 || head[3] != 1 ||
        static_cast<int>(head[1]) != prev_ch)
        throw FormatError("head.weight is not a chained 1x1 conv");
    cfg.num_classes = static_cast<int>(head[0]);
    cfg.seed = 0;
    cfg.validate();
    return cfg;
}

SegNetwork network_from_params(ParamSet params, NetRole role) {
    SegNetwork net;
    net.config = infer_network_config(params);
    net.role = role;
    // Validate completeness/order against the canonical layout.
    ParamSet canonical;
    for (const auto& l : layer_shapes(net.config)) {
        canonical.add_zeros(l.name + ".weight",
                            {static_cast<std::uint32_t>(l.out_ch),
                             static_cast<std::uint32_t>(l.in_ch),
                             static_cast<std::uint32_t>(l.ksize),
                             static_cast<std::uint32_t>(l.ksize)});
        canonical.add_zeros(l.name + ".bias", {static_cast<std::uint32_t>(l.out_ch)});
    }
    if (!compatible(canonical, params))
        throw FormatError("parameter set does not match the conv1..convN + head layout");
    net.params = std::move(params);
    net.params_version = 1;
    return net;
}

ParamSet ema_update(const ParamSet& teacher, const ParamSet& student, double alpha) {
    if (!compatible(teacher, student))
        throw InvalidInput("ema_update: incompatible ParamSets");
    if (!(alpha >= 0.0 && alpha <= 1.0))
        throw InvalidConfig("ema alpha must lie in [0, 1]");
    ParamSet out = teacher;
    for (std::size_t i = 0; i < out.entries.size(); ++i) {
        double* o = out.entries[i].values.data();
        const double* s = student.entries[i].values.data();
        const std::size_t n = out.entries[i].values.size();
        for (std::size_t k = 0; k < n; ++k)
            o[k] = alpha * o[k] + (1.0 - alpha) * s[k];
    }
    return out;
}

} // namespace ssdda
