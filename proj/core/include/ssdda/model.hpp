#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "ssdda/params.hpp"
#include "ssdda/types.hpp"

namespace ssdda {

/// Channel-major (plane-per-channel) buffer used inside the network; the
/// contiguous rows keep the convolution inner loops vectorizable.
struct Tensor3 {
    int channels = 0;
    int height = 0;
    int width = 0;
    std::vector<double> data; // c * H * W + y * W + x

    Tensor3() = default;
    Tensor3(int c, int h, int w)
        : channels(c), height(h), width(w),
          data(static_cast<std::size_t>(c) * h * w, 0.0) {}

    double* plane(int c) { return data.data() + static_cast<std::size_t>(c) * height * width; }
    const double* plane(int c) const {
        return data.data() + static_cast<std::size_t>(c) * height * width;
    }
};

/// Architecture description for the fully convolutional segmentation network:
/// repeated [k x k same-padding convolution -> ReLU] over hidden_channels,
/// then a 1 x 1 convolution to num_classes and a per-pixel softmax.
struct NetworkConfig {
    int in_channels = 3;
    int num_classes = 0;
    std::vector<int> hidden_channels = {16, 32, 32};
    int kernel_size = 3;
    std::uint64_t seed = 0;

    void validate() const;
};

struct LayerShape {
    std::string name;
    int in_ch = 0;
    int out_ch = 0;
    int ksize = 0;
};

/// Layer list derived from a config: conv1..convN (kernel_size), then head (1x1).
std::vector<LayerShape> layer_shapes(const NetworkConfig& cfg);

enum class NetRole { student, teacher };

/// A network is its config plus a ParamSet; the teacher role is only ever
/// written through ema_update.
struct SegNetwork {
    NetworkConfig config;
    ParamSet params;
    NetRole role = NetRole::student;

    /// Incremented whenever params are replaced; forward traces record it so
    /// a stale trace is rejected by backward().
    std::uint64_t params_version = 0;

    void set_params(ParamSet p) {
        params = std::move(p);
        ++params_version;
    }
};

/// Cached activations from one forward pass, consumed by backward().
struct ForwardTrace {
    int height = 0;
    int width = 0;
    std::uint64_t params_version = 0;
    Tensor3 input;              // network input, channel-major
    std::vector<Tensor3> pre;   // pre-activation of every layer, head last
};

/// Fan-in scaled uniform init (bound sqrt(6 / fan_in)), zero biases,
/// deterministic in cfg.seed.
SegNetwork init_network(const NetworkConfig& cfg);

/// Full forward pass returning per-pixel class probabilities and the trace
/// needed for backpropagation. Spatial size is preserved.
std::pair<ProbMap, ForwardTrace> forward(const SegNetwork& net, const SegImage& x);

/// Forward pass without trace bookkeeping (teacher predictions, evaluation).
ProbMap forward_probs(const SegNetwork& net, const SegImage& x);

/// Backpropagates dLoss/dLogits through the traced forward pass and returns
/// parameter gradients shaped like net.params. Throws InvalidInput when the
/// trace does not belong to the network's current parameters.
ParamSet backward(const SegNetwork& net, const ForwardTrace& trace, const PixelField& grad_logits);

/// out = alpha * teacher + (1 - alpha) * student, element-wise.
ParamSet ema_update(const ParamSet& teacher, const ParamSet& student, double alpha);

/// Reconstructs the architecture from parameter entry shapes (conv1..convN
/// weights plus the 1x1 head); used when loading checkpoints that carry no
/// side-channel config. The returned seed is meaningless.
NetworkConfig infer_network_config(const ParamSet& params);

/// Wraps a bare parameter set as a ready-to-run network.
SegNetwork network_from_params(ParamSet params, NetRole role);

} // namespace ssdda
