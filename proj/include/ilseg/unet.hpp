#pragma once

#include <string>

#include "ilseg/nn_ops.hpp"

namespace ilseg {

// Dual-head 3D U-Net: 4 encoder levels (two conv+GN+ReLU blocks each, maxpool
// between), mirrored decoder with nearest-neighbor upsampling and skip
// concatenation [skip | upsampled], and a final 1x1x1 conv followed by a
// per-channel sigmoid.
struct UNetConfig {
    int64_t in_channels = 1;
    int64_t out_channels = 1;
    std::vector<int64_t> encoder_channels{8, 16, 32, 64};
    int64_t groupnorm_groups = 4;

    void validate() const;
};

template <class T>
struct Param {
    std::string name;
    std::vector<int64_t> shape;
    std::vector<T> value;
    std::vector<T> grad;
    bool decay = false;  // groupnorm scale/shift and biases are excluded from weight decay
};

template <class T>
struct Network {
    UNetConfig config;
    std::vector<Param<T>> params;  // construction order is the stable, documented order

    Param<T>& find(const std::string& name);
    const Param<T>& find(const std::string& name) const;
    void zero_grad();
    int64_t parameter_count() const;
    void check_finite() const;
};

// He-normal conv weights (std = sqrt(2/fan_in)), zero biases, unit groupnorm
// scale, zero shift. Deterministic given seed.
template <class T>
Network<T> init_parameters(const UNetConfig& config, uint64_t seed);

// Stored activations for the backward pass.
template <class T>
struct UNetTrace;

// x: [n, in_channels, Z, Y, X] with spatial dims divisible by 8. Returns
// per-channel sigmoid probabilities with the input's spatial shape. Passing a
// trace enables unet_backward.
template <class T>
Tensor5<T> unet_forward(const Network<T>& net, const Tensor5<T>& x, UNetTrace<T>* trace = nullptr);

// grad_probs: dLoss/dprobs. Accumulates parameter gradients into net.params
// and returns dLoss/dinput.
template <class T>
Tensor5<T> unet_backward(Network<T>& net, const UNetTrace<T>& trace, const Tensor5<T>& grad_probs);

template <class T>
UNetTrace<T>* new_unet_trace();
template <class T>
void free_unet_trace(UNetTrace<T>*);

// RAII wrapper for the opaque trace.
template <class T>
class TraceHolder {
public:
    TraceHolder() : t_(new_unet_trace<T>()) {}
    ~TraceHolder() { free_unet_trace<T>(t_); }
    TraceHolder(const TraceHolder&) = delete;
    TraceHolder& operator=(const TraceHolder&) = delete;
    UNetTrace<T>* get() { return t_; }

private:
    UNetTrace<T>* t_;
};

// --- SNET checkpoint ------------------------------------------------------
// "SNET" magic + u32 LE header length + JSON manifest (config, parameter
// names/shapes/byte offsets, optional optimizer state) + little-endian f32
// payload. Bit-exact round trip.

struct AdamWHyper {
    double lr = 3e-4;
    double weight_decay = 5e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

template <class T>
struct OptimizerSnapshot {
    AdamWHyper hyper;
    int64_t step_count = 0;
    std::vector<std::vector<T>> m;  // parallel to params
    std::vector<std::vector<T>> v;
};

template <class T>
void save_checkpoint(const Network<T>& net, const OptimizerSnapshot<T>* opt,
                     const std::string& path);

template <class T>
struct Checkpoint {
    Network<T> net;
    bool has_optimizer = false;
    OptimizerSnapshot<T> optimizer;
};

template <class T>
Checkpoint<T> load_checkpoint(const std::string& path);

}  // namespace ilseg
