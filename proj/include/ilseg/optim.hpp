#pragma once

#include "ilseg/unet.hpp"

namespace ilseg {

// Decoupled-weight-decay Adam. Decay is applied directly to the parameter
// (not through the gradient) and skipped for groupnorm scale/shift and biases
// unless decay_all is set.
template <class T>
class AdamW {
public:
    AdamW(const AdamWHyper& hyper, const Network<T>& net, bool decay_all = false);

    // m <- b1 m + (1-b1) g; v <- b2 v + (1-b2) g^2; bias-corrected m̂, v̂;
    // theta <- theta - lr (m̂/(sqrt(v̂)+eps) + wd theta). NumericError naming
    // the parameter on a non-finite gradient.
    void step(Network<T>& net);

    int64_t step_count() const { return state_.step_count; }
    const OptimizerSnapshot<T>& snapshot() const { return state_; }
    void restore(const OptimizerSnapshot<T>& snap);

private:
    OptimizerSnapshot<T> state_;
    bool decay_all_;
};

}  // namespace ilseg
