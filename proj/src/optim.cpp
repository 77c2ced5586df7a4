#include "ilseg/optim.hpp"

#include <cmath>

namespace ilseg {

template <class T>
AdamW<T>::AdamW(const AdamWHyper& hyper, const Network<T>& net, bool decay_all)
    : decay_all_(decay_all) {
    if (!(hyper.lr >= 0.0) || !(hyper.weight_decay >= 0.0))
        throw ConfigError("adamw: lr and weight_decay must be non-negative");
    state_.hyper = hyper;
    state_.step_count = 0;
    state_.m.resize(net.params.size());
    state_.v.resize(net.params.size());
    for (size_t i = 0; i < net.params.size(); ++i) {
        state_.m[i].assign(net.params[i].value.size(), T(0));
        state_.v[i].assign(net.params[i].value.size(), T(0));
    }
}

template <class T>
void AdamW<T>::step(Network<T>& net) {
    const auto& h = state_.hyper;
    ++state_.step_count;
    const double t = static_cast<double>(state_.step_count);
    const double bc1 = 1.0 - std::pow(h.beta1, t);
    const double bc2 = 1.0 - std::pow(h.beta2, t);

    for (size_t pi = 0; pi < net.params.size(); ++pi) {
        auto& p = net.params[pi];
        auto& m = state_.m[pi];
        auto& v = state_.v[pi];
        const double wd = (p.decay || decay_all_) ? h.weight_decay : 0.0;
        for (size_t i = 0; i < p.value.size(); ++i) {
            const double g = static_cast<double>(p.grad[i]);
            if (!std::isfinite(g))
                throw NumericError("adamw: non-finite gradient in parameter " + p.name);
            const double mi = h.beta1 * static_cast<double>(m[i]) + (1.0 - h.beta1) * g;
            const double vi = h.beta2 * static_cast<double>(v[i]) + (1.0 - h.beta2) * g * g;
            m[i] = static_cast<T>(mi);
            v[i] = static_cast<T>(vi);
            const double mhat = mi / bc1;
            const double vhat = vi / bc2;
            const double theta = static_cast<double>(p.value[i]);
            p.value[i] =
                static_cast<T>(theta - h.lr * (mhat / (std::sqrt(vhat) + h.eps) + wd * theta));
        }
    }
}

template <class T>
void AdamW<T>::restore(const OptimizerSnapshot<T>& snap) {
    if (snap.m.size() != state_.m.size())
        throw DataError("adamw: snapshot does not match network layout");
    state_ = snap;
}

template class AdamW<float>;
template class AdamW<double>;

}  // namespace ilseg
