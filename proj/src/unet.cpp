#include "ilseg/unet.hpp"

#include <cmath>
#include <cstring>

#include "json.hpp"

namespace ilseg {

void UNetConfig::validate() const {
    if (in_channels != 1 && in_channels != 2)
        throw ConfigError("unet: in_channels must be 1 or 2");
    if (out_channels != 1 && out_channels != 2)
        throw ConfigError("unet: out_channels must be 1 or 2");
    if (encoder_channels.size() != 4)
        throw ConfigError("unet: encoder_channels must have length 4");
    for (size_t i = 1; i < encoder_channels.size(); ++i)
        if (encoder_channels[i] <= encoder_channels[i - 1])
            throw ConfigError("unet: encoder_channels must be strictly increasing");
    if (groupnorm_groups < 1) throw ConfigError("unet: groupnorm_groups must be positive");
    for (int64_t c : encoder_channels)
        if (c % groupnorm_groups != 0)
            throw ConfigError("unet: groupnorm_groups must divide every encoder channel count");
}

template <class T>
Param<T>& Network<T>::find(const std::string& name) {
    for (auto& p : params)
        if (p.name == name) return p;
    throw DataError("unknown parameter: " + name);
}

template <class T>
const Param<T>& Network<T>::find(const std::string& name) const {
    for (const auto& p : params)
        if (p.name == name) return p;
    throw DataError("unknown parameter: " + name);
}

template <class T>
void Network<T>::zero_grad() {
    for (auto& p : params) p.grad.assign(p.value.size(), T(0));
}

template <class T>
int64_t Network<T>::parameter_count() const {
    int64_t n = 0;
    for (const auto& p : params) n += static_cast<int64_t>(p.value.size());
    return n;
}

template <class T>
void Network<T>::check_finite() const {
    for (const auto& p : params)
        for (T v : p.value)
            if (!std::isfinite(static_cast<double>(v)))
                throw NumericError("non-finite parameter: " + p.name);
}

namespace {

// Block channel plan in construction (= stable parameter) order.
struct BlockPlan {
    std::string prefix;
    int64_t in_ch;
    int64_t out_ch;
};

std::vector<BlockPlan> block_plans(const UNetConfig& cfg) {
    const auto& c = cfg.encoder_channels;
    std::vector<BlockPlan> plan;
    int64_t prev = cfg.in_channels;
    for (int l = 0; l < 4; ++l) {
        std::string p = "enc" + std::to_string(l + 1);
        plan.push_back({p + ".block1", prev, c[static_cast<size_t>(l)]});
        plan.push_back({p + ".block2", c[static_cast<size_t>(l)], c[static_cast<size_t>(l)]});
        prev = c[static_cast<size_t>(l)];
    }
    for (int l = 2; l >= 0; --l) {
        std::string p = "dec" + std::to_string(l + 1);
        int64_t skip = c[static_cast<size_t>(l)];
        int64_t up = c[static_cast<size_t>(l + 1)];
        plan.push_back({p + ".block1", skip + up, skip});
        plan.push_back({p + ".block2", skip, skip});
    }
    return plan;
}

template <class T>
void add_param(Network<T>& net, std::string name, std::vector<int64_t> shape, bool decay) {
    Param<T> p;
    p.name = std::move(name);
    p.shape = std::move(shape);
    int64_t n = 1;
    for (int64_t d : p.shape) n *= d;
    p.value.assign(static_cast<size_t>(n), T(0));
    p.grad.assign(static_cast<size_t>(n), T(0));
    p.decay = decay;
    net.params.push_back(std::move(p));
}

template <class T>
Tensor5<T> as_weight_tensor(const Param<T>& p) {
    Tensor5<T> w;
    w.dims = {p.shape[0], p.shape[1], p.shape[2], p.shape[3], p.shape[4]};
    w.data = p.value;
    return w;
}

}  // namespace

template <class T>
Network<T> init_parameters(const UNetConfig& config, uint64_t seed) {
    config.validate();
    Network<T> net;
    net.config = config;

    for (const auto& b : block_plans(config)) {
        add_param(net, b.prefix + ".conv.weight", {b.out_ch, b.in_ch, 3, 3, 3}, true);
        add_param(net, b.prefix + ".conv.bias", {b.out_ch}, false);
        add_param(net, b.prefix + ".gn.scale", {b.out_ch}, false);
        add_param(net, b.prefix + ".gn.shift", {b.out_ch}, false);
    }
    add_param(net, "final.conv.weight",
              {config.out_channels, config.encoder_channels[0], 1, 1, 1}, true);
    add_param(net, "final.conv.bias", {config.out_channels}, false);

    Rng rng(seed);
    for (auto& p : net.params) {
        if (p.name.ends_with("conv.weight")) {
            int64_t fan_in = 1;
            for (size_t d = 1; d < p.shape.size(); ++d) fan_in *= p.shape[d];
            double stddev = std::sqrt(2.0 / static_cast<double>(fan_in));
            for (auto& v : p.value) v = static_cast<T>(rng.normal(0.0, stddev));
        } else if (p.name.ends_with("gn.scale")) {
            for (auto& v : p.value) v = T(1);
        }
        // biases and gn.shift stay zero
    }
    return net;
}

// --- forward / backward -----------------------------------------------------

template <class T>
struct BlockTrace {
    Tensor5<T> x;
    Tensor5<T> conv_out;
    GroupNormCache<T> gn;
    Tensor5<T> act;
};

template <class T>
struct UNetTrace {
    std::vector<BlockTrace<T>> blocks;  // enc1.b1..enc4.b2, dec3.b1..dec1.b2
    std::vector<std::vector<int64_t>> pool_argmax;
    std::vector<std::array<int64_t, 5>> pool_in_dims;
    Tensor5<T> final_in;
    Tensor5<T> probs;
};

template <class T>
UNetTrace<T>* new_unet_trace() {
    return new UNetTrace<T>();
}

template <class T>
void free_unet_trace(UNetTrace<T>* t) {
    delete t;
}

namespace {

template <class T>
Tensor5<T> run_block(const Network<T>& net, const std::string& prefix, const Tensor5<T>& x,
                     UNetTrace<T>* trace) {
    const auto& w = net.find(prefix + ".conv.weight");
    const auto& b = net.find(prefix + ".conv.bias");
    const auto& gamma = net.find(prefix + ".gn.scale");
    const auto& beta = net.find(prefix + ".gn.shift");
    Tensor5<T> conv_out = conv3d_forward(x, as_weight_tensor(w), b.value, 1);
    GroupNormCache<T> cache;
    Tensor5<T> normed = groupnorm_forward(conv_out, gamma.value, beta.value,
                                          net.config.groupnorm_groups, trace ? &cache : nullptr);
    Tensor5<T> act = relu_forward(normed);
    if (trace) {
        BlockTrace<T> bt;
        bt.x = x;
        bt.conv_out = std::move(conv_out);
        bt.gn = std::move(cache);
        bt.act = act;
        trace->blocks.push_back(std::move(bt));
    }
    return act;
}

// Returns the gradient w.r.t. the block input and accumulates parameter grads.
template <class T>
Tensor5<T> block_backward(Network<T>& net, const std::string& prefix, const BlockTrace<T>& bt,
                          const Tensor5<T>& g_act) {
    auto& w = net.find(prefix + ".conv.weight");
    auto& b = net.find(prefix + ".conv.bias");
    auto& gamma = net.find(prefix + ".gn.scale");
    auto& beta = net.find(prefix + ".gn.shift");

    Tensor5<T> g = relu_backward(bt.act, g_act);
    GroupNormGrads<T> gn =
        groupnorm_backward(bt.conv_out, gamma.value, net.config.groupnorm_groups, bt.gn, g);
    for (size_t i = 0; i < gamma.grad.size(); ++i) gamma.grad[i] += gn.ggamma[i];
    for (size_t i = 0; i < beta.grad.size(); ++i) beta.grad[i] += gn.gbeta[i];
    Conv3dGrads<T> cg = conv3d_backward(bt.x, as_weight_tensor(w), gn.gx, 1);
    for (size_t i = 0; i < w.grad.size(); ++i) w.grad[i] += cg.gw.data[i];
    for (size_t i = 0; i < b.grad.size(); ++i) b.grad[i] += cg.gb[i];
    return cg.gx;
}

}  // namespace

template <class T>
Tensor5<T> unet_forward(const Network<T>& net, const Tensor5<T>& x, UNetTrace<T>* trace) {
    if (x.dims[1] != net.config.in_channels)
        throw DataError("unet_forward: input channel count mismatch");
    for (int a = 2; a < 5; ++a) {
        if (x.dims[static_cast<size_t>(a)] < 8 || x.dims[static_cast<size_t>(a)] % 8 != 0)
            throw DataError("unet_forward: spatial dims must be positive multiples of 8");
    }
    if (trace) {
        trace->blocks.clear();
        trace->pool_argmax.assign(3, {});
        trace->pool_in_dims.assign(3, {});
    }

    std::vector<Tensor5<T>> enc_acts;  // per-level block2 activations
    Tensor5<T> cur = x;
    for (int l = 0; l < 4; ++l) {
        std::string p = "enc" + std::to_string(l + 1);
        cur = run_block(net, p + ".block1", cur, trace);
        cur = run_block(net, p + ".block2", cur, trace);
        if (l < 3) {
            enc_acts.push_back(cur);
            if (trace) trace->pool_in_dims[static_cast<size_t>(l)] = cur.dims;
            cur = maxpool2_forward(cur,
                                   trace ? &trace->pool_argmax[static_cast<size_t>(l)] : nullptr);
        }
    }
    for (int l = 2; l >= 0; --l) {
        std::string p = "dec" + std::to_string(l + 1);
        Tensor5<T> up = upsample2_forward(cur);
        Tensor5<T> cat = concat_forward(enc_acts[static_cast<size_t>(l)], up);
        cur = run_block(net, p + ".block1", cat, trace);
        cur = run_block(net, p + ".block2", cur, trace);
    }

    const auto& fw = net.find("final.conv.weight");
    const auto& fb = net.find("final.conv.bias");
    if (trace) trace->final_in = cur;
    Tensor5<T> logits = conv3d_forward(cur, as_weight_tensor(fw), fb.value, 0);
    Tensor5<T> probs = sigmoid_forward(logits);
    if (trace) trace->probs = probs;
    return probs;
}

template <class T>
Tensor5<T> unet_backward(Network<T>& net, const UNetTrace<T>& trace,
                         const Tensor5<T>& grad_probs) {
    if (trace.blocks.size() != 14)
        throw DataError("unet_backward: trace does not match a completed forward pass");
    const auto& c = net.config.encoder_channels;

    Tensor5<T> g = sigmoid_backward(trace.probs, grad_probs);

    auto& fw = net.find("final.conv.weight");
    auto& fb = net.find("final.conv.bias");
    Conv3dGrads<T> fg = conv3d_backward(trace.final_in, as_weight_tensor(fw), g, 0);
    for (size_t i = 0; i < fw.grad.size(); ++i) fw.grad[i] += fg.gw.data[i];
    for (size_t i = 0; i < fb.grad.size(); ++i) fb.grad[i] += fg.gb[i];
    g = std::move(fg.gx);

    // Decoder blocks sit at trace indices 8..13 as dec3.b1, dec3.b2, dec2.b1,
    // dec2.b2, dec1.b1, dec1.b2; walk them in reverse.
    std::vector<Tensor5<T>> skip_grads(3);
    for (int l = 0; l < 3; ++l) {  // dec1, dec2, dec3
        std::string p = "dec" + std::to_string(l + 1);
        size_t base = 8 + static_cast<size_t>(2 - l) * 2;
        g = block_backward(net, p + ".block2", trace.blocks[base + 1], g);
        g = block_backward(net, p + ".block1", trace.blocks[base], g);
        Tensor5<T> g_skip, g_up;
        concat_backward(g, c[static_cast<size_t>(l)], &g_skip, &g_up);
        skip_grads[static_cast<size_t>(l)] = std::move(g_skip);
        g = upsample2_backward(g_up);
    }

    // Encoder blocks at indices 0..7; bottom level first on the way back.
    for (int l = 3; l >= 0; --l) {
        std::string p = "enc" + std::to_string(l + 1);
        size_t base = static_cast<size_t>(l) * 2;
        if (l < 3) {
            g = maxpool2_backward(trace.pool_argmax[static_cast<size_t>(l)],
                                  trace.pool_in_dims[static_cast<size_t>(l)], g);
            const auto& sk = skip_grads[static_cast<size_t>(l)];
            for (size_t i = 0; i < g.data.size(); ++i) g.data[i] += sk.data[i];
        }
        g = block_backward(net, p + ".block2", trace.blocks[base + 1], g);
        g = block_backward(net, p + ".block1", trace.blocks[base], g);
    }
    return g;
}

// --- checkpoints ------------------------------------------------------------

namespace {

using nlohmann::json;

void append_f32_payload(std::vector<unsigned char>& out, const float* data, size_t n) {
    const auto* p = reinterpret_cast<const unsigned char*>(data);
    out.insert(out.end(), p, p + n * 4);
}

template <class T>
std::vector<float> to_f32(const std::vector<T>& v) {
    return std::vector<float>(v.begin(), v.end());
}

}  // namespace

template <class T>
void save_checkpoint(const Network<T>& net, const OptimizerSnapshot<T>* opt,
                     const std::string& path) {
    json manifest;
    manifest["format"] = "snet";
    manifest["config"] = {{"in_channels", net.config.in_channels},
                          {"out_channels", net.config.out_channels},
                          {"encoder_channels", net.config.encoder_channels},
                          {"groupnorm_groups", net.config.groupnorm_groups}};
    std::vector<unsigned char> payload;
    json params = json::array();
    for (const auto& p : net.params) {
        json e;
        e["name"] = p.name;
        e["shape"] = p.shape;
        e["offset"] = payload.size();
        e["decay"] = p.decay;
        params.push_back(e);
        auto f = to_f32(p.value);
        append_f32_payload(payload, f.data(), f.size());
    }
    manifest["params"] = params;
    if (opt) {
        json o;
        o["lr"] = opt->hyper.lr;
        o["weight_decay"] = opt->hyper.weight_decay;
        o["beta1"] = opt->hyper.beta1;
        o["beta2"] = opt->hyper.beta2;
        o["eps"] = opt->hyper.eps;
        o["step_count"] = opt->step_count;
        json moments = json::array();
        for (size_t i = 0; i < net.params.size(); ++i) {
            json e;
            e["name"] = net.params[i].name;
            e["m_offset"] = payload.size();
            auto fm = to_f32(opt->m[i]);
            append_f32_payload(payload, fm.data(), fm.size());
            e["v_offset"] = payload.size();
            auto fv = to_f32(opt->v[i]);
            append_f32_payload(payload, fv.data(), fv.size());
            moments.push_back(e);
        }
        o["moments"] = moments;
        manifest["optimizer"] = o;
    }

    std::string htext = manifest.dump();
    std::vector<unsigned char> bytes;
    bytes.reserve(8 + htext.size() + payload.size());
    bytes.insert(bytes.end(), {'S', 'N', 'E', 'T'});
    uint32_t hlen = static_cast<uint32_t>(htext.size());
    for (int i = 0; i < 4; ++i) bytes.push_back(static_cast<unsigned char>((hlen >> (8 * i)) & 0xff));
    bytes.insert(bytes.end(), htext.begin(), htext.end());
    bytes.insert(bytes.end(), payload.begin(), payload.end());
    write_file_bytes(path, bytes.data(), bytes.size());
}

template <class T>
Checkpoint<T> load_checkpoint(const std::string& path) {
    auto bytes = read_file_bytes(path);
    if (bytes.size() < 8 || std::memcmp(bytes.data(), "SNET", 4) != 0)
        throw DataError("not an SNET checkpoint (bad magic): " + path);
    uint32_t hlen = 0;
    for (int i = 0; i < 4; ++i) hlen |= static_cast<uint32_t>(bytes[4 + i]) << (8 * i);
    if (bytes.size() < 8 + static_cast<size_t>(hlen))
        throw DataError("truncated SNET header: " + path);
    json manifest;
    try {
        manifest = json::parse(bytes.begin() + 8, bytes.begin() + 8 + hlen);
    } catch (const json::exception& e) {
        throw DataError("invalid SNET manifest in " + path + ": " + e.what());
    }
    const size_t payload_off = 8 + hlen;
    const size_t payload_size = bytes.size() - payload_off;
    auto read_f32 = [&](size_t offset, size_t count, std::vector<T>& out) {
        if (offset + count * 4 > payload_size)
            throw DataError("SNET payload out of range in " + path);
        std::vector<float> tmp(count);
        std::memcpy(tmp.data(), bytes.data() + payload_off + offset, count * 4);
        out.assign(tmp.begin(), tmp.end());
    };

    Checkpoint<T> ck;
    try {
        auto cfg = manifest.at("config");
        ck.net.config.in_channels = cfg.at("in_channels").get<int64_t>();
        ck.net.config.out_channels = cfg.at("out_channels").get<int64_t>();
        ck.net.config.encoder_channels = cfg.at("encoder_channels").get<std::vector<int64_t>>();
        ck.net.config.groupnorm_groups = cfg.at("groupnorm_groups").get<int64_t>();
        ck.net.config.validate();
        for (const auto& e : manifest.at("params")) {
            Param<T> p;
            p.name = e.at("name").get<std::string>();
            p.shape = e.at("shape").get<std::vector<int64_t>>();
            p.decay = e.value("decay", false);
            int64_t n = 1;
            for (int64_t d : p.shape) n *= d;
            read_f32(e.at("offset").get<size_t>(), static_cast<size_t>(n), p.value);
            p.grad.assign(p.value.size(), T(0));
            ck.net.params.push_back(std::move(p));
        }
        if (manifest.contains("optimizer") && !manifest["optimizer"].is_null()) {
            const auto& o = manifest["optimizer"];
            ck.has_optimizer = true;
            ck.optimizer.hyper.lr = o.at("lr").get<double>();
            ck.optimizer.hyper.weight_decay = o.at("weight_decay").get<double>();
            ck.optimizer.hyper.beta1 = o.at("beta1").get<double>();
            ck.optimizer.hyper.beta2 = o.at("beta2").get<double>();
            ck.optimizer.hyper.eps = o.at("eps").get<double>();
            ck.optimizer.step_count = o.at("step_count").get<int64_t>();
            size_t i = 0;
            ck.optimizer.m.resize(ck.net.params.size());
            ck.optimizer.v.resize(ck.net.params.size());
            for (const auto& e : o.at("moments")) {
                if (i >= ck.net.params.size())
                    throw DataError("SNET optimizer moments exceed params in " + path);
                size_t n = ck.net.params[i].value.size();
                read_f32(e.at("m_offset").get<size_t>(), n, ck.optimizer.m[i]);
                read_f32(e.at("v_offset").get<size_t>(), n, ck.optimizer.v[i]);
                ++i;
            }
            if (i != ck.net.params.size())
                throw DataError("SNET optimizer moments missing entries in " + path);
        }
    } catch (const json::exception& e) {
        throw DataError("bad SNET manifest field in " + path + ": " + e.what());
    }
    ck.net.check_finite();
    return ck;
}

#define ILSEG_INSTANTIATE_UNET(T)                                                          \
    template struct Network<T>;                                                            \
    template Network<T> init_parameters<T>(const UNetConfig&, uint64_t);                   \
    template UNetTrace<T>* new_unet_trace<T>();                                            \
    template void free_unet_trace<T>(UNetTrace<T>*);                                       \
    template Tensor5<T> unet_forward<T>(const Network<T>&, const Tensor5<T>&,              \
                                        UNetTrace<T>*);                                    \
    template Tensor5<T> unet_backward<T>(Network<T>&, const UNetTrace<T>&,                 \
                                         const Tensor5<T>&);                               \
    template void save_checkpoint<T>(const Network<T>&, const OptimizerSnapshot<T>*,       \
                                     const std::string&);                                  \
    template Checkpoint<T> load_checkpoint<T>(const std::string&);

ILSEG_INSTANTIATE_UNET(float)
ILSEG_INSTANTIATE_UNET(double)

}  // namespace ilseg
