#include "skod/model.hpp"

#include <cmath>

#include "skod/errors.hpp"

namespace skod {

void BlockConfig::validate() const {
    if (in_channels == 0 || out_channels == 0)
        throw ValueError("BlockConfig: channel counts must be positive");
    if (temporal_kernel == 0 || temporal_kernel % 2 == 0)
        throw ValueError("BlockConfig: temporal kernel must be odd");
    if (temporal_stride == 0)
        throw ValueError("BlockConfig: temporal stride must be positive");
}

ModelConfig ModelConfig::desk_default(std::size_t input_channels,
                                      std::size_t seen_classes) {
    ModelConfig cfg;
    cfg.input_channels = input_channels;
    cfg.blocks = {
        {input_channels, 16, 5, 1},
        {16, 32, 5, 2},
        {32, 32, 5, 2},
        {32, 64, 5, 2},
    };
    cfg.seen_classes = seen_classes;
    return cfg;
}

void ModelConfig::validate() const {
    if (blocks.empty()) throw ValueError("ModelConfig: at least one block required");
    std::size_t prev = input_channels;
    for (const BlockConfig& b : blocks) {
        b.validate();
        if (b.in_channels != prev)
            throw ValueError("ModelConfig: block channel chain is broken");
        prev = b.out_channels;
    }
    ash.validate();
    if (seen_classes == 0) throw ValueError("ModelConfig: seen class count required");
    if (extra_dims == 0) throw ValueError("ModelConfig: at least one unseen slot required");
    if (dropout_rate < 0.0 || dropout_rate >= 1.0)
        throw ValueError("ModelConfig: dropout rate must lie in [0, 1)");
    if (fusion && (mlp_hidden == 0 || fuse_dim == 0))
        throw ValueError("ModelConfig: fusion head dimensions must be positive");
}

nlohmann::json ModelConfig::to_json() const {
    nlohmann::json blocks_json = nlohmann::json::array();
    for (const BlockConfig& b : blocks)
        blocks_json.push_back({{"in", b.in_channels},
                               {"out", b.out_channels},
                               {"kernel", b.temporal_kernel},
                               {"stride", b.temporal_stride}});
    return {
        {"input_channels", input_channels},
        {"blocks", blocks_json},
        {"ash", to_string(ash.strategy)},
        {"prune_pct", ash.prune_pct},
        {"fusion", fusion},
        {"mlp_hidden", mlp_hidden},
        {"fuse_dim", fuse_dim},
        {"seen_classes", seen_classes},
        {"extra_dims", extra_dims},
        {"dropout_rate", dropout_rate},
    };
}

ModelConfig ModelConfig::from_json(const nlohmann::json& j) {
    ModelConfig cfg;
    cfg.input_channels = j.at("input_channels").get<std::size_t>();
    for (const auto& b : j.at("blocks"))
        cfg.blocks.push_back({b.at("in").get<std::size_t>(),
                              b.at("out").get<std::size_t>(),
                              b.at("kernel").get<std::size_t>(),
                              b.at("stride").get<std::size_t>()});
    cfg.ash.strategy = ash_strategy_from_string(j.at("ash").get<std::string>());
    cfg.ash.prune_pct = j.at("prune_pct").get<double>();
    cfg.fusion = j.at("fusion").get<bool>();
    cfg.mlp_hidden = j.at("mlp_hidden").get<std::size_t>();
    cfg.fuse_dim = j.at("fuse_dim").get<std::size_t>();
    cfg.seen_classes = j.at("seen_classes").get<std::size_t>();
    cfg.extra_dims = j.at("extra_dims").get<std::size_t>();
    cfg.dropout_rate = j.at("dropout_rate").get<double>();
    cfg.validate();
    return cfg;
}

Model::Model(ModelConfig config, GraphTopology topology)
    : config_(std::move(config)), topology_(std::move(topology)) {
    config_.validate();
    std::size_t n_sub = topology_.normalized.size();
    for (std::size_t b = 0; b < config_.blocks.size(); ++b) {
        const BlockConfig& bc = config_.blocks[b];
        BlockParams bp;
        std::string prefix = "block" + std::to_string(b) + ".";
        static const char* subset_names[] = {"pc", "sl", "fc"};
        for (std::size_t g = 0; g < n_sub; ++g) {
            std::string tag = g < 3 ? subset_names[g] : std::to_string(g);
            params_.add(prefix + "theta_" + tag,
                        Tensor({bc.in_channels, bc.out_channels}));
            bp.theta.push_back(params_.size() - 1);
        }
        params_.add(prefix + "bias", Tensor({bc.out_channels}));
        bp.bias = params_.size() - 1;
        params_.add(prefix + "t_weight", Tensor({bc.out_channels, bc.temporal_kernel}));
        bp.t_weight = params_.size() - 1;
        params_.add(prefix + "t_bias", Tensor({bc.out_channels}));
        bp.t_bias = params_.size() - 1;
        block_params_.push_back(std::move(bp));
    }
    std::size_t width = config_.concat_dim();
    if (config_.fusion) {
        params_.add("head.se_w", Tensor({width, width}));
        head_params_.se_w = params_.size() - 1;
        params_.add("head.se_b", Tensor({width}));
        head_params_.se_b = params_.size() - 1;
        params_.add("head.mlp_w1", Tensor({config_.mlp_hidden, width}));
        head_params_.mlp_w1 = params_.size() - 1;
        params_.add("head.mlp_b1", Tensor({config_.mlp_hidden}));
        head_params_.mlp_b1 = params_.size() - 1;
        params_.add("head.mlp_w2", Tensor({config_.fuse_dim, config_.mlp_hidden}));
        head_params_.mlp_w2 = params_.size() - 1;
        params_.add("head.mlp_b2", Tensor({config_.fuse_dim}));
        head_params_.mlp_b2 = params_.size() - 1;
    }
    params_.add("head.cls_w", Tensor({config_.logit_dim(), config_.classifier_in()}));
    head_params_.cls_w = params_.size() - 1;
    params_.add("head.cls_b", Tensor({config_.logit_dim()}));
    head_params_.cls_b = params_.size() - 1;
}

Model Model::init(ModelConfig config, GraphTopology topology, std::uint64_t seed) {
    Model m(std::move(config), std::move(topology));
    Rng rng(mix_seed(seed, 42));
    for (std::size_t i = 0; i < m.params_.size(); ++i) {
        Tensor& p = m.params_.values[i];
        const std::string& name = m.params_.names[i];
        bool is_bias = name.ends_with("bias") || name.ends_with("_b") ||
                       name.ends_with("b1") || name.ends_with("b2");
        if (is_bias) {
            // the SE gate starts as the identity
            double v = (name == "head.se_b") ? 1.0 : 0.0;
            p.fill(v);
            continue;
        }
        std::size_t fan_in, fan_out;
        if (name.find("t_weight") != std::string::npos) {
            fan_in = p.dim(1); // depthwise kernel
            fan_out = 1;
        } else if (name.find("theta") != std::string::npos) {
            fan_in = p.dim(0);
            fan_out = p.dim(1);
        } else {
            fan_out = p.dim(0);
            fan_in = p.dim(1);
        }
        double bound = std::sqrt(6.0 / double(fan_in + fan_out));
        for (std::size_t k = 0; k < p.size(); ++k)
            p[k] = rng.uniform(-bound, bound);
    }
    return m;
}

std::vector<Var> Model::push_params(Tape& tape) const {
    std::vector<Var> vars;
    vars.reserve(params_.size());
    for (std::size_t i = 0; i < params_.size(); ++i)
        vars.push_back(tape.leaf(params_.values[i], params_.names[i]));
    return vars;
}

Var Model::backbone_features(Tape& tape, const std::vector<Var>& pvars,
                             const SkeletonSequence& sample) const {
    if (sample.joints() != topology_.joint_count())
        throw ValueError("model: sample joint count " + std::to_string(sample.joints()) +
                         " does not match topology " +
                         std::to_string(topology_.joint_count()));
    if (sample.channels() != config_.input_channels)
        throw ValueError("model: sample channel count mismatch");
    if (!sample.data.all_finite())
        throw ValueError("model: non-finite input");

    std::size_t chans = sample.channels(), frames = sample.frames(),
                joints = sample.joints(), subs = sample.subjects();

    std::vector<Var> pooled;
    for (std::size_t sub = 0; sub < subs; ++sub) {
        Tensor x({chans, frames, joints});
        for (std::size_t c = 0; c < chans; ++c)
            for (std::size_t t = 0; t < frames; ++t)
                for (std::size_t j = 0; j < joints; ++j)
                    x.at(c, t, j) = sample.data.at(c, t, j, sub);
        Var h = tape.leaf(std::move(x), "input");
        for (std::size_t b = 0; b < config_.blocks.size(); ++b) {
            const BlockParams& bp = block_params_[b];
            std::vector<Var> thetas;
            for (std::size_t g : bp.theta) thetas.push_back(pvars[g]);
            h = graph_conv(h, topology_.normalized, thetas, pvars[bp.bias]);
            h = relu(h);
            h = temporal_conv(h, pvars[bp.t_weight], pvars[bp.t_bias],
                              config_.blocks[b].temporal_stride);
            h = relu(h);
        }
        pooled.push_back(global_pool(h));
    }
    Var f = pooled[0];
    for (std::size_t i = 1; i < pooled.size(); ++i) f = add(f, pooled[i]);
    if (pooled.size() > 1) f = scale(f, 1.0 / double(pooled.size()));
    return f;
}

Model::ForwardResult Model::forward(Tape& tape, const std::vector<Var>& pvars,
                                    const SkeletonSequence& sample, bool training,
                                    Rng* dropout_rng) const {
    Var f = backbone_features(tape, pvars, sample);

    Var fused = f;
    if (config_.ash.strategy != AshStrategy::Off) {
        Var shaped = ash_shape(f, config_.ash);
        fused = concat(f, shaped);
    }
    if (config_.fusion) {
        Var gate = relu(linear(pvars[head_params_.se_w], fused, pvars[head_params_.se_b]));
        Var gated = mul(fused, gate);
        Var hidden =
            relu(linear(pvars[head_params_.mlp_w1], gated, pvars[head_params_.mlp_b1]));
        fused = linear(pvars[head_params_.mlp_w2], hidden, pvars[head_params_.mlp_b2]);
    }
    if (training && config_.dropout_rate > 0.0) {
        if (dropout_rng == nullptr)
            throw ContractError("model: training forward needs a dropout stream");
        fused = dropout(fused, config_.dropout_rate, *dropout_rng, true);
    }
    Var logits = linear(pvars[head_params_.cls_w], fused, pvars[head_params_.cls_b]);
    return {logits, f};
}

std::vector<double> Model::eval_logits(const SkeletonSequence& sample) const {
    Tape tape;
    std::vector<Var> pvars = push_params(tape);
    ForwardResult r = forward(tape, pvars, sample, false, nullptr);
    return r.logits.value().values();
}

Tensor Model::extract_features(const SkeletonSequence& sample) const {
    Tape tape;
    std::vector<Var> pvars = push_params(tape);
    Var f = backbone_features(tape, pvars, sample);
    return f.value();
}

} // namespace skod
