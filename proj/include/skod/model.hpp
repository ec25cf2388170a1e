#ifndef SKOD_MODEL_HPP
#define SKOD_MODEL_HPP

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "skod/ash.hpp"
#include "skod/autodiff.hpp"
#include "skod/dataset.hpp"
#include "skod/graph.hpp"

namespace skod {

struct BlockConfig {
    std::size_t in_channels = 0;
    std::size_t out_channels = 0;
    std::size_t temporal_kernel = 5; // odd
    std::size_t temporal_stride = 1;

    void validate() const;
};

struct ModelConfig {
    std::size_t input_channels = 3;
    std::vector<BlockConfig> blocks;
    AshConfig ash;            // strategy Off disables the branch
    bool fusion = true;       // SE gate + MLP between concat and classifier
    std::size_t mlp_hidden = 64;
    std::size_t fuse_dim = 64;
    std::size_t seen_classes = 0; // K
    std::size_t extra_dims = 1;   // reserved unseen slots k
    double dropout_rate = 0.1;

    // 4 blocks, channels 16->32->32->64, temporal kernel 5.
    static ModelConfig desk_default(std::size_t input_channels,
                                    std::size_t seen_classes);

    std::size_t feature_dim() const { return blocks.back().out_channels; }
    std::size_t concat_dim() const {
        return ash.strategy == AshStrategy::Off ? feature_dim() : 2 * feature_dim();
    }
    std::size_t classifier_in() const { return fusion ? fuse_dim : concat_dim(); }
    std::size_t logit_dim() const { return seen_classes + extra_dims; }

    void validate() const;
    nlohmann::json to_json() const;
    static ModelConfig from_json(const nlohmann::json& j);
};

// Named parameter storage shared by the model, the optimizer and the
// checkpoint writer. Order is fixed by construction.
struct ParamSet {
    std::vector<std::string> names;
    std::vector<Tensor> values;

    Tensor& add(std::string name, Tensor value) {
        names.push_back(std::move(name));
        values.push_back(std::move(value));
        return values.back();
    }
    std::size_t size() const { return values.size(); }
};

class Model {
public:
    Model(ModelConfig config, GraphTopology topology);

    // Random initialization, uniform in +-sqrt(6/(fan_in+fan_out)).
    static Model init(ModelConfig config, GraphTopology topology,
                      std::uint64_t seed);

    const ModelConfig& config() const { return config_; }
    const GraphTopology& topology() const { return topology_; }
    ParamSet& params() { return params_; }
    const ParamSet& params() const { return params_; }

    // Pushes every parameter onto the tape as a leaf, in ParamSet order.
    std::vector<Var> push_params(Tape& tape) const;

    struct ForwardResult {
        Var logits;
        Var features; // pooled backbone output F
    };

    // Records the full forward pass for one sample on the tape.
    // `dropout_rng` may be null when training == false.
    ForwardResult forward(Tape& tape, const std::vector<Var>& pvars,
                          const SkeletonSequence& sample, bool training,
                          Rng* dropout_rng) const;

    // Evaluation-mode logits without keeping the tape.
    std::vector<double> eval_logits(const SkeletonSequence& sample) const;

    // Pooled backbone feature vector F (evaluation mode).
    Tensor extract_features(const SkeletonSequence& sample) const;

private:
    struct BlockParams {
        std::vector<std::size_t> theta; // one per graph subset
        std::size_t bias;
        std::size_t t_weight;
        std::size_t t_bias;
    };
    struct HeadParams {
        std::size_t se_w = 0, se_b = 0;
        std::size_t mlp_w1 = 0, mlp_b1 = 0, mlp_w2 = 0, mlp_b2 = 0;
        std::size_t cls_w = 0, cls_b = 0;
    };

    Var backbone_features(Tape& tape, const std::vector<Var>& pvars,
                          const SkeletonSequence& sample) const;

    ModelConfig config_;
    GraphTopology topology_;
    ParamSet params_;
    std::vector<BlockParams> block_params_;
    HeadParams head_params_;
};

} // namespace skod

#endif
