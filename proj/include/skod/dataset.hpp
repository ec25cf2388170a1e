#ifndef SKOD_DATASET_HPP
#define SKOD_DATASET_HPP

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "skod/graph.hpp"
#include "skod/tensor.hpp"

namespace skod {

// One skeleton clip: data is (channels, frames, joints, subjects).
struct SkeletonSequence {
    Tensor data;
    std::uint32_t label = 0;
    std::string source_id;

    std::size_t channels() const { return data.dim(0); }
    std::size_t frames() const { return data.dim(1); }
    std::size_t joints() const { return data.dim(2); }
    std::size_t subjects() const { return data.dim(3); }
};

struct Dataset {
    std::vector<SkeletonSequence> samples;
    nlohmann::json meta = nlohmann::json::object(); // trailer: class names, seed, generator params

    bool empty() const { return samples.empty(); }
    std::size_t size() const { return samples.size(); }
};

// SKDS container: magic, u32 version, u32 N/C/T/V/M, payload of 64-bit
// little-endian floats, N u32 labels, length-prefixed UTF-8 JSON trailer.
void save_dataset(const Dataset& ds, const std::string& path);
Dataset load_dataset(const std::string& path);

struct GeneratorConfig {
    std::size_t classes = 8;
    std::size_t samples_per_class = 100;
    std::size_t channels = 3;
    std::size_t frames = 32;
    std::size_t subjects = 1;
    double sigma = 0.05;
    std::uint64_t seed = 0;
    JointHierarchy hierarchy; // defaults to toy9 when joint_count() == 0
};

// Sinusoidal motion archetypes on the joint hierarchy; children inherit the
// parent trajectory plus a local oscillation. Deterministic per seed; samples
// of one class differ only by Gaussian jitter.
Dataset generate_synthetic(const GeneratorConfig& cfg);

struct SplitSpec {
    std::vector<std::uint32_t> seen_classes;
    std::vector<std::uint32_t> unseen_classes;
    double train_fraction = 0.9; // per seen class; the rest is val = test_seen
    std::uint64_t seed = 0;
};

struct SplitResult {
    Dataset train;
    Dataset val;
    Dataset test_seen; // same samples as val, per the protocol
    Dataset test_mix;  // test_seen plus every unseen-class sample
};

SplitResult split_dataset(const Dataset& ds, const SplitSpec& spec);

// Zeroes the coordinates of floor(p/100 * V) distinct joints across all
// frames and subjects. Label and the other joints are untouched.
SkeletonSequence mask_joints(const SkeletonSequence& seq, double percentage,
                             std::uint64_t seed);

} // namespace skod

#endif
