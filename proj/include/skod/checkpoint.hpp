#ifndef SKOD_CHECKPOINT_HPP
#define SKOD_CHECKPOINT_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "skod/energy.hpp"
#include "skod/model.hpp"

namespace skod {

// A saved model is self-contained for inference: architecture, joint
// hierarchy, the seen-class label mapping and the calibrated detector all
// ride in the checkpoint header.
struct Checkpoint {
    ModelConfig model_config;
    JointHierarchy hierarchy;
    std::vector<std::uint32_t> class_labels; // original label of each model class
    DetectorState detector;

    Model build_model() const; // topology rebuilt from the hierarchy
};

// SKOD container: magic, u32 version, length-prefixed UTF-8 JSON header,
// then named parameter blocks of 64-bit little-endian floats.
void save_checkpoint(const Model& model, const DetectorState& detector,
                     const std::vector<std::uint32_t>& class_labels,
                     const JointHierarchy& hierarchy, const std::string& path);

struct LoadedCheckpoint {
    Checkpoint info;
    Model model;
};

LoadedCheckpoint load_checkpoint(const std::string& path);

} // namespace skod

#endif
