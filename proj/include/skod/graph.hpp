#ifndef SKOD_GRAPH_HPP
#define SKOD_GRAPH_HPP

#include <iosfwd>
#include <string>
#include <vector>

#include "skod/tensor.hpp"

namespace skod {

// Rooted joint tree. Levels are depths from the single root.
struct JointHierarchy {
    std::vector<int> parent;        // -1 marks the root
    std::vector<int> level;         // derived, root = 0
    std::vector<std::string> names; // optional, may be empty strings

    std::size_t joint_count() const { return parent.size(); }

    // Validates the parent links and fills in levels.
    static JointHierarchy from_parents(std::vector<int> parent,
                                       std::vector<std::string> names = {});

    // Line format: "<joint_index> <parent_index|-1> [name]", 0-based.
    static JointHierarchy parse(std::istream& in);
    static JointHierarchy load(const std::string& path);

    // Built-in 25-joint NTU-style skeleton.
    static JointHierarchy ntu25();
    // Small 9-joint tree used for synthetic desk-scale data.
    static JointHierarchy toy9();
};

// The three graph subsets with their symmetrically normalized forms.
struct GraphTopology {
    std::vector<Tensor> subsets;    // {pc, sl, fc}, binary
    std::vector<Tensor> normalized; // Lambda^{-1/2} A Lambda^{-1/2}

    std::size_t joint_count() const { return subsets.empty() ? 0 : subsets[0].dim(0); }

    static GraphTopology build(const JointHierarchy& h);
};

// A[i][j] = 1 iff i and j are parent/child.
Tensor build_physical(const JointHierarchy& h);

// Identity matrix.
Tensor build_self_loop(std::size_t joint_count);

// A[i][j] = 1 for every pair with |level(i) - level(j)| = 1.
Tensor build_hierarchical_fc(const JointHierarchy& h);

// out[i][j] = A[i][j] / sqrt(d_i * d_j); zero-degree rows stay all-zero.
Tensor normalize_adjacency(const Tensor& adjacency);

} // namespace skod

#endif
