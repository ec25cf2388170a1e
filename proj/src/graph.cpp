#include "skod/graph.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "skod/errors.hpp"

namespace skod {

JointHierarchy JointHierarchy::from_parents(std::vector<int> parent,
                                            std::vector<std::string> names) {
    std::size_t v = parent.size();
    if (v == 0) throw ValueError("hierarchy: no joints");
    int root = -1;
    for (std::size_t i = 0; i < v; ++i) {
        if (parent[i] < 0) {
            if (root >= 0) throw ValueError("hierarchy: more than one root");
            root = int(i);
        } else if (std::size_t(parent[i]) >= v) {
            throw ValueError("hierarchy: parent index out of range");
        } else if (std::size_t(parent[i]) == i) {
            throw ValueError("hierarchy: joint is its own parent");
        }
    }
    if (root < 0) throw ValueError("hierarchy: no root");

    JointHierarchy h;
    h.parent = std::move(parent);
    h.names = std::move(names);
    h.names.resize(v);
    h.level.assign(v, -1);
    for (std::size_t i = 0; i < v; ++i) {
        // walk to the root, bounded to detect cycles
        int depth = 0;
        int cur = int(i);
        while (h.parent[cur] >= 0) {
            cur = h.parent[cur];
            if (++depth > int(v)) throw ValueError("hierarchy: cycle in parent links");
        }
        // second pass fills the actual level
        depth = 0;
        cur = int(i);
        while (h.parent[cur] >= 0) {
            cur = h.parent[cur];
            ++depth;
        }
        h.level[i] = depth;
    }
    return h;
}

JointHierarchy JointHierarchy::parse(std::istream& in) {
    std::map<int, std::pair<int, std::string>> rows;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::istringstream ls(line);
        int idx;
        if (!(ls >> idx)) {
            // blank or comment line
            std::string rest;
            ls.clear();
            ls >> rest;
            if (rest.empty() || rest[0] == '#') continue;
            throw ParseError("hierarchy: bad line " + std::to_string(lineno));
        }
        int par;
        if (!(ls >> par))
            throw ParseError("hierarchy: missing parent on line " + std::to_string(lineno));
        std::string name;
        ls >> name;
        if (idx < 0) throw ParseError("hierarchy: negative joint index");
        if (rows.count(idx))
            throw ParseError("hierarchy: duplicate joint index " + std::to_string(idx));
        rows[idx] = {par, name};
    }
    if (rows.empty()) throw ParseError("hierarchy: empty file");
    std::size_t v = rows.size();
    std::vector<int> parent(v);
    std::vector<std::string> names(v);
    for (auto& [idx, pn] : rows) {
        if (std::size_t(idx) >= v)
            throw ParseError("hierarchy: joint indices must be 0.." + std::to_string(v - 1));
        parent[idx] = pn.first;
        names[idx] = pn.second;
    }
    return from_parents(std::move(parent), std::move(names));
}

JointHierarchy JointHierarchy::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("hierarchy: cannot open " + path);
    return parse(in);
}

JointHierarchy JointHierarchy::ntu25() {
    // 0-based parents; joint 20 (spine shoulder) is the root.
    std::vector<int> parent = {
        1,  20, 20, 2,  20, 4,  5,  6,  20, 8,  9,  10, 0,
        12, 13, 14, 0,  16, 17, 18, -1, 22, 7,  24, 11};
    return from_parents(std::move(parent));
}

JointHierarchy JointHierarchy::toy9() {
    // root with four limbs of two joints each
    std::vector<int> parent = {-1, 0, 0, 0, 0, 1, 2, 3, 4};
    return from_parents(std::move(parent));
}

Tensor build_physical(const JointHierarchy& h) {
    std::size_t v = h.joint_count();
    Tensor a({v, v});
    for (std::size_t i = 0; i < v; ++i) {
        int p = h.parent[i];
        if (p >= 0) {
            a.at(i, std::size_t(p)) = 1.0;
            a.at(std::size_t(p), i) = 1.0;
        }
    }
    return a;
}

Tensor build_self_loop(std::size_t joint_count) {
    if (joint_count == 0) throw ValueError("build_self_loop: joint count must be >= 1");
    Tensor a({joint_count, joint_count});
    for (std::size_t i = 0; i < joint_count; ++i) a.at(i, i) = 1.0;
    return a;
}

Tensor build_hierarchical_fc(const JointHierarchy& h) {
    std::size_t v = h.joint_count();
    Tensor a({v, v});
    for (std::size_t i = 0; i < v; ++i)
        for (std::size_t j = 0; j < v; ++j)
            if (std::abs(h.level[i] - h.level[j]) == 1) a.at(i, j) = 1.0;
    return a;
}

Tensor normalize_adjacency(const Tensor& adjacency) {
    if (adjacency.rank() != 2 || adjacency.dim(0) != adjacency.dim(1))
        throw ValueError("normalize: square matrix expected");
    std::size_t v = adjacency.dim(0);
    for (std::size_t i = 0; i < v; ++i)
        for (std::size_t j = i + 1; j < v; ++j)
            if (adjacency.at(i, j) != adjacency.at(j, i))
                throw ValueError("normalize: matrix must be symmetric");
    std::vector<double> degree(v, 0.0);
    for (std::size_t i = 0; i < v; ++i)
        for (std::size_t j = 0; j < v; ++j) degree[i] += adjacency.at(i, j);
    Tensor out({v, v});
    for (std::size_t i = 0; i < v; ++i) {
        if (degree[i] == 0.0) continue; // masked or disconnected joint
        for (std::size_t j = 0; j < v; ++j) {
            if (adjacency.at(i, j) == 0.0 || degree[j] == 0.0) continue;
            out.at(i, j) = adjacency.at(i, j) / std::sqrt(degree[i] * degree[j]);
        }
    }
    return out;
}

GraphTopology GraphTopology::build(const JointHierarchy& h) {
    GraphTopology topo;
    topo.subsets.push_back(build_physical(h));
    topo.subsets.push_back(build_self_loop(h.joint_count()));
    topo.subsets.push_back(build_hierarchical_fc(h));
    for (const Tensor& a : topo.subsets)
        topo.normalized.push_back(normalize_adjacency(a));
    return topo;
}

} // namespace skod
