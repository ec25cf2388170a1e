#include "skod/dataset.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>

#include "skod/errors.hpp"
#include "skod/rng.hpp"

namespace skod {

namespace {

constexpr std::uint32_t kMagic = 0x53444B53; // "SKDS" little-endian
constexpr std::uint32_t kVersion = 1;

void write_u32(std::ostream& out, std::uint32_t v) {
    unsigned char b[4] = {(unsigned char)(v & 0xFF), (unsigned char)((v >> 8) & 0xFF),
                          (unsigned char)((v >> 16) & 0xFF),
                          (unsigned char)((v >> 24) & 0xFF)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t read_u32(std::istream& in, const char* what) {
    unsigned char b[4];
    if (!in.read(reinterpret_cast<char*>(b), 4))
        throw ParseError(std::string("dataset: truncated while reading ") + what);
    return std::uint32_t(b[0]) | (std::uint32_t(b[1]) << 8) |
           (std::uint32_t(b[2]) << 16) | (std::uint32_t(b[3]) << 24);
}

void write_doubles(std::ostream& out, const double* p, std::size_t n) {
    static_assert(std::endian::native == std::endian::little,
                  "big-endian hosts need byte swapping here");
    out.write(reinterpret_cast<const char*>(p), std::streamsize(n * 8));
}

void read_doubles(std::istream& in, double* p, std::size_t n) {
    if (!in.read(reinterpret_cast<char*>(p), std::streamsize(n * 8))) {
        std::size_t got = std::size_t(in.gcount());
        throw ParseError("dataset: truncated payload, missing " +
                         std::to_string(n * 8 - got) + " bytes");
    }
}

} // namespace

void save_dataset(const Dataset& ds, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ParseError("dataset: cannot open " + path + " for writing");
    std::size_t n = ds.samples.size();
    std::size_t c = 0, t = 0, v = 0, m = 0;
    if (n > 0) {
        const Tensor& d0 = ds.samples[0].data;
        if (d0.rank() != 4) throw ValueError("dataset: samples must be rank-4");
        c = d0.dim(0);
        t = d0.dim(1);
        v = d0.dim(2);
        m = d0.dim(3);
        for (const SkeletonSequence& s : ds.samples)
            if (s.data.shape() != d0.shape())
                throw ValueError("dataset: all samples must share one shape");
    }
    write_u32(out, kMagic);
    write_u32(out, kVersion);
    write_u32(out, std::uint32_t(n));
    write_u32(out, std::uint32_t(c));
    write_u32(out, std::uint32_t(t));
    write_u32(out, std::uint32_t(v));
    write_u32(out, std::uint32_t(m));
    for (const SkeletonSequence& s : ds.samples)
        write_doubles(out, s.data.data(), s.data.size());
    for (const SkeletonSequence& s : ds.samples) write_u32(out, s.label);

    nlohmann::json trailer = ds.meta;
    nlohmann::json ids = nlohmann::json::array();
    for (const SkeletonSequence& s : ds.samples) ids.push_back(s.source_id);
    trailer["source_ids"] = std::move(ids);
    std::string text = trailer.dump();
    write_u32(out, std::uint32_t(text.size()));
    out.write(text.data(), std::streamsize(text.size()));
    if (!out) throw ParseError("dataset: write failed for " + path);
}

Dataset load_dataset(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("dataset: cannot open " + path);
    if (read_u32(in, "magic") != kMagic)
        throw ParseError("dataset: bad magic in " + path + " (expected SKDS)");
    std::uint32_t version = read_u32(in, "version");
    if (version != kVersion)
        throw ParseError("dataset: unsupported version " + std::to_string(version));
    std::uint32_t n = read_u32(in, "sample count");
    std::uint32_t c = read_u32(in, "channels");
    std::uint32_t t = read_u32(in, "frames");
    std::uint32_t v = read_u32(in, "joints");
    std::uint32_t m = read_u32(in, "subjects");

    Dataset ds;
    ds.samples.resize(n);
    for (std::uint32_t i = 0; i < n; ++i) {
        Tensor data({c, t, v, m});
        read_doubles(in, data.data(), data.size());
        ds.samples[i].data = std::move(data);
    }
    for (std::uint32_t i = 0; i < n; ++i)
        ds.samples[i].label = read_u32(in, "label");

    std::uint32_t text_len = read_u32(in, "trailer length");
    std::string text(text_len, '\0');
    if (text_len > 0 && !in.read(text.data(), text_len))
        throw ParseError("dataset: truncated JSON trailer");
    nlohmann::json trailer;
    try {
        trailer = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(std::string("dataset: bad JSON trailer: ") + e.what());
    }
    if (trailer.contains("source_ids")) {
        const auto& ids = trailer["source_ids"];
        if (!ids.is_array() || ids.size() != n)
            throw ParseError("dataset: source id count disagrees with header N");
        for (std::uint32_t i = 0; i < n; ++i)
            ds.samples[i].source_id = ids[i].get<std::string>();
        trailer.erase("source_ids");
    }
    ds.meta = std::move(trailer);
    return ds;
}

Dataset generate_synthetic(const GeneratorConfig& cfg) {
    if (cfg.classes < 2) throw ValueError("generate_synthetic: need at least 2 classes");
    if (cfg.frames < 1 || cfg.subjects < 1)
        throw ValueError("generate_synthetic: bad dimensions");
    if (cfg.channels != 2 && cfg.channels != 3)
        throw ValueError("generate_synthetic: channels must be 2 or 3");
    JointHierarchy hier =
        cfg.hierarchy.joint_count() > 0 ? cfg.hierarchy : JointHierarchy::toy9();
    std::size_t joints = hier.joint_count();
    std::size_t chans = cfg.channels, frames = cfg.frames, subs = cfg.subjects;

    // Motion archetypes: one shared base motion, plus per-class overrides on a
    // sparse set of distinctive leaf joints. Class identity therefore lives in
    // a few joints rather than all of them, so occluding joints degrades
    // classification the way real occlusion does.
    struct Archetype {
        double freq;
        std::vector<double> amp;   // [joint * chans + ch]
        std::vector<double> phase; // same layout
        std::vector<double> mult;  // per joint
        std::vector<double> rest;  // static offset from the parent, per joint/channel
    };
    Archetype base;
    {
        Rng rng(mix_seed(cfg.seed, 999));
        // slow shared sway, well below the slowest class rate
        base.freq = 0.3 + 0.3 * rng.uniform();
        base.amp.resize(joints * chans);
        base.phase.resize(joints * chans);
        base.mult.resize(joints);
        base.rest.resize(joints * chans);
        for (std::size_t j = 0; j < joints; ++j) {
            base.mult[j] = (rng.uniform() < 0.35) ? 2.0 : 1.0;
            for (std::size_t ch = 0; ch < chans; ++ch) {
                base.amp[j * chans + ch] = 0.15 + 0.45 * rng.uniform();
                base.phase[j * chans + ch] = 2.0 * std::numbers::pi * rng.uniform();
                base.rest[j * chans + ch] = rng.uniform(-0.5, 0.5);
            }
        }
    }
    std::vector<char> is_leaf(joints, 1);
    for (int p : hier.parent)
        if (p >= 0) is_leaf[std::size_t(p)] = 0;
    std::vector<std::size_t> leaves;
    for (std::size_t j = 0; j < joints; ++j)
        if (is_leaf[j]) leaves.push_back(j);

    std::vector<Archetype> archetypes(cfg.classes, base);
    // each class moves its distinctive leaves at a class-unique rate; a model
    // trained on a subset of classes has never seen the held-out rates, which
    // is what real out-of-distribution motion looks like
    for (std::size_t cls = 0; cls < cfg.classes; ++cls) {
        Rng rng(mix_seed(cfg.seed, 1000 + cls));
        Archetype& a = archetypes[cls];
        double class_freq = 1.5 + 1.0 * double(cls);
        std::vector<std::size_t> distinctive;
        for (std::size_t j : leaves)
            if (rng.uniform() < 0.6) distinctive.push_back(j);
        while (distinctive.size() < std::min<std::size_t>(2, leaves.size())) {
            std::size_t j = leaves[rng.below(leaves.size())];
            if (std::find(distinctive.begin(), distinctive.end(), j) ==
                distinctive.end())
                distinctive.push_back(j);
        }
        for (std::size_t j : distinctive) {
            a.mult[j] = class_freq / a.freq;
            for (std::size_t ch = 0; ch < chans; ++ch) {
                a.amp[j * chans + ch] = 0.35 + 0.35 * rng.uniform();
                a.phase[j * chans + ch] = 2.0 * std::numbers::pi * rng.uniform();
                a.rest[j * chans + ch] = rng.uniform(-0.5, 0.5);
            }
        }
    }

    // Joints in topological order so a parent trajectory exists before its
    // children need it.
    std::vector<std::size_t> order;
    order.reserve(joints);
    {
        std::vector<char> placed(joints, 0);
        while (order.size() < joints) {
            for (std::size_t j = 0; j < joints; ++j) {
                if (placed[j]) continue;
                int p = hier.parent[j];
                if (p < 0 || placed[std::size_t(p)]) {
                    order.push_back(j);
                    placed[j] = 1;
                }
            }
        }
    }

    auto archetype_value = [&](const Archetype& a, std::size_t sub,
                               double rate_scale) {
        // trajectory[ch][t][j]
        Tensor traj({chans, frames, joints});
        double sub_shift = double(sub) * 1.5;
        for (std::size_t j : order) {
            int p = hier.parent[j];
            for (std::size_t ch = 0; ch < chans; ++ch) {
                double amp = a.amp[j * chans + ch];
                double phase = a.phase[j * chans + ch];
                double freq = a.freq * a.mult[j] * rate_scale;
                double rest = a.rest[j * chans + ch];
                for (std::size_t t = 0; t < frames; ++t) {
                    double base = p >= 0 ? traj.at(ch, t, std::size_t(p)) : sub_shift;
                    double angle =
                        2.0 * std::numbers::pi * freq * double(t) / double(frames) + phase;
                    traj.at(ch, t, j) = base + rest + amp * std::sin(angle);
                }
            }
        }
        return traj;
    };

    Dataset ds;
    std::size_t sample_index = 0;
    for (std::size_t cls = 0; cls < cfg.classes; ++cls) {
        for (std::size_t s = 0; s < cfg.samples_per_class; ++s) {
            Rng jitter(mix_seed(cfg.seed, 2000000 + sample_index));
            // nobody performs an action at exactly the canonical speed: each
            // performance runs up to 10% faster or slower. A noiseless dataset
            // (sigma == 0) stays fully deterministic, so the jitter is tied to
            // the same switch as the additive noise.
            double rate_scale =
                cfg.sigma > 0.0 ? 0.9 + 0.2 * jitter.uniform() : 1.0;
            std::vector<Tensor> subject_traj;
            for (std::size_t sub = 0; sub < subs; ++sub)
                subject_traj.push_back(
                    archetype_value(archetypes[cls], sub, rate_scale));
            SkeletonSequence seq;
            seq.data = Tensor({chans, frames, joints, subs});
            for (std::size_t ch = 0; ch < chans; ++ch)
                for (std::size_t t = 0; t < frames; ++t)
                    for (std::size_t j = 0; j < joints; ++j)
                        for (std::size_t sub = 0; sub < subs; ++sub) {
                            double noise =
                                cfg.sigma > 0.0 ? cfg.sigma * jitter.gaussian() : 0.0;
                            seq.data.at(ch, t, j, sub) =
                                subject_traj[sub].at(ch, t, j) + noise;
                        }
            // standardize each channel so class identity lives in the joint
            // pattern rather than in the overall motion magnitude
            for (std::size_t ch = 0; ch < chans; ++ch) {
                double sum = 0.0, sq = 0.0;
                std::size_t cnt = frames * joints * subs;
                for (std::size_t t = 0; t < frames; ++t)
                    for (std::size_t j = 0; j < joints; ++j)
                        for (std::size_t sub = 0; sub < subs; ++sub) {
                            double x = seq.data.at(ch, t, j, sub);
                            sum += x;
                            sq += x * x;
                        }
                double mean = sum / double(cnt);
                double var = sq / double(cnt) - mean * mean;
                double sd = var > 0.0 ? std::sqrt(var) : 1.0;
                for (std::size_t t = 0; t < frames; ++t)
                    for (std::size_t j = 0; j < joints; ++j)
                        for (std::size_t sub = 0; sub < subs; ++sub)
                            seq.data.at(ch, t, j, sub) =
                                (seq.data.at(ch, t, j, sub) - mean) / sd;
            }
            seq.label = std::uint32_t(cls);
            seq.source_id = "syn-" + std::to_string(cfg.seed) + "-" +
                            std::to_string(cls) + "-" + std::to_string(s);
            ds.samples.push_back(std::move(seq));
            ++sample_index;
        }
    }

    nlohmann::json class_names = nlohmann::json::array();
    for (std::size_t cls = 0; cls < cfg.classes; ++cls)
        class_names.push_back("class_" + std::to_string(cls));
    ds.meta["class_names"] = std::move(class_names);
    ds.meta["seed"] = cfg.seed;
    ds.meta["generator"] = {
        {"classes", cfg.classes}, {"samples_per_class", cfg.samples_per_class},
        {"channels", chans},      {"frames", frames},
        {"subjects", subs},       {"sigma", cfg.sigma},
    };
    nlohmann::json parents = nlohmann::json::array();
    for (int p : hier.parent) parents.push_back(p);
    ds.meta["hierarchy_parents"] = std::move(parents);
    return ds;
}

SplitResult split_dataset(const Dataset& ds, const SplitSpec& spec) {
    if (spec.train_fraction <= 0.0 || spec.train_fraction >= 1.0)
        throw ValueError("split: train fraction must lie in (0, 1)");
    for (std::uint32_t c : spec.seen_classes)
        for (std::uint32_t u : spec.unseen_classes)
            if (c == u) throw ValueError("split: class marked both seen and unseen");

    auto indices_of = [&](std::uint32_t cls) {
        std::vector<std::size_t> idx;
        for (std::size_t i = 0; i < ds.samples.size(); ++i)
            if (ds.samples[i].label == cls) idx.push_back(i);
        return idx;
    };

    SplitResult out;
    out.train.meta = out.val.meta = out.test_seen.meta = out.test_mix.meta = ds.meta;
    for (std::uint32_t cls : spec.seen_classes) {
        std::vector<std::size_t> idx = indices_of(cls);
        if (idx.empty())
            throw ValueError("split: seen class " + std::to_string(cls) +
                             " has no samples");
        Rng rng(mix_seed(spec.seed, 3000 + cls));
        rng.shuffle(idx);
        std::size_t n_train = std::size_t(std::floor(spec.train_fraction * double(idx.size())));
        if (n_train == 0 || n_train == idx.size())
            throw ValueError("split: class " + std::to_string(cls) +
                             " would leave an empty split");
        for (std::size_t i = 0; i < idx.size(); ++i) {
            const SkeletonSequence& s = ds.samples[idx[i]];
            if (i < n_train) {
                out.train.samples.push_back(s);
            } else {
                out.val.samples.push_back(s);
                out.test_seen.samples.push_back(s);
                out.test_mix.samples.push_back(s);
            }
        }
    }
    for (std::uint32_t cls : spec.unseen_classes) {
        std::vector<std::size_t> idx = indices_of(cls);
        if (idx.empty())
            throw ValueError("split: unseen class " + std::to_string(cls) +
                             " has no samples");
        for (std::size_t i : idx) out.test_mix.samples.push_back(ds.samples[i]);
    }

    nlohmann::json seen = nlohmann::json::array();
    for (std::uint32_t c : spec.seen_classes) seen.push_back(c);
    nlohmann::json unseen = nlohmann::json::array();
    for (std::uint32_t c : spec.unseen_classes) unseen.push_back(c);
    for (Dataset* d : {&out.train, &out.val, &out.test_seen, &out.test_mix}) {
        d->meta["seen_classes"] = seen;
        d->meta["unseen_classes"] = unseen;
        d->meta["split_seed"] = spec.seed;
    }
    return out;
}

SkeletonSequence mask_joints(const SkeletonSequence& seq, double percentage,
                             std::uint64_t seed) {
    if (percentage < 0.0 || percentage >= 100.0)
        throw ValueError("mask_joints: percentage must lie in [0, 100)");
    std::size_t joints = seq.joints();
    std::size_t n_mask = std::size_t(std::floor(percentage / 100.0 * double(joints)));
    SkeletonSequence out = seq;
    if (n_mask == 0) return out;
    std::vector<std::size_t> idx(joints);
    for (std::size_t j = 0; j < joints; ++j) idx[j] = j;
    Rng rng(mix_seed(seed, 7777));
    rng.shuffle(idx);
    for (std::size_t k = 0; k < n_mask; ++k) {
        std::size_t j = idx[k];
        for (std::size_t ch = 0; ch < seq.channels(); ++ch)
            for (std::size_t t = 0; t < seq.frames(); ++t)
                for (std::size_t sub = 0; sub < seq.subjects(); ++sub)
                    out.data.at(ch, t, j, sub) = 0.0;
    }
    return out;
}

} // namespace skod
