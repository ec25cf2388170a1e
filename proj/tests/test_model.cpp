#include <cmath>
#include <vector>

#include <doctest.h>

#include "skod/errors.hpp"
#include "skod/gradcheck.hpp"
#include "skod/model.hpp"
#include "skod/rng.hpp"

using namespace skod;

namespace {

SkeletonSequence random_sample(std::size_t chans, std::size_t frames,
                               std::size_t joints, std::size_t subs,
                               std::uint64_t seed) {
    Rng rng(seed);
    SkeletonSequence s;
    s.data = Tensor({chans, frames, joints, subs});
    for (std::size_t k = 0; k < s.data.size(); ++k)
        s.data[k] = rng.uniform(-1.0, 1.0);
    s.label = 0;
    s.source_id = "t" + std::to_string(seed);
    return s;
}

ModelConfig tiny_config(std::size_t seen, AshStrategy strat = AshStrategy::P,
                        bool fusion = true) {
    ModelConfig cfg;
    cfg.input_channels = 2;
    cfg.blocks = {{2, 4, 3, 1}, {4, 6, 3, 2}};
    cfg.ash.strategy = strat;
    cfg.fusion = fusion;
    cfg.mlp_hidden = 8;
    cfg.fuse_dim = 8;
    cfg.seen_classes = seen;
    cfg.extra_dims = 1;
    cfg.dropout_rate = 0.0;
    return cfg;
}

} // namespace

TEST_SUITE("model") {

TEST_CASE("config validation and json round trip") {
    ModelConfig cfg = ModelConfig::desk_default(3, 6);
    cfg.validate();
    CHECK(cfg.feature_dim() == 64);
    CHECK(cfg.concat_dim() == 128);
    CHECK(cfg.logit_dim() == 7);

    ModelConfig back = ModelConfig::from_json(cfg.to_json());
    CHECK(back.to_json() == cfg.to_json());

    ModelConfig broken = cfg;
    broken.blocks[1].in_channels = 99;
    CHECK_THROWS_AS(broken.validate(), ValueError);

    ModelConfig even = cfg;
    even.blocks[0].temporal_kernel = 4;
    CHECK_THROWS_AS(even.validate(), ValueError);

    ModelConfig no_extra = cfg;
    no_extra.extra_dims = 0;
    CHECK_THROWS_AS(no_extra.validate(), ValueError);

    ModelConfig off = cfg;
    off.ash.strategy = AshStrategy::Off;
    CHECK(off.concat_dim() == 64);
    ModelConfig plain = cfg;
    plain.fusion = false;
    CHECK(plain.classifier_in() == 128);
}

TEST_CASE("deterministic init and forward") {
    GraphTopology topo = GraphTopology::build(JointHierarchy::toy9());
    ModelConfig cfg = tiny_config(3);
    Model a = Model::init(cfg, topo, 11);
    Model b = Model::init(cfg, topo, 11);
    for (std::size_t i = 0; i < a.params().size(); ++i)
        CHECK(a.params().values[i].values() == b.params().values[i].values());

    Model c = Model::init(cfg, topo, 12);
    bool differ = false;
    for (std::size_t i = 0; i < a.params().size(); ++i)
        if (a.params().values[i].values() != c.params().values[i].values())
            differ = true;
    CHECK(differ);

    SkeletonSequence s = random_sample(2, 6, 9, 1, 5);
    std::vector<double> l1 = a.eval_logits(s);
    std::vector<double> l2 = a.eval_logits(s);
    CHECK(l1 == l2);
    CHECK(l1.size() == cfg.logit_dim());
}

TEST_CASE("feature dimension invariant to frames and subjects") {
    GraphTopology topo = GraphTopology::build(JointHierarchy::toy9());
    Model m = Model::init(tiny_config(3), topo, 3);
    Tensor f1 = m.extract_features(random_sample(2, 4, 9, 1, 1));
    Tensor f2 = m.extract_features(random_sample(2, 12, 9, 2, 2));
    CHECK(f1.size() == 6);
    CHECK(f2.size() == 6);
}

TEST_CASE("subject order invariance") {
    GraphTopology topo = GraphTopology::build(JointHierarchy::toy9());
    Model m = Model::init(tiny_config(3), topo, 3);
    SkeletonSequence s = random_sample(2, 6, 9, 2, 9);
    SkeletonSequence swapped = s;
    for (std::size_t c = 0; c < 2; ++c)
        for (std::size_t t = 0; t < 6; ++t)
            for (std::size_t j = 0; j < 9; ++j) {
                swapped.data.at(c, t, j, 0) = s.data.at(c, t, j, 1);
                swapped.data.at(c, t, j, 1) = s.data.at(c, t, j, 0);
            }
    std::vector<double> a = m.eval_logits(s);
    std::vector<double> b = m.eval_logits(swapped);
    for (std::size_t i = 0; i < a.size(); ++i)
        CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-12));
}

TEST_CASE("input validation") {
    GraphTopology topo = GraphTopology::build(JointHierarchy::toy9());
    Model m = Model::init(tiny_config(3), topo, 3);
    CHECK_THROWS_AS(m.eval_logits(random_sample(2, 4, 7, 1, 1)), ValueError);
    CHECK_THROWS_AS(m.eval_logits(random_sample(3, 4, 9, 1, 1)), ValueError);
    SkeletonSequence bad = random_sample(2, 4, 9, 1, 1);
    bad.data[0] = std::nan("");
    CHECK_THROWS_AS(m.eval_logits(bad), ValueError);
}

TEST_CASE("rectified features are nonnegative") {
    GraphTopology topo = GraphTopology::build(JointHierarchy::toy9());
    Model m = Model::init(tiny_config(4), topo, 17);
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        Tensor f = m.extract_features(random_sample(2, 8, 9, 1, 40 + seed));
        for (std::size_t i = 0; i < f.size(); ++i) CHECK(f[i] >= 0.0);
    }
}

TEST_CASE("end-to-end gradients through the whole network") {
    GraphTopology topo = GraphTopology::build(JointHierarchy::from_parents({-1, 0, 0}));
    ModelConfig cfg;
    cfg.input_channels = 2;
    cfg.blocks = {{2, 3, 3, 1}};
    cfg.mlp_hidden = 4;
    cfg.fuse_dim = 4;
    cfg.seen_classes = 2;
    cfg.dropout_rate = 0.0;
    for (AshStrategy strat : {AshStrategy::P, AshStrategy::Off}) {
        cfg.ash.strategy = strat;
        for (std::uint64_t seed = 0; seed < 10; ++seed) {
            Model m = Model::init(cfg, topo, seed);
            SkeletonSequence s = random_sample(2, 4, 3, 1, 100 + seed);
            s.data.fill(0.0);
            Rng rng(seed + 1);
            for (std::size_t k = 0; k < s.data.size(); ++k)
                s.data[k] = rng.uniform(0.1, 1.0);
            // randomize every parameter, biases included: zero-initialized
            // biases put relu inputs exactly on the kink, where the
            // subgradient convention and finite differences disagree
            for (Tensor& p : m.params().values)
                for (std::size_t k = 0; k < p.size(); ++k)
                    p[k] = rng.uniform(0.1, 0.6);
            for (std::size_t p = 0; p < m.params().size(); ++p) {
                GradCheckResult r = check_gradient(
                    [&](Tape& tape) {
                        std::vector<Var> pvars = m.push_params(tape);
                        Model::ForwardResult fr =
                            m.forward(tape, pvars, s, false, nullptr);
                        Var e = neg(logsumexp_op(slice(fr.logits, 0, 2), 1.0));
                        Var loss = add(cross_entropy(fr.logits, 0),
                                       scale(hinge_sq(e, -25.0), 0.1));
                        return std::make_pair(loss, pvars[p]);
                    },
                    m.params().values[p], 1e-4);
                CHECK_MESSAGE(r.pass, "param ", m.params().names[p], " seed ", seed,
                              " max rel err ", r.max_rel_err);
            }
        }
    }
}

TEST_CASE("dropout training mode differs but is seeded") {
    GraphTopology topo = GraphTopology::build(JointHierarchy::toy9());
    ModelConfig cfg = tiny_config(3);
    cfg.dropout_rate = 0.5;
    Model m = Model::init(cfg, topo, 1);
    SkeletonSequence s = random_sample(2, 6, 9, 1, 2);

    Tape t1;
    Rng d1(77);
    auto pv1 = m.push_params(t1);
    Var l1 = m.forward(t1, pv1, s, true, &d1).logits;
    Tape t2;
    Rng d2(77);
    auto pv2 = m.push_params(t2);
    Var l2 = m.forward(t2, pv2, s, true, &d2).logits;
    CHECK(l1.value().values() == l2.value().values());

    CHECK_THROWS_AS((void)m.forward(t1, pv1, s, true, nullptr), ContractError);
}

} // TEST_SUITE
