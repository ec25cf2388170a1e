// skod: dataset generation, training, evaluation and per-sample detection
// for the skeleton-action OOD pipeline.

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "skod/checkpoint.hpp"
#include "skod/dataset.hpp"
#include "skod/energy.hpp"
#include "skod/errors.hpp"
#include "skod/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kToolVersion = "skod 1.0.0";

constexpr int kExitUsage = 2;
constexpr int kExitInput = 3;
constexpr int kExitState = 4;

void write_manifest(const fs::path& path, const std::string& command,
                    const json& resolved, const json& inputs, const json& outputs) {
    json m = {
        {"tool", kToolVersion},
        {"command", command},
        {"config", resolved},
        {"inputs", inputs},
        {"outputs", outputs},
    };
    std::ofstream out(path);
    if (!out) throw skod::ParseError("cannot write manifest " + path.string());
    out << m.dump(2) << "\n";
}

skod::JointHierarchy resolve_hierarchy(const std::string& skeleton,
                                       const std::string& hierarchy_file) {
    if (!hierarchy_file.empty()) return skod::JointHierarchy::load(hierarchy_file);
    if (skeleton == "toy9") return skod::JointHierarchy::toy9();
    if (skeleton == "ntu25") return skod::JointHierarchy::ntu25();
    throw skod::ValueError("unknown skeleton preset: " + skeleton);
}

skod::JointHierarchy hierarchy_from_meta(const skod::Dataset& ds) {
    if (ds.meta.contains("hierarchy_parents")) {
        std::vector<int> parents;
        for (const auto& p : ds.meta.at("hierarchy_parents"))
            parents.push_back(p.get<int>());
        return skod::JointHierarchy::from_parents(std::move(parents));
    }
    std::size_t v = ds.samples.empty() ? 0 : ds.samples[0].joints();
    if (v == 9) return skod::JointHierarchy::toy9();
    if (v == 25) return skod::JointHierarchy::ntu25();
    throw skod::ContractError(
        "dataset carries no joint hierarchy and has no preset for V=" +
        std::to_string(v));
}

// ---- generate ----

struct GenerateArgs {
    std::size_t classes = 8, unseen = 2, per_class = 100;
    std::size_t channels = 3, frames = 32, subjects = 1;
    double sigma = 0.05;
    std::uint64_t seed = 0;
    std::string skeleton = "toy9", hierarchy_file, out_dir;
};

int run_generate(const GenerateArgs& a) {
    if (a.unseen >= a.classes) {
        std::cerr << "generate: --unseen must leave at least one seen class\n";
        return kExitUsage;
    }
    skod::GeneratorConfig gc;
    gc.classes = a.classes;
    gc.samples_per_class = a.per_class;
    gc.channels = a.channels;
    gc.frames = a.frames;
    gc.subjects = a.subjects;
    gc.sigma = a.sigma;
    gc.seed = a.seed;
    gc.hierarchy = resolve_hierarchy(a.skeleton, a.hierarchy_file);
    skod::Dataset full = skod::generate_synthetic(gc);

    skod::SplitSpec spec;
    for (std::size_t c = 0; c + a.unseen < a.classes; ++c)
        spec.seen_classes.push_back(std::uint32_t(c));
    for (std::size_t c = a.classes - a.unseen; c < a.classes; ++c)
        spec.unseen_classes.push_back(std::uint32_t(c));
    spec.seed = a.seed;
    skod::SplitResult split = skod::split_dataset(full, spec);

    fs::create_directories(a.out_dir);
    fs::path dir(a.out_dir);
    skod::save_dataset(split.train, (dir / "train.skds").string());
    skod::save_dataset(split.val, (dir / "val.skds").string());
    skod::save_dataset(split.test_seen, (dir / "test_seen.skds").string());
    skod::save_dataset(split.test_mix, (dir / "test_mix.skds").string());

    json resolved = {
        {"classes", a.classes},   {"unseen", a.unseen},
        {"per_class", a.per_class}, {"channels", a.channels},
        {"frames", a.frames},     {"subjects", a.subjects},
        {"sigma", a.sigma},       {"seed", a.seed},
        {"skeleton", a.skeleton}, {"hierarchy_file", a.hierarchy_file},
    };
    json outputs = {"train.skds", "val.skds", "test_seen.skds", "test_mix.skds"};
    write_manifest(dir / "manifest.json", "generate", resolved, json::array(), outputs);
    std::cout << "wrote 4 splits + manifest to " << dir.string() << "\n";
    return 0;
}

// ---- train ----

struct TrainArgs {
    std::string data_dir, out_dir;
    std::uint64_t seed = 0;
    std::size_t epochs = 50, batch = 32, warmup = 5;
    double lr = 0.001, momentum = 0.9, weight_decay = 0.0004;
    std::string ash = "p", fusion = "on", loss = "energy";
    double prune_pct = 75.0, dropout = 0.1;
    std::size_t extra_dims = 1;
    double epsilon = 1.0, quantile = 0.10, margin = -25.0, alpha = 0.1;
};

int run_train(const TrainArgs& a) {
    fs::path data(a.data_dir);
    skod::Dataset train_set = skod::load_dataset((data / "train.skds").string());
    skod::Dataset val_set = skod::load_dataset((data / "val.skds").string());
    skod::JointHierarchy hierarchy = hierarchy_from_meta(train_set);
    skod::GraphTopology topology = skod::GraphTopology::build(hierarchy);

    std::vector<std::uint32_t> labels;
    for (const auto& s : train_set.samples) labels.push_back(s.label);
    std::sort(labels.begin(), labels.end());
    labels.erase(std::unique(labels.begin(), labels.end()), labels.end());

    skod::ModelConfig mc = skod::ModelConfig::desk_default(
        train_set.samples.at(0).channels(), labels.size());
    mc.ash.strategy = skod::ash_strategy_from_string(a.ash);
    mc.ash.prune_pct = a.prune_pct;
    mc.fusion = a.fusion == "on";
    mc.extra_dims = a.extra_dims;
    mc.dropout_rate = a.dropout;

    skod::TrainConfig tc;
    tc.lr = a.lr;
    tc.momentum = a.momentum;
    tc.weight_decay = a.weight_decay;
    tc.batch_size = a.batch;
    tc.epochs = a.epochs;
    tc.warmup_epochs = a.warmup;
    tc.seed = a.seed;
    tc.energy_loss = a.loss == "energy";
    tc.energy = {a.epsilon, a.quantile, a.margin, a.alpha};

    fs::create_directories(a.out_dir);
    fs::path dir(a.out_dir);
    std::ofstream log(dir / "train_log.jsonl");
    skod::Model model = skod::Model::init(mc, std::move(topology), a.seed);
    skod::TrainResult result =
        skod::train(std::move(model), train_set, val_set, tc, &log);
    skod::save_checkpoint(result.model, result.detector, result.class_labels,
                          hierarchy, (dir / "model.skod").string());

    json resolved = {
        {"data", a.data_dir},     {"seed", a.seed},
        {"epochs", a.epochs},     {"batch", a.batch},
        {"warmup", a.warmup},     {"lr", a.lr},
        {"momentum", a.momentum}, {"weight_decay", a.weight_decay},
        {"ash", a.ash},           {"prune_pct", a.prune_pct},
        {"fusion", a.fusion},     {"loss", a.loss},
        {"extra_dims", a.extra_dims}, {"dropout", a.dropout},
        {"epsilon", a.epsilon},   {"quantile", a.quantile},
        {"margin", a.margin},     {"alpha", a.alpha},
    };
    json inputs = {(data / "train.skds").string(), (data / "val.skds").string()};
    json outputs = {"model.skod", "train_log.jsonl"};
    write_manifest(dir / "manifest.json", "train", resolved, inputs, outputs);
    const skod::EpochStats& last = result.history.back();
    std::cout << "trained " << a.epochs << " epochs; final loss " << last.loss
              << ", val top1 " << last.val_top1 << ", tau "
              << result.detector.tau << "\n";
    return 0;
}

// ---- eval ----

struct EvalArgs {
    std::string checkpoint, data_file, mode = "mix";
    std::string report_out, hist_out;
    double mask_pct = 0.0;
    std::uint64_t seed = 0;
    std::size_t threads = 1;
};

void export_histogram(const std::string& path,
                      const std::vector<skod::SampleScore>& scores,
                      std::size_t bins = 50) {
    std::ofstream out(path);
    if (!out) throw skod::ParseError("cannot write histogram " + path);
    double lo = scores[0].score, hi = scores[0].score;
    for (const auto& s : scores) {
        lo = std::min(lo, s.score);
        hi = std::max(hi, s.score);
    }
    std::vector<std::size_t> id_count(bins, 0), ood_count(bins, 0);
    double width = (hi - lo) / double(bins);
    for (const auto& s : scores) {
        std::size_t b = 0;
        if (hi > lo) {
            b = std::size_t((s.score - lo) / width);
            if (b >= bins) b = bins - 1; // top edge lands in the last bin
        }
        (s.is_id ? id_count : ood_count)[b]++;
    }
    out << "bin_lo,bin_hi,id_count,ood_count\n";
    for (std::size_t b = 0; b < bins; ++b)
        out << (lo + double(b) * width) << "," << (lo + double(b + 1) * width) << ","
            << id_count[b] << "," << ood_count[b] << "\n";

    fs::path scores_path = fs::path(path).replace_extension(".scores.csv");
    std::ofstream sout(scores_path);
    sout << "id,score,is_id\n";
    for (const auto& s : scores)
        sout << s.source_id << "," << s.score << "," << (s.is_id ? 1 : 0) << "\n";
}

int run_eval(const EvalArgs& a) {
    if (a.mode != "mix" && a.mode != "id") {
        std::cerr << "eval: --mode must be 'id' or 'mix'\n";
        return kExitUsage;
    }
    if (a.threads > 1)
        std::cerr << "warning: --threads " << a.threads
                  << " parallelizes evaluation; bitwise reproducibility is "
                     "guaranteed only at --threads 1\n";
    skod::LoadedCheckpoint ckpt = skod::load_checkpoint(a.checkpoint);
    skod::Dataset data = skod::load_dataset(a.data_file);
    if (a.mask_pct > 0.0)
        for (auto& s : data.samples) s = skod::mask_joints(s, a.mask_pct, a.seed);

    std::vector<skod::SampleScore> scores = skod::score_dataset(
        ckpt.model, ckpt.info.detector, ckpt.info.class_labels, data, a.threads);
    skod::MetricReport report =
        skod::summarize(scores, ckpt.info.detector, a.mode == "mix");
    if (!a.hist_out.empty()) export_histogram(a.hist_out, scores);

    std::string text = report.to_json();
    std::cout << text << "\n";
    if (!a.report_out.empty()) {
        std::ofstream out(a.report_out);
        if (!out) throw skod::ParseError("cannot write report " + a.report_out);
        out << text << "\n";

        json resolved = {
            {"checkpoint", a.checkpoint}, {"data", a.data_file},
            {"mode", a.mode},             {"mask_pct", a.mask_pct},
            {"seed", a.seed},             {"threads", a.threads},
            {"export_hist", a.hist_out},
        };
        write_manifest(fs::path(a.report_out).string() + ".manifest.json", "eval",
                       resolved, json{a.checkpoint, a.data_file},
                       json{a.report_out});
    }
    return 0;
}

// ---- detect ----

struct DetectArgs {
    std::string checkpoint, input, out;
};

int run_detect(const DetectArgs& a) {
    skod::LoadedCheckpoint ckpt = skod::load_checkpoint(a.checkpoint);
    skod::Dataset data = skod::load_dataset(a.input);
    std::size_t seen = ckpt.info.class_labels.size();

    std::ofstream file;
    if (!a.out.empty()) {
        file.open(a.out);
        if (!file) throw skod::ParseError("cannot write " + a.out);
    }
    std::ostream& out = a.out.empty() ? std::cout : file;
    for (const auto& s : data.samples) {
        std::vector<double> logits = ckpt.model.eval_logits(s);
        skod::Detection d = skod::detect(logits, seen, ckpt.info.detector);
        json line = {
            {"id", s.source_id},
            {"score", d.score},
            {"tau", ckpt.info.detector.tau},
            {"verdict", d.is_ood ? "unseen" : "seen"},
            {"label", d.label},
        };
        out << line.dump() << "\n";
    }
    if (!a.out.empty()) {
        json resolved = {{"checkpoint", a.checkpoint}, {"input", a.input}};
        write_manifest(a.out + ".manifest.json", "detect", resolved,
                       json{a.checkpoint, a.input}, json{a.out});
    }
    return 0;
}

std::uint64_t env_seed_default() {
    const char* s = std::getenv("SKOD_SEED");
    if (s == nullptr || *s == '\0') return 0;
    return std::strtoull(s, nullptr, 10);
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"skeleton-action classifier with energy-based OOD detection"};
    app.require_subcommand(1);
    std::uint64_t default_seed = env_seed_default();

    GenerateArgs g;
    g.seed = default_seed;
    CLI::App* gen = app.add_subcommand("generate", "generate a synthetic dataset");
    gen->set_config("--config");
    gen->add_option("--classes", g.classes, "total class count");
    gen->add_option("--unseen", g.unseen, "classes held out as OOD");
    gen->add_option("--per-class", g.per_class, "samples per class");
    gen->add_option("--channels", g.channels, "coordinate channels");
    gen->add_option("--frames", g.frames, "frames per clip");
    gen->add_option("--subjects", g.subjects, "subjects per clip");
    gen->add_option("--sigma", g.sigma, "per-sample jitter stddev");
    gen->add_option("--seed", g.seed, "generator seed");
    gen->add_option("--skeleton", g.skeleton, "joint preset: toy9 or ntu25");
    gen->add_option("--hierarchy", g.hierarchy_file, "custom hierarchy file");
    gen->add_option("-o,--out", g.out_dir, "output directory")->required();

    TrainArgs t;
    t.seed = default_seed;
    CLI::App* tr = app.add_subcommand("train", "train a model on a split");
    tr->set_config("--config");
    tr->add_option("--data", t.data_dir, "split directory (train.skds, val.skds)")
        ->required();
    tr->add_option("-o,--out", t.out_dir, "output directory")->required();
    tr->add_option("--seed", t.seed, "training seed");
    tr->add_option("--epochs", t.epochs, "epoch count");
    tr->add_option("--batch", t.batch, "mini-batch size");
    tr->add_option("--warmup", t.warmup, "linear warmup epochs");
    tr->add_option("--lr", t.lr, "base learning rate");
    tr->add_option("--momentum", t.momentum, "Nesterov momentum");
    tr->add_option("--weight-decay", t.weight_decay, "L2 weight decay");
    tr->add_option("--ash", t.ash, "activation shaping: p, b, s or off");
    tr->add_option("--prune-pct", t.prune_pct, "ASH pruning percentile");
    tr->add_option("--fusion", t.fusion, "feature fusion head: on or off");
    tr->add_option("--loss", t.loss, "objective: energy or ce");
    tr->add_option("--extra-dims", t.extra_dims, "reserved unseen logit slots");
    tr->add_option("--dropout", t.dropout, "classifier dropout rate");
    tr->add_option("--epsilon", t.epsilon, "energy temperature");
    tr->add_option("--quantile", t.quantile, "threshold calibration quantile");
    tr->add_option("--margin", t.margin, "energy-loss margin m_in");
    tr->add_option("--alpha", t.alpha, "energy-loss weight");

    EvalArgs e;
    e.seed = default_seed;
    CLI::App* ev = app.add_subcommand("eval", "evaluate a checkpoint on a split");
    ev->set_config("--config");
    ev->add_option("--checkpoint", e.checkpoint, "trained checkpoint")->required();
    ev->add_option("--data", e.data_file, "split file (.skds)")->required();
    ev->add_option("--mode", e.mode, "id or mix");
    ev->add_option("--mask-pct", e.mask_pct, "zero this percentage of joints");
    ev->add_option("--seed", e.seed, "joint-masking seed");
    ev->add_option("--threads", e.threads, "evaluation threads");
    ev->add_option("--export-hist", e.hist_out, "write score histogram CSV here");
    ev->add_option("-o,--out", e.report_out, "write the JSON report here");

    DetectArgs d;
    CLI::App* de = app.add_subcommand("detect", "per-sample verdicts");
    de->set_config("--config");
    de->add_option("--checkpoint", d.checkpoint, "trained checkpoint")->required();
    de->add_option("--input", d.input, "input samples (.skds)")->required();
    de->add_option("-o,--out", d.out, "write JSON-lines here (default stdout)");

    try {
        app.parse(argc, argv);
        if (gen->parsed()) return run_generate(g);
        if (tr->parsed()) return run_train(t);
        if (ev->parsed()) return run_eval(e);
        return run_detect(d);
    } catch (const CLI::ParseError& err) {
        int code = app.exit(err);
        return code == 0 ? 0 : kExitUsage;
    } catch (const skod::ParseError& err) {
        std::cerr << "error: " << err.what() << "\n";
        return kExitInput;
    } catch (const skod::ValueError& err) {
        std::cerr << "error: " << err.what() << "\n";
        return kExitInput;
    } catch (const skod::Error& err) { // state / contract
        std::cerr << "error: " << err.what() << "\n";
        return kExitState;
    }
}
