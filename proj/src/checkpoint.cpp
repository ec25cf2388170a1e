#include "skod/checkpoint.hpp"

#include <bit>
#include <fstream>

#include "skod/errors.hpp"

namespace skod {

namespace {

constexpr std::uint32_t kMagic = 0x444F4B53; // "SKOD" little-endian
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
        throw ParseError(std::string("checkpoint: truncated while reading ") + what);
    return std::uint32_t(b[0]) | (std::uint32_t(b[1]) << 8) |
           (std::uint32_t(b[2]) << 16) | (std::uint32_t(b[3]) << 24);
}

} // namespace

Model Checkpoint::build_model() const {
    return Model(model_config, GraphTopology::build(hierarchy));
}

void save_checkpoint(const Model& model, const DetectorState& detector,
                     const std::vector<std::uint32_t>& class_labels,
                     const JointHierarchy& hierarchy, const std::string& path) {
    static_assert(std::endian::native == std::endian::little,
                  "big-endian hosts need byte swapping here");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ParseError("checkpoint: cannot open " + path + " for writing");

    nlohmann::json header;
    header["model"] = model.config().to_json();
    nlohmann::json parents = nlohmann::json::array();
    for (int p : hierarchy.parent) parents.push_back(p);
    header["hierarchy_parents"] = std::move(parents);
    nlohmann::json labels = nlohmann::json::array();
    for (std::uint32_t l : class_labels) labels.push_back(l);
    header["class_labels"] = std::move(labels);
    header["detector"] = {
        {"calibrated", detector.calibrated},
        {"tau", detector.tau},
        {"calibration_count", detector.calibration_count},
        {"epsilon", detector.config.epsilon},
        {"quantile", detector.config.quantile},
        {"margin", detector.config.margin},
        {"alpha", detector.config.alpha},
    };
    std::string text = header.dump();

    write_u32(out, kMagic);
    write_u32(out, kVersion);
    write_u32(out, std::uint32_t(text.size()));
    out.write(text.data(), std::streamsize(text.size()));

    const ParamSet& params = model.params();
    write_u32(out, std::uint32_t(params.size()));
    for (std::size_t i = 0; i < params.size(); ++i) {
        const std::string& name = params.names[i];
        const Tensor& value = params.values[i];
        write_u32(out, std::uint32_t(name.size()));
        out.write(name.data(), std::streamsize(name.size()));
        write_u32(out, std::uint32_t(value.rank()));
        for (std::size_t d = 0; d < value.rank(); ++d)
            write_u32(out, std::uint32_t(value.dim(d)));
        out.write(reinterpret_cast<const char*>(value.data()),
                  std::streamsize(value.size() * 8));
    }
    if (!out) throw ParseError("checkpoint: write failed for " + path);
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("checkpoint: cannot open " + path);
    if (read_u32(in, "magic") != kMagic)
        throw ParseError("checkpoint: bad magic in " + path + " (expected SKOD)");
    std::uint32_t version = read_u32(in, "version");
    if (version != kVersion)
        throw ParseError("checkpoint: unsupported version " + std::to_string(version));
    std::uint32_t text_len = read_u32(in, "header length");
    std::string text(text_len, '\0');
    if (!in.read(text.data(), text_len))
        throw ParseError("checkpoint: truncated JSON header");
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(std::string("checkpoint: bad JSON header: ") + e.what());
    }

    Checkpoint info;
    info.model_config = ModelConfig::from_json(header.at("model"));
    std::vector<int> parents;
    for (const auto& p : header.at("hierarchy_parents")) parents.push_back(p.get<int>());
    info.hierarchy = JointHierarchy::from_parents(std::move(parents));
    for (const auto& l : header.at("class_labels"))
        info.class_labels.push_back(l.get<std::uint32_t>());
    const auto& det = header.at("detector");
    info.detector.calibrated = det.at("calibrated").get<bool>();
    info.detector.tau = det.at("tau").get<double>();
    info.detector.calibration_count = det.at("calibration_count").get<std::size_t>();
    info.detector.config.epsilon = det.at("epsilon").get<double>();
    info.detector.config.quantile = det.at("quantile").get<double>();
    info.detector.config.margin = det.at("margin").get<double>();
    info.detector.config.alpha = det.at("alpha").get<double>();

    Model model = info.build_model();
    std::uint32_t count = read_u32(in, "parameter count");
    if (count != model.params().size())
        throw ParseError("checkpoint: parameter count disagrees with architecture");
    for (std::uint32_t i = 0; i < count; ++i) {
        std::uint32_t name_len = read_u32(in, "parameter name length");
        std::string name(name_len, '\0');
        if (!in.read(name.data(), name_len))
            throw ParseError("checkpoint: truncated parameter name");
        if (name != model.params().names[i])
            throw ParseError("checkpoint: unexpected parameter " + name);
        std::uint32_t rank = read_u32(in, "parameter rank");
        std::vector<std::size_t> shape(rank);
        for (std::uint32_t d = 0; d < rank; ++d)
            shape[d] = read_u32(in, "parameter dim");
        Tensor& value = model.params().values[i];
        if (shape != value.shape())
            throw ParseError("checkpoint: shape mismatch for " + name);
        if (!in.read(reinterpret_cast<char*>(value.data()),
                     std::streamsize(value.size() * 8)))
            throw ParseError("checkpoint: truncated data for " + name);
    }
    return {std::move(info), std::move(model)};
}

} // namespace skod
