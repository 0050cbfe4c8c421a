#include <fstream>

#include <json.hpp>

#include "subreg/learn.hpp"

namespace subreg {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::string_view kModelMagic = "subreg-model";
constexpr int kModelFormatVersion = 1;

std::vector<double> to_std(const Vector& v) { return {v.data(), v.data() + v.size()}; }

Vector from_std(const std::vector<double>& v) { return Eigen::Map<const Vector>(v.data(), static_cast<Index>(v.size())); }

}  // namespace

void save_model(const RegressorModel& model, const TrainConfig& config, const fs::path& dir) {
    fs::create_directories(dir);
    const auto& enc = model.encoder;
    json meta = {
        {"magic", kModelMagic},
        {"format_version", kModelFormatVersion},
        {"widths", model.widths},
        {"n", model.n},
        {"r", model.r},
        {"normalize_columns", model.normalize_columns},
        {"encoder",
         {{"mode", enc.mode == EncoderMode::Spectral ? "spectral" : "raw"},
          {"modes", enc.modes},
          {"downsample", enc.downsample},
          {"channels", enc.channels},
          {"grid", {{"extents", enc.grid.extents}, {"lo", enc.grid.lo}, {"hi", enc.grid.hi}}},
          {"mean", to_std(enc.mean)},
          {"scale", to_std(enc.scale)}}},
        {"config",
         {{"loss", loss_name(config.loss)},
          {"r", config.r},
          {"k", config.k},
          {"z2_index", config.z2_index},
          {"batch_size", config.batch_size},
          {"epochs", config.epochs},
          {"lr", config.lr},
          {"decay", config.decay},
          {"decay_interval", config.decay_interval},
          {"weight_decay", config.weight_decay},
          {"seed", config.seed},
          {"hidden", config.hidden}}},
    };
    std::ofstream(dir / "meta.json") << meta.dump(2) << "\n";
    std::ofstream out(dir / "params.f64", std::ios::binary | std::ios::trunc);
    out.write(reinterpret_cast<const char*>(model.params.data()), static_cast<std::streamsize>(model.params.size() * sizeof(double)));
    if (!out) fail(ErrorKind::IoError, "cannot write " + (dir / "params.f64").string());
}

RegressorModel load_model(const fs::path& dir) {
    std::ifstream in(dir / "meta.json");
    if (!in) fail(ErrorKind::IoError, "missing checkpoint " + (dir / "meta.json").string());
    RegressorModel m;
    try {
        const json meta = json::parse(in);
        if (meta.value("magic", std::string{}) != kModelMagic) fail(ErrorKind::CorruptHeader, "checkpoint: bad magic");
        if (meta.value("format_version", -1) != kModelFormatVersion)
            fail(ErrorKind::FormatVersionMismatch, "checkpoint: unsupported format version");
        m.widths = meta.at("widths").get<std::vector<Index>>();
        m.n = meta.at("n").get<Index>();
        m.r = meta.at("r").get<Index>();
        m.normalize_columns = meta.at("normalize_columns").get<bool>();
        const json& e = meta.at("encoder");
        m.encoder.mode = e.at("mode").get<std::string>() == "spectral" ? EncoderMode::Spectral : EncoderMode::RawDownsample;
        m.encoder.modes = e.at("modes").get<Index>();
        m.encoder.downsample = e.at("downsample").get<Index>();
        m.encoder.channels = e.at("channels").get<Index>();
        m.encoder.grid.extents = e.at("grid").at("extents").get<std::vector<Index>>();
        m.encoder.grid.lo = e.at("grid").at("lo").get<std::vector<double>>();
        m.encoder.grid.hi = e.at("grid").at("hi").get<std::vector<double>>();
        m.encoder.mean = from_std(e.at("mean").get<std::vector<double>>());
        m.encoder.scale = from_std(e.at("scale").get<std::vector<double>>());
    } catch (const json::exception& ex) {
        fail(ErrorKind::CorruptHeader, std::string("checkpoint meta.json: ") + ex.what());
    }
    const auto expected = static_cast<std::uintmax_t>(m.param_count()) * sizeof(double);
    const fs::path pfile = dir / "params.f64";
    if (!fs::exists(pfile) || fs::file_size(pfile) != expected) fail(ErrorKind::TruncatedPayload, "checkpoint: params.f64 size mismatch");
    m.params.resize(m.param_count());
    std::ifstream pin(pfile, std::ios::binary);
    pin.read(reinterpret_cast<char*>(m.params.data()), static_cast<std::streamsize>(expected));
    return m;
}

}  // namespace subreg
