#include <bit>
#include <fstream>

#include <json.hpp>

#include "subreg/problems.hpp"

namespace subreg {

namespace fs = std::filesystem;
using nlohmann::json;

static_assert(std::endian::native == std::endian::little, "payload files are little-endian float64");

namespace {

void write_doubles(const fs::path& path, const std::vector<double>& data) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorKind::IoError, "cannot open " + path.string() + " for writing");
    out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size() * sizeof(double)));
    if (!out) fail(ErrorKind::IoError, "write failed: " + path.string());
}

std::vector<double> read_doubles(const fs::path& path, std::size_t expected) {
    if (!fs::exists(path)) fail(ErrorKind::TruncatedPayload, "missing payload " + path.string());
    const auto bytes = fs::file_size(path);
    if (bytes != expected * sizeof(double))
        fail(ErrorKind::TruncatedPayload, path.filename().string() + ": expected " + std::to_string(expected * sizeof(double)) +
                                              " bytes, found " + std::to_string(bytes));
    std::vector<double> data(expected);
    std::ifstream in(path, std::ios::binary);
    in.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(bytes));
    if (!in) fail(ErrorKind::IoError, "read failed: " + path.string());
    return data;
}

}  // namespace

void write_dataset(const SubspaceDataset& ds, const fs::path& dir) {
    require(ds.size() >= 1 && static_cast<Index>(ds.targets.size()) == ds.size(), "write_dataset: empty or inconsistent dataset");
    const Index rows = ds.targets.front().rows(), cols = ds.targets.front().cols();
    for (const auto& t : ds.targets) require(t.rows() == rows && t.cols() == cols, "write_dataset: ragged targets");
    fs::create_directories(dir);

    json meta = {
        {"magic", kDatasetMagic},
        {"format_version", kDatasetFormatVersion},
        {"preset", ds.preset},
        {"seed", ds.seed},
        {"n_samples", ds.size()},
        {"channels", ds.channels},
        {"feature_len", ds.features.cols()},
        {"target_rows", rows},
        {"target_cols", cols},
        {"grid", {{"extents", ds.grid.extents}, {"lo", ds.grid.lo}, {"hi", ds.grid.hi}}},
    };
    std::ofstream(dir / "meta.json") << meta.dump(2) << "\n";

    std::vector<double> feat;
    feat.reserve(static_cast<std::size_t>(ds.features.size()));
    for (Index s = 0; s < ds.size(); ++s)
        for (Index j = 0; j < ds.features.cols(); ++j) feat.push_back(ds.features(s, j));
    write_doubles(dir / "features.f64", feat);

    std::vector<double> targ;
    targ.reserve(static_cast<std::size_t>(ds.size() * rows * cols));
    for (const auto& t : ds.targets)
        for (Index i = 0; i < rows; ++i)
            for (Index j = 0; j < cols; ++j) targ.push_back(t(i, j));
    write_doubles(dir / "targets.f64", targ);
}

SubspaceDataset read_dataset(const fs::path& dir) {
    std::ifstream in(dir / "meta.json");
    if (!in) fail(ErrorKind::IoError, "missing " + (dir / "meta.json").string());
    json meta;
    try {
        meta = json::parse(in);
    } catch (const json::exception& e) {
        fail(ErrorKind::CorruptHeader, std::string("meta.json: ") + e.what());
    }
    if (!meta.is_object() || meta.value("magic", std::string{}) != kDatasetMagic)
        fail(ErrorKind::CorruptHeader, "meta.json: bad magic");
    if (!meta.contains("format_version") || meta["format_version"] != kDatasetFormatVersion)
        fail(ErrorKind::FormatVersionMismatch, "meta.json: unsupported format version");

    SubspaceDataset ds;
    Index n = 0, feat_len = 0, rows = 0, cols = 0;
    try {
        ds.preset = meta.at("preset").get<std::string>();
        ds.seed = meta.at("seed").get<std::uint64_t>();
        n = meta.at("n_samples").get<Index>();
        ds.channels = meta.at("channels").get<Index>();
        feat_len = meta.at("feature_len").get<Index>();
        rows = meta.at("target_rows").get<Index>();
        cols = meta.at("target_cols").get<Index>();
        ds.grid.extents = meta.at("grid").at("extents").get<std::vector<Index>>();
        ds.grid.lo = meta.at("grid").at("lo").get<std::vector<double>>();
        ds.grid.hi = meta.at("grid").at("hi").get<std::vector<double>>();
        ds.grid.validate();
    } catch (const json::exception& e) {
        fail(ErrorKind::CorruptHeader, std::string("meta.json: ") + e.what());
    } catch (const Error& e) {
        fail(ErrorKind::CorruptHeader, std::string("meta.json: ") + e.what());
    }
    if (n < 1 || rows < 1 || cols < 1 || feat_len != ds.channels * ds.grid.size())
        fail(ErrorKind::CorruptHeader, "meta.json: inconsistent sizes");

    const auto feat = read_doubles(dir / "features.f64", static_cast<std::size_t>(n * feat_len));
    const auto targ = read_doubles(dir / "targets.f64", static_cast<std::size_t>(n * rows * cols));
    ds.features = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(feat.data(), n, feat_len);
    for (Index s = 0; s < n; ++s)
        ds.targets.push_back(Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
            targ.data() + s * rows * cols, rows, cols));
    return ds;
}

}  // namespace subreg
