#include "subreg/cli.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>

#include "subreg/eigencount.hpp"
#include "subreg/learn.hpp"
#include "subreg/parallel.hpp"
#include "subreg/solvers.hpp"

namespace subreg {

namespace fs = std::filesystem;
using nlohmann::json;

int exit_code_for(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::InvalidArgument:
        case ErrorKind::ConfigError:
        case ErrorKind::IoError:
        case ErrorKind::FormatVersionMismatch:
        case ErrorKind::CorruptHeader:
        case ErrorKind::TruncatedPayload: return ExitUserError;
        default: return ExitNumerical;
    }
}

std::uint64_t fnv1a(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string config_hash(const json& config) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(config.dump())));
    return buf;
}

namespace {

[[noreturn]] void config_error(const std::string& msg) { fail(ErrorKind::ConfigError, msg); }

// ---------------------------------------------------------------- schema

enum class Kind { Int, UInt, Number, Bool, String, IntList, StringList, IntOrList };

struct Field {
    std::string name;
    Kind kind;
    json fallback;  // null: required
};

using Schema = std::vector<Field>;

Schema with_common(Schema s) {
    s.insert(s.begin(), {{"schema_version", Kind::Int, nullptr}, {"seed", Kind::UInt, 0}});
    return s;
}

const Schema* find_schema(std::string_view command) {
    static const std::map<std::string, Schema, std::less<>> schemas = {
        {"gen", with_common({{"preset", Kind::String, nullptr},
                             {"n_samples", Kind::Int, 50},
                             {"m_target", Kind::Int, 10},
                             {"grid", Kind::Int, 0},
                             {"omega", Kind::Number, 0.9},
                             {"nt", Kind::Int, 64},
                             {"t_end", Kind::Number, 0.1},
                             {"n_shapes", Kind::Int, 10}})},
        {"train", with_common({{"dataset", Kind::String, nullptr},
                               {"test_dataset", Kind::String, ""},
                               {"loss", Kind::String, "L1"},
                               {"r", Kind::IntOrList, 4},
                               {"k", Kind::Int, 0},
                               {"z2_index", Kind::Int, 0},
                               {"batch_size", Kind::Int, 20},
                               {"epochs", Kind::Int, 300},
                               {"lr", Kind::Number, 1e-3},
                               {"decay", Kind::Number, 0.5},
                               {"decay_interval", Kind::Int, 100},
                               {"weight_decay", Kind::Number, 1e-4},
                               {"beta1", Kind::Number, 0.9},
                               {"beta2", Kind::Number, 0.99},
                               {"hidden", Kind::IntList, json::array({256, 256, 256})},
                               {"encoder", Kind::String, "spectral"},
                               {"encoder_param", Kind::Int, 12}})},
        {"eval", with_common({{"dataset", Kind::String, nullptr},
                              {"checkpoints", Kind::StringList, json::array()},
                              {"oracle", Kind::Bool, false},
                              {"interpolation", Kind::Bool, false},
                              {"train_dataset", Kind::String, ""},
                              {"k_nn", Kind::Int, 5},
                              {"metric", Kind::String, "rel_subspace"},
                              {"k", Kind::Int, 0}})},
        {"count", with_common({{"k", Kind::IntOrList, nullptr},
                               {"D", Kind::IntOrList, nullptr},
                               {"mc", Kind::Int, 0},
                               {"greedy", Kind::Int, 0}})},
        {"solve", with_common({{"dataset", Kind::String, nullptr},
                               {"mode", Kind::String, "cg"},
                               {"sources", Kind::StringList, json::array({"none", "exact"})},
                               {"sizes", Kind::IntList, json::array({10, 20, 30, 40})},
                               {"checkpoint", Kind::String, ""},
                               {"train_dataset", Kind::String, ""},
                               {"k_nn", Kind::Int, 5},
                               {"samples", Kind::Int, 0},
                               {"tol", Kind::Number, 1e-8},
                               {"maxit", Kind::Int, 10000},
                               {"omega", Kind::Number, 0.9},
                               {"power_iters", Kind::Int, 200},
                               {"nt", Kind::Int, 64},
                               {"t_end", Kind::Number, 0.1}})},
        {"control", with_common({{"dataset", Kind::String, nullptr},
                                 {"sources", Kind::StringList, json::array({"none", "exact"})},
                                 {"sizes", Kind::IntList, json::array({10})},
                                 {"checkpoint", Kind::String, ""},
                                 {"train_dataset", Kind::String, ""},
                                 {"k_nn", Kind::Int, 5},
                                 {"samples", Kind::Int, 0},
                                 {"lambda", Kind::Number, 1.0},
                                 {"t_end", Kind::Number, 5.0},
                                 {"nt", Kind::Int, 128},
                                 {"observe", Kind::Bool, true}})},
        {"report", with_common({{"inputs", Kind::StringList, nullptr}})},
    };
    const auto it = schemas.find(command);
    return it == schemas.end() ? nullptr : &it->second;
}

bool is_int_list(const json& v) {
    return v.is_array() && std::all_of(v.begin(), v.end(), [](const json& e) { return e.is_number_integer(); });
}

bool type_ok(Kind kind, const json& v) {
    switch (kind) {
        case Kind::Int: return v.is_number_integer();
        case Kind::UInt: return v.is_number_unsigned() || (v.is_number_integer() && v.get<std::int64_t>() >= 0);
        case Kind::Number: return v.is_number();
        case Kind::Bool: return v.is_boolean();
        case Kind::String: return v.is_string();
        case Kind::IntList: return is_int_list(v);
        case Kind::StringList:
            return v.is_array() && std::all_of(v.begin(), v.end(), [](const json& e) { return e.is_string(); });
        case Kind::IntOrList: return v.is_number_integer() || (is_int_list(v) && !v.empty());
    }
    return false;
}

bool is_scalar(Kind kind) { return kind != Kind::IntList && kind != Kind::StringList; }

const Schema& schema_or_throw(std::string_view command) {
    const Schema* s = find_schema(command);
    if (!s) config_error("unknown command '" + std::string(command) + "'");
    return *s;
}

}  // namespace

json validate_config(std::string_view command, const json& config) {
    const Schema& schema = schema_or_throw(command);
    if (!config.is_object()) config_error("config must be a JSON object");
    for (const auto& [key, value] : config.items()) {
        (void)value;
        if (std::none_of(schema.begin(), schema.end(), [&](const Field& f) { return f.name == key; }))
            config_error("unknown config key '" + key + "'");
    }
    json out = json::object();
    for (const Field& f : schema) {
        if (!config.contains(f.name)) {
            if (f.fallback.is_null()) config_error("missing config key '" + f.name + "'");
            out[f.name] = f.fallback;
            continue;
        }
        const json& v = config.at(f.name);
        if (!type_ok(f.kind, v)) config_error("config key '" + f.name + "' has the wrong type");
        out[f.name] = (f.kind == Kind::IntOrList && !v.is_array()) ? json::array({v}) : v;
        if (f.kind == Kind::Number) out[f.name] = v.get<double>();
    }
    if (out["schema_version"].get<std::int64_t>() != kConfigSchemaVersion)
        config_error("unsupported schema_version " + out["schema_version"].dump());
    return out;
}

void apply_overrides(std::string_view command, json& config, const std::vector<std::string>& extras) {
    const Schema& schema = schema_or_throw(command);
    for (std::size_t i = 0; i < extras.size(); ++i) {
        std::string token = extras[i];
        if (token.rfind("--", 0) != 0) config_error("unexpected argument '" + token + "'");
        token = token.substr(2);
        std::string value;
        if (const auto eq = token.find('='); eq != std::string::npos) {
            value = token.substr(eq + 1);
            token = token.substr(0, eq);
        } else {
            if (i + 1 >= extras.size()) config_error("override --" + token + " needs a value");
            value = extras[++i];
        }
        const auto f = std::find_if(schema.begin(), schema.end(), [&](const Field& x) { return x.name == token; });
        if (f == schema.end() || !is_scalar(f->kind) || f->name == "schema_version")
            config_error("no overridable scalar '" + token + "'");
        json parsed;
        if (f->kind == Kind::String) {
            parsed = value;
        } else {
            parsed = json::parse(value, nullptr, false);
            if (parsed.is_discarded() || !parsed.is_primitive()) config_error("bad value for --" + token);
        }
        config[token] = parsed;
    }
}

namespace {

// ---------------------------------------------------------------- outputs

std::string cell(double v) {
    if (!std::isfinite(v)) return "nan";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string cell(Index v) { return std::to_string(v); }
std::string cell(std::size_t v) { return std::to_string(v); }

std::string utc_now() {
    const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

class Csv {
public:
    Csv(const fs::path& path, const std::string& hash, const std::vector<std::string>& header) : f_(path) {
        if (!f_) fail(ErrorKind::IoError, "cannot write " + path.string());
        f_ << "# config_hash=" << hash << '\n';
        row(header);
    }

    void row(const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) f_ << (i ? "," : "") << cells[i];
        f_ << '\n';
    }

private:
    std::ofstream f_;
};

class DirLock {
public:
    explicit DirLock(const fs::path& dir) : path_(dir / ".subreg.lock") {
        fd_ = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
        if (fd_ < 0) config_error("output directory is locked: " + path_.string());
    }
    ~DirLock() {
        ::close(fd_);
        std::error_code ec;
        fs::remove(path_, ec);
    }
    DirLock(const DirLock&) = delete;
    DirLock& operator=(const DirLock&) = delete;

private:
    fs::path path_;
    int fd_ = -1;
};

struct Run {
    std::string command;
    json config;
    std::string hash;
    fs::path out;
    std::ostream& data;
    std::ostream& log;
    std::vector<std::string> files;

    Csv csv(const std::string& name, const std::vector<std::string>& header) {
        files.push_back(name);
        return Csv(out / name, hash, header);
    }

    void add_tree(const fs::path& dir) {
        std::vector<std::string> found;
        for (const auto& e : fs::recursive_directory_iterator(dir))
            if (e.is_regular_file()) found.push_back(fs::relative(e.path(), out).generic_string());
        std::sort(found.begin(), found.end());
        files.insert(files.end(), found.begin(), found.end());
    }

    void info(const std::string& event, json fields = json::object()) {
        fields["level"] = "info";
        fields["command"] = command;
        fields["event"] = event;
        log << fields.dump() << '\n';
    }

    std::uint64_t seed() const { return config["seed"].get<std::uint64_t>(); }
    Index integer(const char* key) const { return config[key].get<Index>(); }
    double number(const char* key) const { return config[key].get<double>(); }
    std::string text(const char* key) const { return config[key].get<std::string>(); }
};

Index sample_limit(const Run& run, const SubspaceDataset& ds) {
    const Index s = run.integer("samples");
    if (s < 0) config_error("samples must be non-negative");
    return s == 0 ? ds.size() : std::min(s, ds.size());
}

std::vector<Index> positive_list(const json& v, const char* what) {
    std::vector<Index> out;
    for (const json& e : v) {
        const Index x = e.get<Index>();
        if (x < 1) config_error(std::string(what) + " entries must be positive");
        out.push_back(x);
    }
    return out;
}

// ---------------------------------------------------------------- subspace sources

enum class Source { None, Exact, Interpolated, Learned, Global };

Source parse_source(const std::string& s) {
    static const std::map<std::string, Source> names = {{"none", Source::None},
                                                        {"exact", Source::Exact},
                                                        {"interpolated", Source::Interpolated},
                                                        {"learned", Source::Learned},
                                                        {"global", Source::Global}};
    const auto it = names.find(s);
    if (it == names.end()) config_error("unknown subspace source '" + s + "'");
    return it->second;
}

std::vector<std::pair<std::string, Source>> parse_sources(const json& v) {
    std::vector<std::pair<std::string, Source>> out;
    for (const json& e : v) out.emplace_back(e.get<std::string>(), parse_source(e.get<std::string>()));
    if (out.empty()) config_error("sources must not be empty");
    return out;
}

/// Learned and interpolated bases for the samples of a dataset.
class Predictions {
public:
    Predictions(const Run& run, const SubspaceDataset& ds, const std::vector<std::pair<std::string, Source>>& sources)
        : ds_(ds) {
        const auto wants = [&](Source s) {
            return std::any_of(sources.begin(), sources.end(), [&](const auto& p) { return p.second == s; });
        };
        if (wants(Source::Learned)) {
            if (run.text("checkpoint").empty()) config_error("source 'learned' needs a checkpoint");
            model_ = load_model(run.text("checkpoint"));
        }
        if (wants(Source::Interpolated) || wants(Source::Global)) {
            if (run.text("train_dataset").empty()) config_error("this source needs train_dataset");
            train_ = read_dataset(run.text("train_dataset"));
            if (train_->preset != ds.preset || !(train_->grid == ds.grid)) config_error("train_dataset does not match dataset");
        }
        if (wants(Source::Interpolated)) {
            encoder_ = make_encoder(*train_, EncoderMode::Spectral, 12);
            train_inputs_ = encoder_.encode_rows(train_->features);
            for (const Matrix& t : train_->targets) train_targets_.push_back(OrthoBasis::from_orthonormal(t, 1e-8));
            k_nn_ = std::min(run.integer("k_nn"), train_->size());
        }
    }

    Matrix learned(Index s) const {
        return OrthoBasis::orthonormalize_householder(predict(*model_, ds_.features.row(s).transpose())).matrix();
    }

    Matrix interpolated(Index s) const {
        const Vector q = encoder_.encode(ds_.features.row(s).transpose());
        return interpolate_normal_coords(train_inputs_, train_targets_, q, k_nn_).matrix();
    }

    const SubspaceDataset& train_set() const { return *train_; }

private:
    const SubspaceDataset& ds_;
    std::optional<RegressorModel> model_;
    std::optional<SubspaceDataset> train_;
    FeatureEncoder encoder_;
    Matrix train_inputs_;
    std::vector<OrthoBasis> train_targets_;
    Index k_nn_ = 1;
};

// ---------------------------------------------------------------- commands

void cmd_gen(Run& run) {
    GenOptions g;
    g.dataset.preset = parse_preset(run.text("preset"));
    g.dataset.n_samples = run.integer("n_samples");
    g.dataset.m_target = run.integer("m_target");
    g.dataset.seed = run.seed();
    g.dataset.grid_n = run.integer("grid");
    g.dataset.omega = run.number("omega");
    g.burgers.nt = run.integer("nt");
    g.burgers.t_end = run.number("t_end");
    g.n_shapes = run.integer("n_shapes");
    if (g.dataset.n_samples < 1 || g.dataset.m_target < 1 || g.dataset.grid_n < 0)
        config_error("n_samples and m_target must be positive, grid non-negative");
    const SubspaceDataset ds = generate_dataset(g);
    write_dataset(ds, run.out);
    for (const char* f : {"meta.json", "features.f64", "targets.f64"}) run.files.emplace_back(f);
    run.info("dataset", {{"preset", ds.preset}, {"samples", ds.size()}, {"target_dim", ds.target_dim()}});
}

EncoderMode parse_encoder(const std::string& s) {
    if (s == "spectral") return EncoderMode::Spectral;
    if (s == "raw") return EncoderMode::RawDownsample;
    config_error("unknown encoder '" + s + "'");
}

void cmd_train(Run& run) {
    const SubspaceDataset ds = read_dataset(run.text("dataset"));
    std::optional<SubspaceDataset> test;
    if (!run.text("test_dataset").empty()) test = read_dataset(run.text("test_dataset"));

    TrainConfig base;
    base.loss = parse_loss(run.text("loss"));
    base.k = run.integer("k");
    base.z2_index = run.integer("z2_index");
    base.batch_size = run.integer("batch_size");
    base.epochs = run.integer("epochs");
    base.lr = run.number("lr");
    base.decay = run.number("decay");
    base.decay_interval = run.integer("decay_interval");
    base.weight_decay = run.number("weight_decay");
    base.beta1 = run.number("beta1");
    base.beta2 = run.number("beta2");
    base.seed = run.seed();
    base.hidden = positive_list(run.config["hidden"], "hidden");
    base.encoder = parse_encoder(run.text("encoder"));
    base.encoder_param = run.integer("encoder_param");

    Csv history = run.csv("history.csv", {"r", "epoch", "train_loss", "test_loss", "test_metric"});
    for (const Index r : positive_list(run.config["r"], "r")) {
        TrainConfig tc = base;
        tc.r = r;
        const TrainResult res = train(ds, tc, test ? &*test : nullptr);
        for (const EpochRecord& e : res.history)
            history.row({cell(r), cell(e.epoch), cell(e.train_loss), cell(e.test_loss), cell(e.test_metric)});
        const fs::path dir = run.out / ("model_r" + std::to_string(r));
        fs::create_directories(dir);
        save_model(res.model, tc, dir);
        run.add_tree(dir);
        const EpochRecord& last = res.history.back();
        run.info("trained", {{"r", r}, {"train_loss", last.train_loss}, {"test_metric", last.test_metric}});
    }
}

void cmd_eval(Run& run) {
    const SubspaceDataset ds = read_dataset(run.text("dataset"));
    const std::string metric_name = run.text("metric");
    Metric metric;
    if (metric_name == "rel_subspace") metric = Metric::RelSubspace;
    else if (metric_name == "z2") metric = Metric::Z2PerVector;
    else config_error("unknown metric '" + metric_name + "'");

    struct Named {
        std::string name;
        Index r;
        Predictor predictor;
    };
    std::vector<Named> predictors;
    std::vector<RegressorModel> models;
    for (const json& c : run.config["checkpoints"]) models.push_back(load_model(c.get<std::string>()));
    std::optional<Predictions> interp;
    if (run.config["interpolation"].get<bool>())
        interp.emplace(run, ds, std::vector<std::pair<std::string, Source>>{{"interpolated", Source::Interpolated}});

    if (run.config["oracle"].get<bool>())
        predictors.push_back({"oracle", ds.target_dim(), [&](Index s) { return ds.targets[static_cast<std::size_t>(s)]; }});
    if (interp)
        predictors.push_back({"interpolation", ds.target_dim(), [&](Index s) { return interp->interpolated(s); }});
    for (std::size_t i = 0; i < models.size(); ++i) {
        const RegressorModel& m = models[i];
        predictors.push_back({run.config["checkpoints"][i].get<std::string>(), m.r,
                              [&m, &ds](Index s) { return predict(m, ds.features.row(s).transpose()); }});
    }
    if (predictors.empty()) config_error("eval needs checkpoints, oracle or interpolation");

    Csv rows = run.csv("eval.csv", {"predictor", "r", "sample", "value"});
    Csv summary = run.csv("eval_summary.csv", {"predictor", "r", "mean", "worst", "samples"});
    for (const Named& p : predictors) {
        const EvalSummary e = evaluate(p.predictor, ds, metric, run.integer("k"));
        for (std::size_t s = 0; s < e.per_sample.size(); ++s)
            rows.row({p.name, cell(p.r), cell(s), cell(e.per_sample[s])});
        summary.row({p.name, cell(p.r), cell(e.mean), cell(e.worst), cell(e.per_sample.size())});
        run.info("evaluated", {{"predictor", p.name}, {"mean", e.mean}, {"worst", e.worst}});
    }
}

constexpr Index kCountLimit = 1000000;
constexpr Index kDimLimit = 64;

void cmd_count(Run& run) {
    const std::vector<Index> ks = positive_list(run.config["k"], "k");
    const std::vector<Index> ds = positive_list(run.config["D"], "D");
    const Index mc = run.integer("mc");
    const Index greedy = run.integer("greedy");
    if (mc < 0 || greedy < 0) config_error("mc and greedy must be non-negative");
    if (greedy > 0 && mc == 0) config_error("greedy needs mc > 0");
    for (const Index k : ks)
        if (k > kCountLimit) config_error("k exceeds the overflow guard " + std::to_string(kCountLimit));
    for (const Index d : ds)
        if (d > kDimLimit) config_error("D exceeds the overflow guard " + std::to_string(kDimLimit));

    std::vector<std::string> header = {"k", "D", "exact", "tau_sum", "asymptotic"};
    if (mc > 0) {
        header.push_back("census_position");
        header.push_back("census_subspaces");
    }
    if (greedy > 0) header.push_back("greedy_" + std::to_string(greedy));
    Csv csv = run.csv("count.csv", header);

    std::uint64_t row_id = 0;
    for (const Index d : ds) {
        for (const Index k : ks) {
            const auto uk = static_cast<std::uint64_t>(k);
            const auto ud = static_cast<unsigned>(d);
            eigencount::BigInt tau_sum = 0;
            for (std::uint64_t p = 1; p <= uk; ++p) tau_sum += eigencount::tau(p, ud);
            std::vector<std::string> row = {cell(k), cell(d), eigencount::count_products_leq(uk, ud).str(), tau_sum.str(),
                                            cell(eigencount::count_asymptotic(uk, ud))};
            if (mc > 0) {
                std::mt19937_64 rng(derive_seed(run.seed(), row_id));
                const auto mcs = static_cast<std::size_t>(mc);
                row.push_back(cell(eigencount::census_position_k(ud, static_cast<std::size_t>(k), mcs, rng).size()));
                const eigencount::SubspaceCensus census = eigencount::census_subspaces(ud, static_cast<std::size_t>(k), mcs, rng);
                row.push_back(cell(census.distinct_count()));
                if (greedy > 0) row.push_back(cell(eigencount::greedy_augment(census, static_cast<std::size_t>(greedy))));
            }
            csv.row(row);
            ++row_id;
        }
    }
    run.info("counted", {{"rows", row_id}});
}

Vector random_rhs(Index n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    Vector b(n);
    for (Index i = 0; i < n; ++i) b[i] = normal(rng);
    return b;
}

SparseOperator operator_of(const SubspaceDataset& ds, Preset p, Index s) {
    std::vector<FieldSample> chans;
    for (Index c = 0; c < ds.channels; ++c) chans.push_back(ds.channel(s, c));
    return sample_operator(p, chans);
}

struct Basis {
    std::string source;
    Matrix v;
};

/// Bases to test for one sample; `exact(m)` supplies the reference space.
std::vector<Basis> bases_for(Index s, Index n, const std::vector<std::pair<std::string, Source>>& sources,
                             const std::vector<Index>& sizes, const Predictions& pred,
                             const std::function<Matrix(Index)>& exact, const std::function<Matrix(Index)>& global) {
    std::vector<Basis> out;
    for (const auto& [name, src] : sources) {
        switch (src) {
            case Source::None: out.push_back({name, Matrix(n, 0)}); break;
            case Source::Exact:
                for (const Index m : sizes) out.push_back({name, exact(m)});
                break;
            case Source::Global:
                for (const Index m : sizes) out.push_back({name, global(m)});
                break;
            case Source::Learned: out.push_back({name, pred.learned(s)}); break;
            case Source::Interpolated: out.push_back({name, pred.interpolated(s)}); break;
        }
    }
    return out;
}

void solve_cg(Run& run, const SubspaceDataset& ds, Preset preset, const std::vector<std::pair<std::string, Source>>& sources,
              const std::vector<Index>& sizes, const Predictions& pred) {
    if (!is_eigen_preset(preset)) config_error("mode cg needs an operator dataset");
    const Index count = sample_limit(run, ds);
    const double tol = run.number("tol");
    const Index maxit = run.integer("maxit");
    std::vector<std::vector<std::pair<Basis, SolverReport>>> results(static_cast<std::size_t>(count));
    parallel_for(static_cast<std::size_t>(count), [&](std::size_t s) {
        const auto si = static_cast<Index>(s);
        const SparseOperator a = operator_of(ds, preset, si);
        const Matrix& target = ds.targets[s];
        const auto exact = [&](Index m) -> Matrix {
            if (m <= target.cols() && preset != Preset::TwoGrid) return target.leftCols(m);
            return sym_eig_smallest(a, m).vectors;
        };
        const Vector b = random_rhs(a.dimension(), derive_seed(run.seed(), s));
        for (Basis& basis : bases_for(si, a.dimension(), sources, sizes, pred, exact, {})) {
            SolveResult r = deflated_cg(a, b, basis.v, tol, maxit, true);
            results[s].emplace_back(std::move(basis), std::move(r.report));
        }
    });
    Csv conv = run.csv("convergence.csv", {"sample", "source", "size", "iteration", "rel_residual"});
    Csv summary = run.csv("solve.csv", {"sample", "source", "size", "iterations", "converged"});
    for (std::size_t s = 0; s < results.size(); ++s) {
        for (const auto& [basis, rep] : results[s]) {
            for (std::size_t i = 0; i < rep.residuals.size(); ++i)
                conv.row({cell(s), basis.source, cell(basis.v.cols()), cell(i), cell(rep.residuals[i])});
            summary.row({cell(s), basis.source, cell(basis.v.cols()), cell(rep.iterations), rep.converged ? "1" : "0"});
        }
    }
    run.info("solved", {{"samples", count}});
}

void solve_twogrid(Run& run, const SubspaceDataset& ds, Preset preset,
                   const std::vector<std::pair<std::string, Source>>& sources, const std::vector<Index>& sizes,
                   const Predictions& pred) {
    if (!is_eigen_preset(preset)) config_error("mode twogrid needs an operator dataset");
    const Index count = sample_limit(run, ds);
    const double omega = run.number("omega");
    const Index iters = run.integer("power_iters");
    std::vector<std::vector<std::pair<std::string, std::pair<Index, double>>>> results(static_cast<std::size_t>(count));
    parallel_for(static_cast<std::size_t>(count), [&](std::size_t s) {
        const auto si = static_cast<Index>(s);
        const SparseOperator a = operator_of(ds, preset, si);
        const Matrix& target = ds.targets[s];
        const auto exact = [&](Index m) -> Matrix {
            if (m <= target.cols() && preset == Preset::TwoGrid) return target.leftCols(m);
            return jacobi_leading_space(a, m, omega);
        };
        for (const Basis& basis : bases_for(si, a.dimension(), sources, sizes, pred, exact, {}))
            results[s].push_back({basis.source, {basis.v.cols(), two_grid_rho(a, basis.v, omega, iters)}});
    });
    Csv csv = run.csv("rho.csv", {"sample", "source", "size", "rho"});
    for (std::size_t s = 0; s < results.size(); ++s)
        for (const auto& [src, r] : results[s]) csv.row({cell(s), src, cell(r.first), cell(r.second)});
    run.info("solved", {{"samples", count}});
}

Matrix pooled_pod(const SubspaceDataset& train_set, const BurgersOptions& opts, Index m) {
    std::vector<SnapshotMatrix> runs(static_cast<std::size_t>(train_set.size()));
    parallel_for(runs.size(), [&](std::size_t s) {
        const auto si = static_cast<Index>(s);
        runs[s] = burgers_integrate(train_set.channel(si, 0), train_set.channel(si, 1), opts);
    });
    SnapshotMatrix pooled;
    const Index per = runs.front().snapshots();
    pooled.values.resize(runs.front().space_dim(), per * static_cast<Index>(runs.size()));
    pooled.weights.resize(pooled.values.cols());
    for (std::size_t s = 0; s < runs.size(); ++s) {
        pooled.values.middleCols(static_cast<Index>(s) * per, per) = runs[s].values;
        pooled.weights.segment(static_cast<Index>(s) * per, per) = runs[s].weights;
    }
    return pod_basis(pooled, m).basis;
}

void solve_rom(Run& run, const SubspaceDataset& ds, Preset preset, const std::vector<std::pair<std::string, Source>>& sources,
               const std::vector<Index>& sizes, const Predictions& pred) {
    if (preset != Preset::Burgers) config_error("mode rom needs a burgers dataset");
    const Index count = sample_limit(run, ds);
    BurgersOptions opts;
    opts.nt = run.integer("nt");
    opts.t_end = run.number("t_end");
    const bool wants_global =
        std::any_of(sources.begin(), sources.end(), [](const auto& p) { return p.second == Source::Global; });
    Matrix global;
    if (wants_global) global = pooled_pod(pred.train_set(), opts, *std::max_element(sizes.begin(), sizes.end()));

    std::vector<std::vector<std::pair<std::string, std::pair<Index, double>>>> results(static_cast<std::size_t>(count));
    parallel_for(static_cast<std::size_t>(count), [&](std::size_t s) {
        const auto si = static_cast<Index>(s);
        const FieldSample nu = ds.channel(si, 0), u0 = ds.channel(si, 1);
        const Matrix& target = ds.targets[s];
        const auto exact = [&](Index m) -> Matrix {
            require(m <= target.cols(), "rom: exact size exceeds the stored POD dimension");
            return target.leftCols(m);
        };
        const auto glob = [&](Index m) -> Matrix { return global.leftCols(m); };
        const SnapshotMatrix reference = burgers_integrate(nu, u0, opts);
        for (const Basis& basis : bases_for(si, ds.grid.size(), sources, sizes, pred, exact, glob)) {
            const SnapshotMatrix rom = pod_rom_integrate(nu, u0, RomBasis(basis.v, RomSource::Predicted), opts);
            results[s].push_back({basis.source, {basis.v.cols(), trajectory_error(rom, reference)}});
        }
    });
    Csv csv = run.csv("rom.csv", {"sample", "source", "size", "error"});
    for (std::size_t s = 0; s < results.size(); ++s)
        for (const auto& [src, r] : results[s]) csv.row({cell(s), src, cell(r.first), cell(r.second)});
    run.info("solved", {{"samples", count}});
}

void cmd_solve(Run& run) {
    const SubspaceDataset ds = read_dataset(run.text("dataset"));
    const Preset preset = parse_preset(ds.preset);
    const auto sources = parse_sources(run.config["sources"]);
    const std::vector<Index> sizes = positive_list(run.config["sizes"], "sizes");
    const Predictions pred(run, ds, sources);
    const std::string mode = run.text("mode");
    if (mode == "cg") solve_cg(run, ds, preset, sources, sizes, pred);
    else if (mode == "twogrid") solve_twogrid(run, ds, preset, sources, sizes, pred);
    else if (mode == "rom") solve_rom(run, ds, preset, sources, sizes, pred);
    else config_error("unknown solve mode '" + mode + "'");
}

void cmd_control(Run& run) {
    const SubspaceDataset ds = read_dataset(run.text("dataset"));
    if (ds.preset != preset_name(Preset::Control)) config_error("control needs a control dataset");
    const auto sources = parse_sources(run.config["sources"]);
    for (const auto& p : sources)
        if (p.second == Source::Global) config_error("source 'global' is only available for rom");
    const std::vector<Index> sizes = positive_list(run.config["sizes"], "sizes");
    const Predictions pred(run, ds, sources);
    const Index count = sample_limit(run, ds);
    const bool observe = run.config["observe"].get<bool>();
    LqrOptions opts;
    opts.lambda = run.number("lambda");
    opts.t_end = run.number("t_end");
    opts.nt = run.integer("nt");

    struct Row {
        std::string source;
        Index size;
        LqrResult res;
    };
    std::vector<std::vector<Row>> results(static_cast<std::size_t>(count));
    parallel_for(static_cast<std::size_t>(count), [&](std::size_t s) {
        const auto si = static_cast<Index>(s);
        HeatControlSystem sys = control_system_of(ds, si);
        if (!observe) sys.psi.setZero();
        const Matrix& target = ds.targets[s];
        const auto exact = [&](Index m) -> Matrix {
            require(m <= target.cols(), "control: exact size exceeds the stored basis dimension");
            return target.leftCols(m);
        };
        for (const Basis& basis : bases_for(si, sys.state_dim(), sources, sizes, pred, exact, {})) {
            if (basis.v.cols() == 0) results[s].push_back({basis.source, sys.state_dim(), lqr_solve(sys, opts)});
            else results[s].push_back({basis.source, basis.v.cols(), lqr_solve(sys, opts, basis.v)});
        }
    });
    Csv csv = run.csv("control.csv",
                      {"sample", "source", "size", "e_s", "e_o", "cost", "cost_uncontrolled", "control_norm"});
    for (std::size_t s = 0; s < results.size(); ++s) {
        for (const Row& r : results[s]) {
            const bool defined = observe && r.res.e_o_defined;
            csv.row({cell(s), r.source, cell(r.size), cell(r.res.e_s), defined ? cell(r.res.e_o) : "undefined",
                     cell(r.res.cost), cell(r.res.cost_uncontrolled), cell(r.res.controls.norm())});
        }
    }
    run.info("controlled", {{"samples", count}});
}

// ---------------------------------------------------------------- report

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    std::size_t column(const std::string& name) const {
        const auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) fail(ErrorKind::CorruptHeader, "report: missing column " + name);
        return static_cast<std::size_t>(it - header.begin());
    }
};

std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(item);
    return out;
}

CsvTable read_csv(const fs::path& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorKind::IoError, "cannot read " + path.string());
    CsvTable t;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        if (t.header.empty()) t.header = split(line);
        else t.rows.push_back(split(line));
    }
    return t;
}

struct Aggregate {
    const char* file;
    std::vector<std::string> group;
    const char* column;
    const char* statistic;  // mean, median, max, last
};

double reduce(std::vector<double> v, const std::string& stat) {
    if (v.empty()) return std::nan("");
    if (stat == "last") return v.back();
    if (stat == "max") return *std::max_element(v.begin(), v.end());
    if (stat == "median") {
        std::sort(v.begin(), v.end());
        const std::size_t n = v.size();
        return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
    }
    double sum = 0.0;
    for (double x : v) sum += x;
    return sum / static_cast<double>(v.size());
}

void cmd_report(Run& run) {
    static const std::vector<Aggregate> aggregates = {
        {"solve.csv", {"source", "size"}, "iterations", "median"},
        {"rho.csv", {"source", "size"}, "rho", "mean"},
        {"rom.csv", {"source", "size"}, "error", "mean"},
        {"control.csv", {"source", "size"}, "e_s", "mean"},
        {"control.csv", {"source", "size"}, "e_o", "mean"},
        {"eval.csv", {"predictor", "r"}, "value", "mean"},
        {"eval.csv", {"predictor", "r"}, "value", "max"},
        {"history.csv", {"r"}, "test_metric", "last"},
    };
    const std::vector<std::string> header = {"input", "table", "group", "column", "statistic", "value", "count"};
    Csv csv = run.csv("report.csv", header);
    run.data << "# config_hash=" << run.hash << '\n';
    for (std::size_t i = 0; i < header.size(); ++i) run.data << (i ? "," : "") << header[i];
    run.data << '\n';
    if (run.config["inputs"].empty()) config_error("report needs at least one input");
    for (const json& in : run.config["inputs"]) {
        const fs::path dir = in.get<std::string>();
        if (!fs::is_directory(dir)) fail(ErrorKind::IoError, "report: no directory " + dir.string());
        for (const Aggregate& agg : aggregates) {
            if (!fs::exists(dir / agg.file)) continue;
            const CsvTable t = read_csv(dir / agg.file);
            std::vector<std::size_t> gcols;
            for (const std::string& g : agg.group) gcols.push_back(t.column(g));
            const std::size_t vcol = t.column(agg.column);
            std::map<std::string, std::vector<double>> groups;
            std::vector<std::string> order;
            for (const auto& row : t.rows) {
                std::string key;
                for (std::size_t j = 0; j < gcols.size(); ++j)
                    key += (j ? ";" : "") + agg.group[j] + "=" + row.at(gcols[j]);
                if (!groups.count(key)) order.push_back(key);
                auto& bucket = groups[key];
                const std::string& v = row.at(vcol);
                if (v != "undefined" && v != "nan") bucket.push_back(std::stod(v));
            }
            for (const std::string& key : order) {
                const auto& v = groups[key];
                const std::vector<std::string> row = {dir.generic_string(), agg.file, key, agg.column, agg.statistic,
                                                      cell(reduce(v, agg.statistic)), cell(v.size())};
                csv.row(row);
                for (std::size_t i = 0; i < row.size(); ++i) run.data << (i ? "," : "") << row[i];
                run.data << '\n';
            }
        }
    }
}

void dispatch(Run& run) {
    static const std::map<std::string, void (*)(Run&)> table = {
        {"gen", cmd_gen},     {"train", cmd_train},     {"eval", cmd_eval},     {"count", cmd_count},
        {"solve", cmd_solve}, {"control", cmd_control}, {"report", cmd_report},
    };
    table.at(run.command)(run);
}

void write_manifest(const Run& run, const std::string& started) {
    json m;
    m["command"] = run.command;
    m["config_hash"] = run.hash;
    m["version"] = kVersion;
    m["config"] = run.config;
    m["started"] = started;
    m["finished"] = utc_now();
    m["files"] = run.files;
    std::ofstream f(run.out / "manifest.json");
    if (!f) fail(ErrorKind::IoError, "cannot write manifest");
    f << m.dump(2) << '\n';
}

void report_error(std::ostream& err, const std::string& kind, const std::string& message, int code) {
    err << json{{"level", "error"}, {"error", kind}, {"message", message}, {"exit_code", code}}.dump() << '\n';
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Subspace regression experiments", "subreg"};
    std::string command, config_path, out_dir = "out";
    std::optional<std::uint64_t> seed;
    app.add_option("command", command, "gen, train, eval, count, solve, control or report")->required();
    app.add_option("--config", config_path, "JSON config file")->required();
    app.add_option("--out", out_dir, "output directory");
    app.add_option("--seed", seed, "master seed");
    app.allow_extras();

    std::vector<std::string> argv(args.rbegin(), args.rend());
    try {
        app.parse(argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return ExitOk;
    } catch (const CLI::ParseError& e) {
        report_error(err, "ConfigError", e.what(), ExitUserError);
        return ExitUserError;
    }

    try {
        std::ifstream in(config_path);
        if (!in) config_error("cannot read config " + config_path);
        json raw = json::parse(in, nullptr, false);
        if (raw.is_discarded()) config_error("config is not valid JSON");
        if (!find_schema(command)) config_error("unknown command '" + command + "'");
        apply_overrides(command, raw, app.remaining());
        if (seed) raw["seed"] = *seed;
        const json config = validate_config(command, raw);

        fs::create_directories(out_dir);
        const DirLock lock(out_dir);
        Run run{command, config, config_hash(config), out_dir, out, err, {}};
        const std::string started = utc_now();
        run.info("start", {{"config_hash", run.hash}, {"threads", thread_budget()}, {"out", out_dir}});
        dispatch(run);
        write_manifest(run, started);
        run.info("done", {{"files", run.files.size()}});
        return ExitOk;
    } catch (const Error& e) {
        const int code = exit_code_for(e.kind());
        report_error(err, std::string(to_string(e.kind())), e.what(), code);
        return code;
    } catch (const json::exception& e) {
        report_error(err, "ConfigError", e.what(), ExitUserError);
        return ExitUserError;
    } catch (const std::exception& e) {
        report_error(err, "RuntimeError", e.what(), ExitNumerical);
        return ExitNumerical;
    }
}

}  // namespace subreg
