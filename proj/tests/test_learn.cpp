#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "subreg/learn.hpp"

using namespace subreg;
namespace fs = std::filesystem;

namespace {

SubspaceDataset tiny_dataset(Index samples, Index m, std::uint64_t seed, Index grid = 6) {
    DatasetOptions o;
    o.preset = Preset::Elliptic2dIso;
    o.n_samples = samples;
    o.m_target = m;
    o.seed = seed;
    o.grid_n = grid;
    return gen_eig_dataset(o);
}

Matrix gaussian(Index rows, Index cols, std::mt19937_64& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    Matrix m(rows, cols);
    for (Index i = 0; i < m.size(); ++i) m.data()[i] = normal(rng);
    return m;
}

Batch make_batch(const RegressorModel& model, const SubspaceDataset& ds, const std::vector<Index>& ids, Index k, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    Batch b;
    b.inputs.resize(model.encoder.output_length(), static_cast<Index>(ids.size()));
    for (std::size_t i = 0; i < ids.size(); ++i) {
        b.inputs.col(static_cast<Index>(i)) = model.encoder.encode(ds.features.row(ids[i]).transpose());
        b.targets.push_back(ds.targets[static_cast<std::size_t>(ids[i])].leftCols(k));
        b.z.push_back(gaussian(k, 1, rng));
    }
    return b;
}

Vector fd_gradient(RegressorModel model, const Batch& batch, LossKind kind, double h) {
    Vector g(model.params.size());
    for (Index i = 0; i < g.size(); ++i) {
        const double keep = model.params[i];
        model.params[i] = keep + h;
        const double up = batch_loss(model, batch, kind);
        model.params[i] = keep - h;
        const double down = batch_loss(model, batch, kind);
        model.params[i] = keep;
        g[i] = (up - down) / (2 * h);
    }
    return g;
}

// sets the output layer to zero weights and the given bias
void constant_head(RegressorModel& model, const Matrix& basis) {
    const Index out = model.widths.back();
    const Index in = model.widths[model.widths.size() - 2];
    const Index start = model.params.size() - out * in - out;
    model.params.segment(start, out * in).setZero();
    model.params.tail(out) = Eigen::Map<const Vector>(basis.data(), basis.size());
}

}  // namespace

TEST_CASE("encoders have fixed output length") {
    const SubspaceDataset ds = tiny_dataset(3, 2, 1, 8);
    const FeatureEncoder spectral = make_encoder(ds, EncoderMode::Spectral, 3);
    CHECK(spectral.output_length() == 9);
    CHECK(spectral.encode(ds.features.row(0).transpose()).size() == 9);
    const FeatureEncoder raw = make_encoder(ds, EncoderMode::RawDownsample, 2);
    CHECK(raw.output_length() == 16);
    const Matrix enc = spectral.encode_rows(ds.features);
    CHECK(enc.cols() == 3);
    // standardized on the training rows
    CHECK(enc.rowwise().mean().cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("spectral encoder keeps the lowest sine modes") {
    const SubspaceDataset ds = tiny_dataset(2, 1, 2, 8);
    const FeatureEncoder enc = make_encoder(ds, EncoderMode::Spectral, 3);
    const FieldSample f = ds.channel(0, 0);
    const Vector c = sine_coefficients(f);
    const Vector e = enc.encode_unscaled(ds.features.row(0).transpose());
    for (Index i = 0; i < 3; ++i)
        for (Index j = 0; j < 3; ++j) CHECK(e[i * 3 + j] == doctest::Approx(c[i * 8 + j]));
}

TEST_CASE("forward with a constant head returns the bias basis") {
    const SubspaceDataset ds = tiny_dataset(4, 2, 3);
    RegressorModel m = make_model(make_encoder(ds, EncoderMode::Spectral, 3), 36, 2, {8, 8}, 5);
    const Matrix basis = ds.targets[0];
    constant_head(m, basis);
    for (Index s = 0; s < ds.size(); ++s) CHECK((predict(m, ds.features.row(s).transpose()) - basis).norm() <= 1e-12);
}

TEST_CASE("forward normalizes columns and is deterministic") {
    const SubspaceDataset ds = tiny_dataset(4, 2, 4);
    const RegressorModel m = make_model(make_encoder(ds, EncoderMode::Spectral, 3), 36, 3, {8, 8}, 6);
    const Vector row = ds.features.row(1).transpose();
    const Matrix out = predict(m, row);
    CHECK(out.rows() == 36);
    CHECK(out.cols() == 3);
    for (Index j = 0; j < 3; ++j) CHECK(out.col(j).norm() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(predict(m, row) == out);
    CHECK(m.param_count() == mlp_param_count(m.widths));
    CHECK(m.params.size() == m.param_count());
}

TEST_CASE("model gradients agree with finite differences") {
    const SubspaceDataset ds = tiny_dataset(4, 2, 7);
    for (LossKind kind : {LossKind::L1, LossKind::L2, LossKind::L2Stab, LossKind::Z2}) {
        for (bool normalize : {true, false}) {
            const Index r = kind == LossKind::Z2 ? 1 : 2;
            const RegressorModel m = make_model(make_encoder(ds, EncoderMode::Spectral, 3), 36, r, {8, 8}, 8, normalize);
            CHECK(m.param_count() <= 1000);
            const Batch b = make_batch(m, ds, {0, 1, 2}, kind == LossKind::Z2 ? 1 : 2, 9);
            const Vector g = grad_model(m, b, kind).gradient;
            const Vector fd = fd_gradient(m, b, kind, 1e-6);
            CHECK((g - fd).norm() <= 1e-4 * fd.norm());
        }
    }
}

TEST_CASE("batch gradients are means over samples") {
    const SubspaceDataset ds = tiny_dataset(4, 2, 10);
    const RegressorModel m = make_model(make_encoder(ds, EncoderMode::Spectral, 3), 36, 2, {8}, 11);
    const Vector ga = grad_model(m, make_batch(m, ds, {0}, 2, 1), LossKind::L1).gradient;
    const Vector gb = grad_model(m, make_batch(m, ds, {1}, 2, 1), LossKind::L1).gradient;
    const Vector gaab = grad_model(m, make_batch(m, ds, {0, 0, 1}, 2, 1), LossKind::L1).gradient;
    CHECK((gaab - (2 * ga + gb) / 3).norm() <= 1e-12 * gaab.norm());
}

TEST_CASE("gradient vanishes at a memorized minimum") {
    const SubspaceDataset ds = tiny_dataset(2, 2, 12);
    RegressorModel m = make_model(make_encoder(ds, EncoderMode::Spectral, 3), 36, 2, {8, 8}, 13);
    constant_head(m, ds.targets[0]);
    const LossGradient lg = grad_model(m, make_batch(m, ds, {0}, 2, 1), LossKind::L1);
    CHECK(lg.loss <= 1e-12);
    CHECK(lg.gradient.norm() <= 1e-6);
}

TEST_CASE("training memorizes a single sample") {
    const SubspaceDataset ds = tiny_dataset(1, 2, 14);
    TrainConfig cfg;
    cfg.r = 2;
    cfg.epochs = 500;
    cfg.hidden = {32, 32};
    cfg.encoder_param = 3;
    cfg.seed = 15;
    const TrainResult res = train(ds, cfg);
    CHECK(res.history.size() == 500);
    CHECK(res.history.back().train_loss <= 1e-3);
    for (const auto& h : res.history) {
        CHECK(h.train_loss >= 0.0);
        CHECK(h.train_loss <= 2.0);
    }
}

TEST_CASE("zero learning rate keeps the loss constant") {
    const SubspaceDataset ds = tiny_dataset(6, 2, 16);
    TrainConfig cfg;
    cfg.r = 3;
    cfg.epochs = 5;
    cfg.lr = 0.0;
    cfg.batch_size = 6;
    cfg.hidden = {8};
    cfg.encoder_param = 3;
    const TrainResult res = train(ds, cfg);
    for (const auto& h : res.history) CHECK(h.train_loss == doctest::Approx(res.history.front().train_loss).epsilon(1e-13));
}

TEST_CASE("training is deterministic and records test metrics") {
    const SubspaceDataset tr = tiny_dataset(8, 2, 17);
    const SubspaceDataset te = tiny_dataset(4, 2, 18);
    TrainConfig cfg;
    cfg.loss = LossKind::L2;
    cfg.r = 3;
    cfg.epochs = 4;
    cfg.batch_size = 3;
    cfg.hidden = {16};
    cfg.encoder_param = 3;
    cfg.seed = 19;
    const TrainResult a = train(tr, cfg, &te);
    const TrainResult b = train(tr, cfg, &te);
    CHECK(a.model.params == b.model.params);
    for (std::size_t i = 0; i < a.history.size(); ++i) {
        CHECK(a.history[i].train_loss == b.history[i].train_loss);
        CHECK(a.history[i].test_metric == b.history[i].test_metric);
        CHECK(std::isfinite(a.history[i].test_loss));
        CHECK(a.history[i].test_metric >= 0.0);
        CHECK(a.history[i].test_metric <= 1.0);
    }
}

TEST_CASE("training rejects undersized r and reports divergence") {
    SubspaceDataset ds = tiny_dataset(3, 3, 20);
    TrainConfig cfg;
    cfg.r = 2;
    cfg.hidden = {8};
    cfg.encoder_param = 3;
    CHECK_THROWS_AS(train(ds, cfg), Error);
    cfg.r = 3;
    cfg.epochs = 2;
    ds.features(1, 3) = std::numeric_limits<double>::quiet_NaN();
    try {
        train(ds, cfg);
        FAIL("expected DivergenceDetected");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::DivergenceDetected);
    }
}

TEST_CASE("Z2 training predicts a single vector") {
    const SubspaceDataset ds = tiny_dataset(4, 2, 21);
    TrainConfig cfg;
    cfg.loss = LossKind::Z2;
    cfg.z2_index = 1;
    cfg.epochs = 3;
    cfg.hidden = {8};
    cfg.encoder_param = 3;
    const TrainResult res = train(ds, cfg);
    CHECK(res.model.r == 1);
    CHECK(training_target(ds.targets[0], cfg) == ds.targets[0].col(1));
}

TEST_CASE("normal-coordinate interpolation cases") {
    std::mt19937_64 rng(22);
    const Index n = 20, p = 3;
    std::vector<OrthoBasis> targets;
    for (int i = 0; i < 5; ++i) targets.push_back(OrthoBasis::orthonormalize_householder(gaussian(n, p, rng)));
    const Matrix inputs = gaussian(4, 5, rng);
    const OrthoBasis exact = interpolate_normal_coords(inputs, targets, inputs.col(2), 1);
    CHECK(exact.matrix() == targets[2].matrix());

    const std::vector<OrthoBasis> same(5, targets[0]);
    const OrthoBasis flat = interpolate_normal_coords(inputs, same, gaussian(4, 1, rng), 4);
    CHECK(principal_angles(flat, targets[0]).angles.maxCoeff() <= 1e-10);

    // two points on a short geodesic, query halfway in feature space
    Matrix d = gaussian(n, p, rng);
    d -= targets[0].matrix() * (targets[0].matrix().transpose() * d);
    const TangentVector delta(targets[0], 0.1 * d / d.norm());
    const std::vector<OrthoBasis> ends = {targets[0], grassmann_exp(delta, 1.0)};
    Matrix x(2, 2);
    x << 0.0, 1.0, 0.0, 0.0;
    Vector q(2);
    q << 0.5, 0.0;
    const OrthoBasis mid = interpolate_normal_coords(x, ends, q, 2);
    CHECK(principal_angles(mid, grassmann_exp(delta, 0.5)).angles.maxCoeff() <= 1e-2);
}

TEST_CASE("evaluate oracle, random and repeatability") {
    const SubspaceDataset ds = tiny_dataset(5, 2, 23, 10);
    const Predictor oracle = [&](Index s) { return ds.targets[static_cast<std::size_t>(s)]; };
    const EvalSummary zero = evaluate(oracle, ds, Metric::RelSubspace);
    CHECK(zero.mean <= 1e-10);
    CHECK(zero.per_sample.size() == 5);
    CHECK(evaluate(oracle, ds, Metric::Z2PerVector).mean <= 1e-10);

    std::mt19937_64 rng(24);
    std::vector<Matrix> random;
    for (int s = 0; s < 5; ++s) random.push_back(gaussian(100, 2, rng));
    const Predictor noise = [&](Index s) { return random[static_cast<std::size_t>(s)]; };
    const EvalSummary r1 = evaluate(noise, ds, Metric::RelSubspace);
    CHECK(r1.mean >= 0.9);
    CHECK(r1.worst >= r1.mean);
    const EvalSummary r2 = evaluate(noise, ds, Metric::RelSubspace);
    CHECK(r1.per_sample == r2.per_sample);

    const Predictor flipped = [&](Index s) { return Matrix(-ds.targets[static_cast<std::size_t>(s)].leftCols(1)); };
    CHECK(evaluate(flipped, ds, Metric::Z2PerVector).mean <= 1e-10);
}

TEST_CASE("model checkpoint round-trip") {
    const SubspaceDataset ds = tiny_dataset(4, 2, 25);
    TrainConfig cfg;
    cfg.r = 2;
    cfg.epochs = 2;
    cfg.hidden = {8};
    cfg.encoder_param = 3;
    const TrainResult res = train(ds, cfg);
    const fs::path dir = fs::temp_directory_path() / "subreg_test_model";
    fs::remove_all(dir);
    save_model(res.model, cfg, dir);
    const RegressorModel back = load_model(dir);
    CHECK(back.params == res.model.params);
    CHECK(back.widths == res.model.widths);
    CHECK(back.encoder.mean == res.model.encoder.mean);
    for (Index s = 0; s < ds.size(); ++s)
        CHECK(predict(back, ds.features.row(s).transpose()) == predict(res.model, ds.features.row(s).transpose()));
    fs::remove_all(dir);
}

TEST_CASE("loss names round-trip") {
    for (LossKind k : {LossKind::L1, LossKind::L2, LossKind::L2Stab, LossKind::Z2}) CHECK(parse_loss(loss_name(k)) == k);
    CHECK_THROWS_AS(parse_loss("L3"), Error);
}
