#include "subreg/learn.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace subreg {

namespace {

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x / M_SQRT2)); }

double gelu_prime(double x) {
    return 0.5 * (1.0 + std::erf(x / M_SQRT2)) + x * std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI);
}

struct LayerView {
    Eigen::Map<const Matrix> w;
    Eigen::Map<const Vector> b;
};

std::vector<LayerView> layer_views(const RegressorModel& m) {
    std::vector<LayerView> out;
    Index off = 0;
    for (Index l = 0; l < m.layers(); ++l) {
        const Index in = m.widths[l], o = m.widths[l + 1];
        out.push_back({Eigen::Map<const Matrix>(m.params.data() + off, o, in), Eigen::Map<const Vector>(m.params.data() + off + o * in, o)});
        off += o * in + o;
    }
    return out;
}

struct ForwardPass {
    std::vector<Matrix> pre;     // pre-activations of hidden layers
    std::vector<Matrix> acts;    // acts[0] = inputs, acts[l] = gelu(pre[l-1])
    Matrix out;                  // raw network output, (n r) x B
};

ForwardPass run_forward(const RegressorModel& m, const Matrix& inputs) {
    require(inputs.rows() == m.widths.front(), "forward: input length does not match the encoder");
    const auto views = layer_views(m);
    ForwardPass fp;
    fp.acts.push_back(inputs);
    for (Index l = 0; l < m.layers(); ++l) {
        Matrix z = views[l].w * fp.acts.back();
        z.colwise() += views[l].b;
        if (l + 1 == m.layers()) {
            fp.out = std::move(z);
        } else {
            fp.acts.push_back(z.unaryExpr(&gelu));
            fp.pre.push_back(std::move(z));
        }
    }
    return fp;
}

Matrix shape_output(const RegressorModel& m, const Vector& col) {
    Matrix w = Eigen::Map<const Matrix>(col.data(), m.n, m.r);
    if (m.normalize_columns) {
        for (Index j = 0; j < w.cols(); ++j) {
            const double nrm = w.col(j).norm();
            if (nrm > 0.0) w.col(j) /= nrm;
        }
    }
    return w;
}

// Gradient with respect to the raw output column given dL/d(normalized output).
Vector unshape_gradient(const RegressorModel& m, const Vector& raw_col, const Matrix& g) {
    Matrix out = g;
    if (m.normalize_columns) {
        Eigen::Map<const Matrix> raw(raw_col.data(), m.n, m.r);
        for (Index j = 0; j < m.r; ++j) {
            const double nrm = raw.col(j).norm();
            if (nrm == 0.0) {
                out.col(j).setZero();
                continue;
            }
            const Vector wn = raw.col(j) / nrm;
            out.col(j) = (g.col(j) - wn * wn.dot(g.col(j))) / nrm;
        }
    }
    return Eigen::Map<const Vector>(out.data(), out.size());
}

Vector probe_or_empty(const Batch& batch, std::size_t s) {
    return s < batch.z.size() ? batch.z[s] : Vector();
}

}  // namespace

Index FeatureEncoder::output_length() const {
    Index per_channel = 1;
    for (std::size_t d = 0; d < grid.dims(); ++d) {
        per_channel *= mode == EncoderMode::Spectral ? std::min(modes, grid.extents[d])
                                                      : (grid.extents[d] + downsample - 1) / downsample;
    }
    return channels * per_channel;
}

Vector FeatureEncoder::encode_unscaled(const Vector& row) const {
    const Index nodes = grid.size();
    require(row.size() == channels * nodes, "FeatureEncoder: feature row length mismatch");
    Vector out(output_length());
    Index pos = 0;
    for (Index c = 0; c < channels; ++c) {
        const Vector vals = row.segment(c * nodes, nodes);
        const Vector src = mode == EncoderMode::Spectral ? sine_coefficients(FieldSample{grid, vals}) : vals;
        for (Index node = 0; node < nodes; ++node) {
            const auto idx = grid.unravel(node);
            bool keep = true;
            for (std::size_t d = 0; d < idx.size(); ++d)
                keep = keep && (mode == EncoderMode::Spectral ? idx[d] < modes : idx[d] % downsample == 0);
            if (keep) out[pos++] = src[node];
        }
    }
    return out;
}

Vector FeatureEncoder::encode(const Vector& row) const {
    const Vector raw = encode_unscaled(row);
    if (mean.size() != raw.size()) return raw;
    return (raw - mean).cwiseQuotient(scale);
}

Matrix FeatureEncoder::encode_rows(const Matrix& rows) const {
    Matrix out(output_length(), rows.rows());
    for (Index s = 0; s < rows.rows(); ++s) out.col(s) = encode(rows.row(s).transpose());
    return out;
}

void FeatureEncoder::fit(const Matrix& rows) {
    Matrix raw(output_length(), rows.rows());
    for (Index s = 0; s < rows.rows(); ++s) raw.col(s) = encode_unscaled(rows.row(s).transpose());
    if (rows.rows() < 2) {
        // one sample: centering would erase it, so only rescale
        const double rms = std::sqrt(raw.squaredNorm() / static_cast<double>(std::max<Index>(1, raw.size())));
        mean = Vector::Zero(raw.rows());
        scale = Vector::Constant(raw.rows(), rms > 1e-12 ? rms : 1.0);
        return;
    }
    mean = raw.rowwise().mean();
    scale.resize(mean.size());
    for (Index i = 0; i < raw.rows(); ++i) {
        const double sd = std::sqrt((raw.row(i).array() - mean[i]).square().mean());
        scale[i] = sd > 1e-12 ? sd : 1.0;
    }
}

FeatureEncoder make_encoder(const SubspaceDataset& ds, EncoderMode mode, Index modes_or_stride) {
    require(modes_or_stride >= 1, "make_encoder: mode count / stride must be positive");
    FeatureEncoder enc;
    enc.mode = mode;
    if (mode == EncoderMode::Spectral) enc.modes = modes_or_stride;
    else enc.downsample = modes_or_stride;
    enc.grid = ds.grid;
    enc.channels = ds.channels;
    enc.fit(ds.features);
    return enc;
}

Index mlp_param_count(const std::vector<Index>& widths) {
    Index total = 0;
    for (std::size_t l = 0; l + 1 < widths.size(); ++l) total += widths[l] * widths[l + 1] + widths[l + 1];
    return total;
}

Index RegressorModel::param_count() const { return mlp_param_count(widths); }

RegressorModel make_model(FeatureEncoder encoder, Index n, Index r, const std::vector<Index>& hidden, std::uint64_t seed,
                          bool normalize_columns) {
    require(n >= 1 && r >= 1, "make_model: need n, r >= 1");
    RegressorModel m;
    m.encoder = std::move(encoder);
    m.n = n;
    m.r = r;
    m.normalize_columns = normalize_columns;
    m.widths.push_back(m.encoder.output_length());
    for (Index h : hidden) {
        require(h >= 1, "make_model: hidden widths must be positive");
        m.widths.push_back(h);
    }
    m.widths.push_back(n * r);
    m.params = Vector::Zero(m.param_count());

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    Index off = 0;
    for (Index l = 0; l < m.layers(); ++l) {
        const Index in = m.widths[l], o = m.widths[l + 1];
        const double sd = std::sqrt(2.0 / static_cast<double>(in));
        for (Index i = 0; i < o * in; ++i) m.params[off + i] = sd * normal(rng);
        off += o * in + o;
    }
    return m;
}

Matrix forward(const RegressorModel& model, const Vector& encoded) {
    const ForwardPass fp = run_forward(model, encoded);
    return shape_output(model, fp.out.col(0));
}

Matrix predict(const RegressorModel& model, const Vector& feature_row) {
    return forward(model, model.encoder.encode(feature_row));
}

double batch_loss(const RegressorModel& model, const Batch& batch, LossKind kind) {
    const ForwardPass fp = run_forward(model, batch.inputs);
    double total = 0.0;
    for (std::size_t s = 0; s < batch.targets.size(); ++s) {
        const Matrix w = shape_output(model, fp.out.col(static_cast<Index>(s)));
        total += loss_value(kind, w, batch.targets[s], probe_or_empty(batch, s));
    }
    return total / static_cast<double>(batch.targets.size());
}

LossGradient grad_model(const RegressorModel& model, const Batch& batch, LossKind kind) {
    const Index bsz = batch.inputs.cols();
    require(bsz >= 1 && static_cast<Index>(batch.targets.size()) == bsz, "grad_model: batch size mismatch");
    const ForwardPass fp = run_forward(model, batch.inputs);
    const auto views = layer_views(model);

    LossGradient lg;
    Matrix delta(fp.out.rows(), bsz);
    for (Index s = 0; s < bsz; ++s) {
        const Vector raw = fp.out.col(s);
        const Matrix w = shape_output(model, raw);
        const auto& target = batch.targets[static_cast<std::size_t>(s)];
        const Vector z = probe_or_empty(batch, static_cast<std::size_t>(s));
        lg.loss += loss_value(kind, w, target, z);
        delta.col(s) = unshape_gradient(model, raw, grad_loss(kind, w, target, z));
    }
    lg.loss /= static_cast<double>(bsz);
    delta /= static_cast<double>(bsz);

    lg.gradient = Vector::Zero(model.param_count());
    std::vector<Index> offsets;
    Index off = 0;
    for (Index l = 0; l < model.layers(); ++l) {
        offsets.push_back(off);
        off += model.widths[l] * model.widths[l + 1] + model.widths[l + 1];
    }
    for (Index l = model.layers() - 1; l >= 0; --l) {
        const Index in = model.widths[l], o = model.widths[l + 1];
        Eigen::Map<Matrix>(lg.gradient.data() + offsets[l], o, in) = delta * fp.acts[l].transpose();
        Eigen::Map<Vector>(lg.gradient.data() + offsets[l] + o * in, o) = delta.rowwise().sum();
        if (l > 0) {
            Matrix back = views[l].w.transpose() * delta;
            delta = back.cwiseProduct(fp.pre[l - 1].unaryExpr(&gelu_prime));
        }
    }
    return lg;
}

Matrix training_target(const Matrix& target, const TrainConfig& config) {
    if (config.loss == LossKind::Z2) {
        require(config.z2_index >= 0 && config.z2_index < target.cols(), "training_target: z2_index out of range");
        return target.col(config.z2_index);
    }
    const Index k = config.k > 0 ? config.k : target.cols();
    require(k <= target.cols(), "training_target: k exceeds the target dimension");
    return target.leftCols(k);
}

namespace {

LossKind eval_kind(LossKind kind) { return kind == LossKind::Z2 ? LossKind::Z2 : LossKind::L1; }

EpochRecord test_epoch(const RegressorModel& model, const Matrix& inputs, const SubspaceDataset& ds, const TrainConfig& cfg) {
    EpochRecord rec;
    Batch b;
    b.inputs = inputs;
    for (const auto& t : ds.targets) b.targets.push_back(training_target(t, cfg));
    rec.test_loss = batch_loss(model, b, eval_kind(cfg.loss));
    const ForwardPass fp = run_forward(model, inputs);
    double metric = 0.0;
    for (std::size_t s = 0; s < b.targets.size(); ++s) {
        const Matrix w = shape_output(model, fp.out.col(static_cast<Index>(s)));
        if (cfg.loss == LossKind::Z2) {
            metric += loss_z2(w.col(0), b.targets[s].col(0)) / b.targets[s].col(0).norm();
        } else {
            metric += relative_subspace_error(OrthoBasis::orthonormalize_householder(w),
                                              OrthoBasis::from_orthonormal(b.targets[s], 1e-8));
        }
    }
    rec.test_metric = metric / static_cast<double>(b.targets.size());
    return rec;
}

}  // namespace

TrainResult train(const SubspaceDataset& train_set, const TrainConfig& config, const SubspaceDataset* test_set) {
    require(train_set.size() >= 1, "train: empty dataset");
    require(config.batch_size >= 1 && config.epochs >= 0 && config.lr >= 0.0 && config.decay > 0.0 &&
                config.decay_interval >= 1 && config.weight_decay >= 0.0,
            "train: invalid hyperparameters");
    const Index n = train_set.targets.front().rows();
    const Index k = training_target(train_set.targets.front(), config).cols();
    const Index r = config.loss == LossKind::Z2 ? 1 : config.r;
    require(r >= k, "train: r must be at least the target dimension");

    FeatureEncoder enc = make_encoder(train_set, config.encoder, config.encoder_param);
    TrainResult res{make_model(enc, n, r, config.hidden, config.seed), {}};
    RegressorModel& model = res.model;

    const Matrix inputs = enc.encode_rows(train_set.features);
    Matrix test_inputs;
    if (test_set) test_inputs = enc.encode_rows(test_set->features);
    std::vector<Matrix> targets;
    for (const auto& t : train_set.targets) targets.push_back(training_target(t, config));

    std::mt19937_64 rng(derive_seed(config.seed, 1));
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<Index> order(static_cast<std::size_t>(train_set.size()));
    std::iota(order.begin(), order.end(), Index{0});
    Vector momentum = Vector::Zero(model.param_count());
    const bool stochastic = config.loss == LossKind::L2 || config.loss == LossKind::L2Stab;

    for (Index epoch = 0; epoch < config.epochs; ++epoch) {
        const double lr = config.lr * std::pow(config.decay, static_cast<double>(epoch / config.decay_interval));
        std::shuffle(order.begin(), order.end(), rng);
        double running = 0.0;
        for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(config.batch_size)) {
            const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
            Batch batch;
            batch.inputs.resize(inputs.rows(), static_cast<Index>(stop - start));
            for (std::size_t i = start; i < stop; ++i) {
                batch.inputs.col(static_cast<Index>(i - start)) = inputs.col(order[i]);
                batch.targets.push_back(targets[static_cast<std::size_t>(order[i])]);
                if (stochastic) {
                    Vector z(k);
                    for (Index j = 0; j < k; ++j) z[j] = normal(rng);
                    batch.z.push_back(std::move(z));
                }
            }
            if (!batch.inputs.allFinite() || !model.params.allFinite())
                fail(ErrorKind::DivergenceDetected, "train: non-finite inputs or parameters at epoch " + std::to_string(epoch));
            const LossGradient lg = grad_model(model, batch, config.loss);
            if (!std::isfinite(lg.loss) || !lg.gradient.allFinite())
                fail(ErrorKind::DivergenceDetected, "train: non-finite loss at epoch " + std::to_string(epoch));
            running += lg.loss * static_cast<double>(stop - start);

            const Vector c = config.beta1 * momentum + (1.0 - config.beta1) * lg.gradient;
            model.params -= lr * (c.unaryExpr([](double x) { return static_cast<double>((x > 0.0) - (x < 0.0)); }) +
                                  config.weight_decay * model.params);
            momentum = config.beta2 * momentum + (1.0 - config.beta2) * lg.gradient;
        }
        EpochRecord rec;
        if (test_set) rec = test_epoch(model, test_inputs, *test_set, config);
        rec.epoch = epoch;
        rec.train_loss = running / static_cast<double>(order.size());
        res.history.push_back(rec);
    }
    return res;
}

OrthoBasis interpolate_normal_coords(const Matrix& train_inputs, const std::vector<OrthoBasis>& train_targets,
                                     const Vector& query, Index k_nn, const KernelParams& params) {
    const Index n_train = train_inputs.cols();
    require(n_train >= 1 && static_cast<Index>(train_targets.size()) == n_train, "interpolate_normal_coords: empty training set");
    require(k_nn >= 1 && k_nn <= n_train, "interpolate_normal_coords: need 1 <= k_nn <= n_samples");
    require(query.size() == train_inputs.rows(), "interpolate_normal_coords: feature length mismatch");

    std::vector<std::pair<double, Index>> dist;
    for (Index i = 0; i < n_train; ++i) dist.emplace_back((train_inputs.col(i) - query).norm(), i);
    std::stable_sort(dist.begin(), dist.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    const OrthoBasis& base = train_targets[static_cast<std::size_t>(dist[0].second)];
    if (k_nn == 1) return base;

    std::vector<Index> nb;
    for (Index j = 0; j < k_nn; ++j) nb.push_back(dist[static_cast<std::size_t>(j)].second);
    const Index len = base.matrix().size();
    Matrix tangents(k_nn, len);
    tangents.row(0).setZero();
    for (Index j = 1; j < k_nn; ++j) {
        const TangentVector t = grassmann_log(base, train_targets[static_cast<std::size_t>(nb[j])]);
        tangents.row(j) = Eigen::Map<const Vector>(t.delta.data(), len).transpose();
    }

    double ell = params.bandwidth;
    if (ell <= 0.0) {
        std::vector<double> pd;
        for (Index a = 0; a < k_nn; ++a)
            for (Index b = a + 1; b < k_nn; ++b) pd.push_back((train_inputs.col(nb[a]) - train_inputs.col(nb[b])).norm());
        std::nth_element(pd.begin(), pd.begin() + static_cast<std::ptrdiff_t>(pd.size() / 2), pd.end());
        ell = pd[pd.size() / 2];
        if (!(ell > 0.0)) ell = 1.0;
    }
    auto kern = [&](const Vector& x, const Vector& y) { return std::exp(-(x - y).squaredNorm() / (2.0 * ell * ell)); };
    Matrix kmat(k_nn, k_nn);
    Vector kq(k_nn);
    for (Index a = 0; a < k_nn; ++a) {
        kq[a] = kern(query, train_inputs.col(nb[a]));
        for (Index b = 0; b < k_nn; ++b) kmat(a, b) = kern(train_inputs.col(nb[a]), train_inputs.col(nb[b]));
    }
    kmat.diagonal().array() += params.ridge;
    const Matrix coeffs = kmat.ldlt().solve(tangents);
    const Vector pred = coeffs.transpose() * kq;
    Matrix delta = Eigen::Map<const Matrix>(pred.data(), base.ambient_dim(), base.dim());
    delta -= base.matrix() * (base.matrix().transpose() * delta);
    return grassmann_exp(TangentVector(base, delta, 1e-8), 1.0);
}

EvalSummary evaluate(const Predictor& predictor, const SubspaceDataset& ds, Metric metric, Index k) {
    require(ds.size() >= 1, "evaluate: empty dataset");
    EvalSummary out;
    for (Index s = 0; s < ds.size(); ++s) {
        const Matrix pred = predictor(s);
        const Matrix& target = ds.targets[static_cast<std::size_t>(s)];
        double e = 0.0;
        if (metric == Metric::RelSubspace) {
            const Index kk = k > 0 ? k : target.cols();
            require(kk <= pred.cols(), "evaluate: prediction has fewer columns than the target dimension");
            e = relative_subspace_error(OrthoBasis::orthonormalize_householder(pred),
                                        OrthoBasis::from_orthonormal(target.leftCols(kk), 1e-8));
        } else {
            const Index kk = k > 0 ? k : pred.cols();
            require(kk <= target.cols() && kk <= pred.cols(), "evaluate: Z2 column count mismatch");
            for (Index j = 0; j < kk; ++j) {
                const Vector p = pred.col(j).normalized();
                e += loss_z2(p, target.col(j)) / target.col(j).norm();
            }
            e /= static_cast<double>(kk);
        }
        out.per_sample.push_back(e);
        out.worst = std::max(out.worst, e);
    }
    out.mean = std::accumulate(out.per_sample.begin(), out.per_sample.end(), 0.0) / static_cast<double>(out.per_sample.size());
    return out;
}

std::string_view loss_name(LossKind kind) {
    switch (kind) {
        case LossKind::L1: return "L1";
        case LossKind::L2: return "L2";
        case LossKind::L2Stab: return "L2stab";
        case LossKind::Z2: return "Z2";
    }
    return "L1";
}

LossKind parse_loss(std::string_view name) {
    for (LossKind k : {LossKind::L1, LossKind::L2, LossKind::L2Stab, LossKind::Z2})
        if (loss_name(k) == name) return k;
    fail(ErrorKind::ConfigError, "unknown loss kind '" + std::string(name) + "'");
}

}  // namespace subreg
