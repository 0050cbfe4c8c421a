#pragma once

#include <filesystem>
#include <functional>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "subreg/grassmann.hpp"
#include "subreg/problems.hpp"

namespace subreg {

enum class EncoderMode { Spectral, RawDownsample };

/// Maps a stored feature row (channels x nodes) to the network input:
/// lowest sine modes per channel, or a strided subsample, then standardized.
struct FeatureEncoder {
    EncoderMode mode = EncoderMode::Spectral;
    Index modes = 12;      // retained modes per axis (spectral)
    Index downsample = 1;  // stride per axis (raw)
    GridSpec grid;
    Index channels = 1;
    Vector mean;   // standardization, fitted on training rows
    Vector scale;

    Index output_length() const;
    Vector encode_unscaled(const Vector& row) const;
    Vector encode(const Vector& row) const;
    Matrix encode_rows(const Matrix& rows) const;  // one encoded column per row
    void fit(const Matrix& rows);
};

FeatureEncoder make_encoder(const SubspaceDataset& ds, EncoderMode mode, Index modes_or_stride);

/// Dense MLP with GELU hidden layers; the output vector is reshaped column by
/// column into an n x r matrix.
struct RegressorModel {
    FeatureEncoder encoder;
    std::vector<Index> widths;  // input, hidden..., n * r
    Index n = 0;
    Index r = 0;
    bool normalize_columns = true;
    Vector params;  // per layer: weights (out x in, column-major) then bias

    Index param_count() const;
    Index layers() const { return static_cast<Index>(widths.size()) - 1; }
};

Index mlp_param_count(const std::vector<Index>& widths);

/// He-style initialization from `seed`.
RegressorModel make_model(FeatureEncoder encoder, Index n, Index r, const std::vector<Index>& hidden, std::uint64_t seed,
                          bool normalize_columns = true);

/// Raw basis for one encoded input (columns unit-normalized when enabled).
Matrix forward(const RegressorModel& model, const Vector& encoded);
/// Same starting from a stored feature row.
Matrix predict(const RegressorModel& model, const Vector& feature_row);

struct Batch {
    Matrix inputs;                 // encoded, one column per sample
    std::vector<Matrix> targets;   // n x k
    std::vector<Vector> z;         // probe vectors for L2 kinds (length k)
};

struct LossGradient {
    double loss = 0.0;  // mean over the batch
    Vector gradient;    // d(mean loss)/d(params)
};

/// Backpropagation through grad_loss, the column normalization and the MLP.
/// Z2 compares the single output column with target column 0.
LossGradient grad_model(const RegressorModel& model, const Batch& batch, LossKind kind);
double batch_loss(const RegressorModel& model, const Batch& batch, LossKind kind);

struct TrainConfig {
    LossKind loss = LossKind::L1;
    Index r = 4;
    Index k = 0;  // target columns used (0: all)
    Index z2_index = 0;  // target column for Z2 training
    Index batch_size = 20;
    Index epochs = 300;
    double lr = 1e-3;
    double decay = 0.5;
    Index decay_interval = 100;
    double weight_decay = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.99;
    std::uint64_t seed = 0;
    std::vector<Index> hidden = {256, 256, 256};
    EncoderMode encoder = EncoderMode::Spectral;
    Index encoder_param = 12;
};

struct EpochRecord {
    Index epoch = 0;
    double train_loss = 0.0;
    double test_loss = std::numeric_limits<double>::quiet_NaN();    // NaN without a test set
    double test_metric = std::numeric_limits<double>::quiet_NaN();
};

struct TrainResult {
    RegressorModel model;
    std::vector<EpochRecord> history;
};

/// Lion-style training: sign of interpolated momentum, decoupled weight decay,
/// learning rate multiplied by `decay` every `decay_interval` epochs.
TrainResult train(const SubspaceDataset& train_set, const TrainConfig& config, const SubspaceDataset* test_set = nullptr);

/// Targets restricted to the columns a config trains on.
Matrix training_target(const Matrix& target, const TrainConfig& config);

struct KernelParams {
    double bandwidth = 0.0;  // 0: median pairwise distance of the neighbors
    double ridge = 1e-8;
};

/// Normal-coordinate interpolation: log maps of the k nearest training
/// targets at the nearest one, squared-exponential kernel regression in the
/// tangent space, exponential map back.
OrthoBasis interpolate_normal_coords(const Matrix& train_inputs, const std::vector<OrthoBasis>& train_targets,
                                     const Vector& query, Index k_nn, const KernelParams& params = {});

enum class Metric { RelSubspace, Z2PerVector };

struct EvalSummary {
    double mean = 0.0;
    double worst = 0.0;
    std::vector<double> per_sample;
};

using Predictor = std::function<Matrix(Index sample)>;

/// Metric of predictor outputs against the dataset targets (first k target
/// columns, k = prediction columns for Z2, all target columns otherwise).
EvalSummary evaluate(const Predictor& predictor, const SubspaceDataset& ds, Metric metric, Index k = 0);

void save_model(const RegressorModel& model, const TrainConfig& config, const std::filesystem::path& dir);
RegressorModel load_model(const std::filesystem::path& dir);

std::string_view loss_name(LossKind kind);
LossKind parse_loss(std::string_view name);

}  // namespace subreg
