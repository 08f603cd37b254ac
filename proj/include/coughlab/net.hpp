#pragma once

#include <filesystem>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "coughlab/common.hpp"
#include "coughlab/container.hpp"
#include "coughlab/features.hpp"

namespace coughlab::net {

struct NetworkConfig {
    Index input_dim = 42;
    Index hidden_units = 50;
    Index num_bilstm_layers = 2;
    double dropout_rate = 0.3;
    Index num_classes = 2;
    std::uint64_t seed = 0;
    // Optional per-dimension input standardization (fit on the training
    // set); off by default.
    bool standardize = false;

    void validate() const;
};

// One direction's cell: gates input (i), forget (f), candidate (g),
// output (o).
struct LstmCellParams {
    Matrix w_i, w_f, w_g, w_o;  // hidden x input
    Matrix u_i, u_f, u_g, u_o;  // hidden x hidden
    Vector b_i, b_f, b_g, b_o;  // hidden
};

struct NetworkParams {
    struct BiLayer {
        LstmCellParams fwd, bwd;
    };
    std::vector<BiLayer> layers;
    Matrix w_out;  // (2*hidden) x num_classes
    Vector b_out;  // num_classes

    // Standardization statistics; empty unless NetworkConfig::standardize.
    Vector feature_mean, feature_std;
};

// Visits every trainable array (cell weights/biases per layer, then the
// output layer) in a fixed order shared by flatten, Adam, and checkpoints.
template <typename Params, typename Fn>
void for_each_trainable(Params& params, Fn&& fn) {
    auto visit_cell = [&](auto& cell, const std::string& prefix) {
        fn(prefix + ".w_i", cell.w_i);
        fn(prefix + ".w_f", cell.w_f);
        fn(prefix + ".w_g", cell.w_g);
        fn(prefix + ".w_o", cell.w_o);
        fn(prefix + ".u_i", cell.u_i);
        fn(prefix + ".u_f", cell.u_f);
        fn(prefix + ".u_g", cell.u_g);
        fn(prefix + ".u_o", cell.u_o);
        fn(prefix + ".b_i", cell.b_i);
        fn(prefix + ".b_f", cell.b_f);
        fn(prefix + ".b_g", cell.b_g);
        fn(prefix + ".b_o", cell.b_o);
    };
    for (std::size_t l = 0; l < params.layers.size(); ++l) {
        const std::string base = "layer" + std::to_string(l);
        visit_cell(params.layers[l].fwd, base + ".fwd");
        visit_cell(params.layers[l].bwd, base + ".bwd");
    }
    fn(std::string("w_out"), params.w_out);
    fn(std::string("b_out"), params.b_out);
}

// All-zero parameter set with the shapes the config dictates.
NetworkParams zero_params(const NetworkConfig& cfg);

// Glorot-range uniform weights (r = sqrt(6/(fan_in+fan_out))), zero biases
// except the forget-gate bias at 1; deterministic given cfg.seed.
NetworkParams init_params(const NetworkConfig& cfg);

Index trainable_count(const NetworkParams& params);
Vector flatten(const NetworkParams& params);
void unflatten(const Eigen::Ref<const Vector>& flat, NetworkParams& params);

// One step of the standard LSTM recurrence; exposed for direct testing.
std::pair<Vector, Vector> lstm_cell_step(const LstmCellParams& params,
                                         const Eigen::Ref<const Vector>& x_t,
                                         const Eigen::Ref<const Vector>& h_prev,
                                         const Eigen::Ref<const Vector>& c_prev);

// Forward left-to-right and backward right-to-left over the sequence with
// zero initial states; rows are timesteps, columns [h_fwd | h_bwd].
Matrix bilstm_layer(const LstmCellParams& fwd, const LstmCellParams& bwd,
                    const Eigen::Ref<const Matrix>& sequence);

enum class Mode { train, infer };

// Inverted-dropout mask: entries are 1/(1-rate) with probability 1-rate,
// else 0, so the masked expectation equals the identity.
Matrix dropout_mask(Index rows, Index cols, double rate, std::mt19937_64& rng);

// Class-probability vector (per-unit sigmoid over the output layer).
// Train mode applies inverted dropout after every BiLSTM layer and needs an
// rng when dropout_rate > 0; infer mode is deterministic.
Vector forward(const NetworkParams& params, const NetworkConfig& cfg,
               const features::FeatureSequence& features, Mode mode,
               std::mt19937_64* rng = nullptr);

// One-hot multi-label cross-entropy with probabilities clamped to
// [1e-12, 1-1e-12].
double loss(const Eigen::Ref<const Vector>& probabilities, Index true_label);

// Exact BPTT gradients of loss(forward(...), label); dropout masks are
// drawn once per call and shared between the forward and backward passes.
NetworkParams backward(const NetworkParams& params, const NetworkConfig& cfg,
                       const features::FeatureSequence& features, Index label, Mode mode,
                       std::mt19937_64* rng = nullptr, double* out_loss = nullptr);

struct LabeledExample {
    features::FeatureSequence features;
    Index label = 0;
    std::string subject_id;
};
using ExampleSet = std::vector<LabeledExample>;

enum class Optimizer { adam, sgd };

struct TrainConfig {
    double learning_rate = 1e-3;
    Index batch_size = 16;
    Index max_epochs = 100;
    Optimizer optimizer = Optimizer::adam;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_epsilon = 1e-8;
    double gradient_clip_norm = 5.0;
    Index early_stop_patience = 10;
    std::uint64_t seed = 0;

    void validate() const;
};

struct EpochStats {
    Index epoch = 0;  // 1-based
    double train_loss = 0.0;
    double train_acc = 0.0;
    double val_loss = 0.0;
    double val_acc = 0.0;
};

struct TrainResult {
    NetworkParams params;  // snapshot from the best validation-loss epoch
    std::vector<EpochStats> history;
    Index best_epoch = 0;  // 1-based index into history
};

// Mini-batch training: per-sample BPTT gradients averaged over the batch in
// a fixed order, global-norm clipping, optimizer step, epoch-end infer-mode
// metrics on both sets, early stopping on validation loss. Throws
// NumericError naming the epoch if the loss goes non-finite. With an empty
// validation set, training loss drives early stopping and the val columns
// mirror the train columns.
TrainResult train(const ExampleSet& train_set, const ExampleSet& val_set, NetworkConfig net_cfg,
                  const TrainConfig& train_cfg);

enum class GridMetric { training_loss, validation_accuracy };

struct GridSearchSpec {
    std::vector<Index> hidden_units;
    std::vector<Index> num_bilstm_layers;
    std::vector<double> dropout_rate;
    GridMetric metric = GridMetric::validation_accuracy;
};

struct GridCell {
    NetworkConfig config;
    double best_train_loss = 0.0;
    double best_train_acc = 0.0;
    double best_val_loss = 0.0;
    double best_val_acc = 0.0;
    Index parameter_count = 0;
    bool diverged = false;
};

struct GridSearchResult {
    NetworkConfig best_config;
    std::vector<GridCell> cells;  // declaration order of the Cartesian product
};

// Exhaustive Cartesian product, every cell trained with the same seeds;
// winner by the chosen metric with ties broken by fewer parameters, then
// lower dropout, then declaration order. A diverged cell is recorded with
// infinite loss rather than aborting the search.
GridSearchResult grid_search(const GridSearchSpec& spec, const ExampleSet& train_set,
                             const ExampleSet& val_set, const NetworkConfig& base_cfg,
                             const TrainConfig& train_cfg);

struct Checkpoint {
    NetworkParams params;
    NetworkConfig config;
    container::Json extra;  // caller side data (feature pipeline, class names)
};

void save_checkpoint(const NetworkParams& params, const NetworkConfig& cfg,
                     const std::filesystem::path& path,
                     const container::Json& extra = container::Json::object());
Checkpoint load_checkpoint(const std::filesystem::path& path);

void write_history_csv(const std::filesystem::path& path, const std::vector<EpochStats>& history);
void write_grid_csv(const std::filesystem::path& path, const GridSearchResult& result);

// First index holding the maximum score.
Index argmax(const Eigen::Ref<const Vector>& scores);

}  // namespace coughlab::net
