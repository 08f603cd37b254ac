#include "coughlab/net.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>

#include "coughlab/util.hpp"

namespace coughlab::net {

namespace {

constexpr double kProbClampLo = 1e-12;
constexpr double kProbClampHi = 1.0 - 1e-12;

// Salt constants for the independent RNG streams derived from a train seed.
constexpr std::uint64_t kShuffleStream = 1;
constexpr std::uint64_t kDropoutStream = 2;

double sigmoid_scalar(double x) {
    if (x >= 0.0) {
        const double e = std::exp(-x);
        return 1.0 / (1.0 + e);
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
}

Vector sigmoid(const Vector& x) {
    return x.unaryExpr([](double v) { return sigmoid_scalar(v); });
}

LstmCellParams zero_cell(Index hidden, Index input) {
    LstmCellParams c;
    c.w_i = Matrix::Zero(hidden, input);
    c.w_f = Matrix::Zero(hidden, input);
    c.w_g = Matrix::Zero(hidden, input);
    c.w_o = Matrix::Zero(hidden, input);
    c.u_i = Matrix::Zero(hidden, hidden);
    c.u_f = Matrix::Zero(hidden, hidden);
    c.u_g = Matrix::Zero(hidden, hidden);
    c.u_o = Matrix::Zero(hidden, hidden);
    c.b_i = Vector::Zero(hidden);
    c.b_f = Vector::Zero(hidden);
    c.b_g = Vector::Zero(hidden);
    c.b_o = Vector::Zero(hidden);
    return c;
}

// Per-timestep values one direction's pass produces, in processing order.
struct LstmCache {
    Matrix i, f, g, o, c, tanh_c, h;  // each T x hidden

    void resize(Index t_len, Index hidden) {
        i.resize(t_len, hidden);
        f.resize(t_len, hidden);
        g.resize(t_len, hidden);
        o.resize(t_len, hidden);
        c.resize(t_len, hidden);
        tanh_c.resize(t_len, hidden);
        h.resize(t_len, hidden);
    }
};

Matrix lstm_forward(const LstmCellParams& p, const Eigen::Ref<const Matrix>& x, LstmCache* cache) {
    const Index t_len = x.rows();
    const Index hidden = p.b_i.size();
    Matrix h_seq(t_len, hidden);
    if (cache) cache->resize(t_len, hidden);

    Vector h_prev = Vector::Zero(hidden);
    Vector c_prev = Vector::Zero(hidden);
    for (Index t = 0; t < t_len; ++t) {
        const Vector x_t = x.row(t).transpose();
        const Vector i_t = sigmoid(p.w_i * x_t + p.u_i * h_prev + p.b_i);
        const Vector f_t = sigmoid(p.w_f * x_t + p.u_f * h_prev + p.b_f);
        const Vector g_t = (p.w_g * x_t + p.u_g * h_prev + p.b_g).array().tanh();
        const Vector o_t = sigmoid(p.w_o * x_t + p.u_o * h_prev + p.b_o);
        const Vector c_t = f_t.cwiseProduct(c_prev) + i_t.cwiseProduct(g_t);
        const Vector tanh_c = c_t.array().tanh();
        const Vector h_t = o_t.cwiseProduct(tanh_c);

        h_seq.row(t) = h_t.transpose();
        if (cache) {
            cache->i.row(t) = i_t.transpose();
            cache->f.row(t) = f_t.transpose();
            cache->g.row(t) = g_t.transpose();
            cache->o.row(t) = o_t.transpose();
            cache->c.row(t) = c_t.transpose();
            cache->tanh_c.row(t) = tanh_c.transpose();
            cache->h.row(t) = h_t.transpose();
        }
        h_prev = h_t;
        c_prev = c_t;
    }
    return h_seq;
}

// BPTT through one direction; x and dh_seq are in that direction's
// processing order. Accumulates into grad and returns dLoss/dx.
Matrix lstm_backward(const LstmCellParams& p, const Eigen::Ref<const Matrix>& x,
                     const LstmCache& cache, const Eigen::Ref<const Matrix>& dh_seq,
                     LstmCellParams& grad) {
    const Index t_len = x.rows();
    const Index hidden = p.b_i.size();
    Matrix dx = Matrix::Zero(t_len, x.cols());
    Vector dh_carry = Vector::Zero(hidden);
    Vector dc_carry = Vector::Zero(hidden);

    for (Index t = t_len - 1; t >= 0; --t) {
        const Vector dh = dh_seq.row(t).transpose() + dh_carry;
        const Vector i_t = cache.i.row(t).transpose();
        const Vector f_t = cache.f.row(t).transpose();
        const Vector g_t = cache.g.row(t).transpose();
        const Vector o_t = cache.o.row(t).transpose();
        const Vector tanh_c = cache.tanh_c.row(t).transpose();
        const Vector c_prev =
            t > 0 ? Vector(cache.c.row(t - 1).transpose()) : Vector(Vector::Zero(hidden));
        const Vector h_prev =
            t > 0 ? Vector(cache.h.row(t - 1).transpose()) : Vector(Vector::Zero(hidden));

        const Vector da_o =
            dh.cwiseProduct(tanh_c).cwiseProduct(o_t).cwiseProduct(Vector::Ones(hidden) - o_t);
        const Vector dc =
            dc_carry + dh.cwiseProduct(o_t).cwiseProduct(
                           (Vector::Ones(hidden) - tanh_c.cwiseProduct(tanh_c)));
        const Vector da_f =
            dc.cwiseProduct(c_prev).cwiseProduct(f_t).cwiseProduct(Vector::Ones(hidden) - f_t);
        const Vector da_i =
            dc.cwiseProduct(g_t).cwiseProduct(i_t).cwiseProduct(Vector::Ones(hidden) - i_t);
        const Vector da_g =
            dc.cwiseProduct(i_t).cwiseProduct(Vector::Ones(hidden) - g_t.cwiseProduct(g_t));

        const Vector x_t = x.row(t).transpose();
        grad.w_i.noalias() += da_i * x_t.transpose();
        grad.w_f.noalias() += da_f * x_t.transpose();
        grad.w_g.noalias() += da_g * x_t.transpose();
        grad.w_o.noalias() += da_o * x_t.transpose();
        grad.u_i.noalias() += da_i * h_prev.transpose();
        grad.u_f.noalias() += da_f * h_prev.transpose();
        grad.u_g.noalias() += da_g * h_prev.transpose();
        grad.u_o.noalias() += da_o * h_prev.transpose();
        grad.b_i += da_i;
        grad.b_f += da_f;
        grad.b_g += da_g;
        grad.b_o += da_o;

        dx.row(t) = (p.w_i.transpose() * da_i + p.w_f.transpose() * da_f +
                     p.w_g.transpose() * da_g + p.w_o.transpose() * da_o)
                        .transpose();
        dh_carry = p.u_i.transpose() * da_i + p.u_f.transpose() * da_f +
                   p.u_g.transpose() * da_g + p.u_o.transpose() * da_o;
        dc_carry = dc.cwiseProduct(f_t);
    }
    return dx;
}

struct ForwardCache {
    std::vector<Matrix> layer_inputs;  // what each BiLSTM layer consumed
    std::vector<LstmCache> fwd_cache;
    std::vector<LstmCache> bwd_cache;  // in the backward direction's processing order
    std::vector<Matrix> masks;         // scaled dropout mask per layer; 0x0 if none
    Matrix last_output;                // post-dropout output of the final layer
    Vector pooled;
    Vector probs;
};

Matrix standardized_input(const NetworkParams& params, const Eigen::Ref<const Matrix>& frames) {
    if (params.feature_mean.size() == 0) return frames;
    Matrix x = frames.rowwise() - params.feature_mean.transpose();
    x.array().rowwise() /= params.feature_std.transpose().array();
    return x;
}

Vector forward_cached(const NetworkParams& params, const NetworkConfig& cfg,
                      const features::FeatureSequence& features, Mode mode, std::mt19937_64* rng,
                      ForwardCache& cache) {
    cfg.validate();
    if (features.frames.cols() != cfg.input_dim)
        throw ShapeError("forward: " + std::to_string(features.frames.cols()) +
                         "-dim features fed to a " + std::to_string(cfg.input_dim) +
                         "-dim network");
    if (features.frames.rows() < 1) throw ShapeError("forward: empty feature sequence");
    if (!features.frames.allFinite())
        throw NumericError("forward: non-finite features" +
                           (features.source_id.empty() ? "" : " in " + features.source_id));
    if (static_cast<Index>(params.layers.size()) != cfg.num_bilstm_layers)
        throw ShapeError("forward: parameter stack does not match the configured layer count");

    const Index hidden = cfg.hidden_units;
    const bool use_dropout = mode == Mode::train && cfg.dropout_rate > 0.0;
    if (use_dropout && rng == nullptr)
        throw ConfigError("train-mode forward with dropout needs an RNG");

    const std::size_t n_layers = params.layers.size();
    cache.layer_inputs.resize(n_layers);
    cache.fwd_cache.resize(n_layers);
    cache.bwd_cache.resize(n_layers);
    cache.masks.assign(n_layers, Matrix());

    Matrix current = standardized_input(params, features.frames);
    for (std::size_t l = 0; l < n_layers; ++l) {
        cache.layer_inputs[l] = current;
        const Matrix h_fwd = lstm_forward(params.layers[l].fwd, current, &cache.fwd_cache[l]);
        const Matrix reversed = current.colwise().reverse();
        const Matrix h_bwd_proc = lstm_forward(params.layers[l].bwd, reversed, &cache.bwd_cache[l]);

        Matrix out(current.rows(), 2 * hidden);
        out.leftCols(hidden) = h_fwd;
        out.rightCols(hidden) = h_bwd_proc.colwise().reverse();
        if (use_dropout) {
            cache.masks[l] = dropout_mask(out.rows(), out.cols(), cfg.dropout_rate, *rng);
            out.array() *= cache.masks[l].array();
        }
        current = std::move(out);
    }
    cache.last_output = current;

    // final forward state is the last row's forward half; the backward
    // direction finishes at time 0, so its final state sits in row 0
    const Index t_last = current.rows() - 1;
    cache.pooled.resize(2 * hidden);
    cache.pooled.head(hidden) = current.row(t_last).head(hidden).transpose();
    cache.pooled.tail(hidden) = current.row(0).tail(hidden).transpose();

    const Vector logits = params.w_out.transpose() * cache.pooled + params.b_out;
    cache.probs = sigmoid(logits);
    return cache.probs;
}

double dataset_metrics(const NetworkParams& params, const NetworkConfig& cfg,
                       const ExampleSet& set, double& accuracy_out) {
    double loss_sum = 0.0;
    Index correct = 0;
    for (const auto& ex : set) {
        const Vector probs = forward(params, cfg, ex.features, Mode::infer);
        loss_sum += loss(probs, ex.label);
        if (argmax(probs) == ex.label) ++correct;
    }
    accuracy_out = static_cast<double>(correct) / static_cast<double>(set.size());
    return loss_sum / static_cast<double>(set.size());
}

void check_examples(const ExampleSet& set, const NetworkConfig& cfg, const char* which) {
    for (const auto& ex : set) {
        if (ex.features.frames.cols() != cfg.input_dim)
            throw ShapeError(std::string(which) + " example '" + ex.features.source_id + "' has " +
                             std::to_string(ex.features.frames.cols()) + " dims, expected " +
                             std::to_string(cfg.input_dim));
        if (ex.label < 0 || ex.label >= cfg.num_classes)
            throw DataError(std::string(which) + " example '" + ex.features.source_id +
                            "' has label " + std::to_string(ex.label) + " outside [0, " +
                            std::to_string(cfg.num_classes) + ")");
    }
}

struct AdamState {
    Vector m, v;
    Index step = 0;
};

void optimizer_step(Vector& theta, const Vector& grad, const TrainConfig& cfg, AdamState& adam) {
    if (cfg.optimizer == Optimizer::sgd) {
        theta -= cfg.learning_rate * grad;
        return;
    }
    ++adam.step;
    adam.m = cfg.adam_beta1 * adam.m + (1.0 - cfg.adam_beta1) * grad;
    adam.v = cfg.adam_beta2 * adam.v + (1.0 - cfg.adam_beta2) * grad.cwiseProduct(grad);
    const double m_corr = 1.0 - std::pow(cfg.adam_beta1, static_cast<double>(adam.step));
    const double v_corr = 1.0 - std::pow(cfg.adam_beta2, static_cast<double>(adam.step));
    theta -= (cfg.learning_rate * (adam.m / m_corr).array() /
              ((adam.v / v_corr).array().sqrt() + cfg.adam_epsilon))
                 .matrix();
}

}  // namespace

void NetworkConfig::validate() const {
    if (input_dim < 1) throw ConfigError("input_dim must be >= 1");
    if (hidden_units < 1) throw ConfigError("hidden_units must be >= 1");
    if (num_bilstm_layers < 1) throw ConfigError("num_bilstm_layers must be >= 1");
    if (!(dropout_rate >= 0.0 && dropout_rate < 1.0))
        throw ConfigError("dropout_rate must lie in [0, 1)");
    if (num_classes < 2) throw ConfigError("num_classes must be >= 2");
}

void TrainConfig::validate() const {
    if (!(learning_rate >= 0.0)) throw ConfigError("learning_rate must be >= 0");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (max_epochs < 1) throw ConfigError("max_epochs must be >= 1");
    if (!(gradient_clip_norm >= 0.0)) throw ConfigError("gradient_clip_norm must be >= 0");
}

NetworkParams zero_params(const NetworkConfig& cfg) {
    cfg.validate();
    NetworkParams p;
    p.layers.resize(static_cast<std::size_t>(cfg.num_bilstm_layers));
    for (Index l = 0; l < cfg.num_bilstm_layers; ++l) {
        const Index in_dim = l == 0 ? cfg.input_dim : 2 * cfg.hidden_units;
        p.layers[static_cast<std::size_t>(l)].fwd = zero_cell(cfg.hidden_units, in_dim);
        p.layers[static_cast<std::size_t>(l)].bwd = zero_cell(cfg.hidden_units, in_dim);
    }
    p.w_out = Matrix::Zero(2 * cfg.hidden_units, cfg.num_classes);
    p.b_out = Vector::Zero(cfg.num_classes);
    return p;
}

NetworkParams init_params(const NetworkConfig& cfg) {
    NetworkParams p = zero_params(cfg);
    std::mt19937_64 rng(cfg.seed);
    for_each_trainable(p, [&](const std::string& name, auto& arr) {
        const bool is_bias = name.find(".b_") != std::string::npos || name == "b_out";
        if (is_bias) {
            // biases start at zero; the forget gate starts open at 1
            if (name.find(".b_f") != std::string::npos) arr.setConstant(1.0);
            return;
        }
        const double fan_in = static_cast<double>(arr.cols());
        const double fan_out = static_cast<double>(arr.rows());
        const double r = std::sqrt(6.0 / (fan_in + fan_out));
        std::uniform_real_distribution<double> dist(-r, r);
        for (Index k = 0; k < arr.size(); ++k) arr.data()[k] = dist(rng);
    });
    return p;
}

Index trainable_count(const NetworkParams& params) {
    Index total = 0;
    for_each_trainable(params, [&](const std::string&, const auto& arr) { total += arr.size(); });
    return total;
}

Vector flatten(const NetworkParams& params) {
    Vector flat(trainable_count(params));
    Index offset = 0;
    for_each_trainable(params, [&](const std::string&, const auto& arr) {
        flat.segment(offset, arr.size()) = Eigen::Map<const Vector>(arr.data(), arr.size());
        offset += arr.size();
    });
    return flat;
}

void unflatten(const Eigen::Ref<const Vector>& flat, NetworkParams& params) {
    if (flat.size() != trainable_count(params))
        throw ShapeError("unflatten: vector length does not match the parameter count");
    Index offset = 0;
    for_each_trainable(params, [&](const std::string&, auto& arr) {
        Eigen::Map<Vector>(arr.data(), arr.size()) = flat.segment(offset, arr.size());
        offset += arr.size();
    });
}

std::pair<Vector, Vector> lstm_cell_step(const LstmCellParams& params,
                                         const Eigen::Ref<const Vector>& x_t,
                                         const Eigen::Ref<const Vector>& h_prev,
                                         const Eigen::Ref<const Vector>& c_prev) {
    const Vector i_t = sigmoid(params.w_i * x_t + params.u_i * h_prev + params.b_i);
    const Vector f_t = sigmoid(params.w_f * x_t + params.u_f * h_prev + params.b_f);
    const Vector g_t = (params.w_g * x_t + params.u_g * h_prev + params.b_g).array().tanh();
    const Vector o_t = sigmoid(params.w_o * x_t + params.u_o * h_prev + params.b_o);
    const Vector c_t = f_t.cwiseProduct(c_prev) + i_t.cwiseProduct(g_t);
    const Vector h_t = o_t.cwiseProduct(c_t.array().tanh().matrix());
    return {h_t, c_t};
}

Matrix bilstm_layer(const LstmCellParams& fwd, const LstmCellParams& bwd,
                    const Eigen::Ref<const Matrix>& sequence) {
    if (sequence.rows() < 1) throw ShapeError("bilstm_layer: empty sequence");
    const Index hidden = fwd.b_i.size();
    const Matrix h_fwd = lstm_forward(fwd, sequence, nullptr);
    const Matrix h_bwd = lstm_forward(bwd, sequence.colwise().reverse(), nullptr);
    Matrix out(sequence.rows(), 2 * hidden);
    out.leftCols(hidden) = h_fwd;
    out.rightCols(hidden) = h_bwd.colwise().reverse();
    return out;
}

Matrix dropout_mask(Index rows, Index cols, double rate, std::mt19937_64& rng) {
    if (!(rate >= 0.0 && rate < 1.0)) throw ConfigError("dropout rate must lie in [0, 1)");
    const double scale = 1.0 / (1.0 - rate);
    std::uniform_real_distribution<double> uniform(0.0, 1.0);
    Matrix mask(rows, cols);
    for (Index i = 0; i < rows; ++i)
        for (Index j = 0; j < cols; ++j) mask(i, j) = uniform(rng) >= rate ? scale : 0.0;
    return mask;
}

Vector forward(const NetworkParams& params, const NetworkConfig& cfg,
               const features::FeatureSequence& features, Mode mode, std::mt19937_64* rng) {
    ForwardCache cache;
    return forward_cached(params, cfg, features, mode, rng, cache);
}

double loss(const Eigen::Ref<const Vector>& probabilities, Index true_label) {
    if (true_label < 0 || true_label >= probabilities.size())
        throw DataError("loss: label " + std::to_string(true_label) + " outside [0, " +
                        std::to_string(probabilities.size()) + ")");
    double total = 0.0;
    for (Index k = 0; k < probabilities.size(); ++k) {
        const double p = std::clamp(probabilities[k], kProbClampLo, kProbClampHi);
        const double y = k == true_label ? 1.0 : 0.0;
        total -= y * std::log(p) + (1.0 - y) * std::log(1.0 - p);
    }
    return total;
}

NetworkParams backward(const NetworkParams& params, const NetworkConfig& cfg,
                       const features::FeatureSequence& features, Index label, Mode mode,
                       std::mt19937_64* rng, double* out_loss) {
    ForwardCache cache;
    forward_cached(params, cfg, features, mode, rng, cache);
    if (out_loss) *out_loss = loss(cache.probs, label);
    if (label < 0 || label >= cfg.num_classes)
        throw DataError("backward: label " + std::to_string(label) + " outside [0, " +
                        std::to_string(cfg.num_classes) + ")");

    NetworkParams grad = zero_params(cfg);
    const Index hidden = cfg.hidden_units;

    // d loss / d logit: p - y while the clamp is inactive, else 0
    Vector dz(cfg.num_classes);
    for (Index k = 0; k < cfg.num_classes; ++k) {
        const double p = cache.probs[k];
        const double y = k == label ? 1.0 : 0.0;
        dz[k] = (p <= kProbClampLo || p >= kProbClampHi) ? 0.0 : p - y;
    }

    grad.w_out = cache.pooled * dz.transpose();
    grad.b_out = dz;
    const Vector d_pooled = params.w_out * dz;

    Matrix d_out = Matrix::Zero(cache.last_output.rows(), 2 * hidden);
    d_out.row(cache.last_output.rows() - 1).head(hidden) = d_pooled.head(hidden).transpose();
    d_out.row(0).tail(hidden) += d_pooled.tail(hidden).transpose();

    for (std::size_t l = params.layers.size(); l-- > 0;) {
        if (cache.masks[l].size() > 0) d_out.array() *= cache.masks[l].array();
        const Matrix d_fwd = d_out.leftCols(hidden);
        const Matrix d_bwd_proc = Matrix(d_out.rightCols(hidden)).colwise().reverse();
        const Matrix input_rev = cache.layer_inputs[l].colwise().reverse();

        const Matrix dx_fwd = lstm_backward(params.layers[l].fwd, cache.layer_inputs[l],
                                            cache.fwd_cache[l], d_fwd, grad.layers[l].fwd);
        const Matrix dx_bwd_proc = lstm_backward(params.layers[l].bwd, input_rev,
                                                 cache.bwd_cache[l], d_bwd_proc,
                                                 grad.layers[l].bwd);
        d_out = dx_fwd + dx_bwd_proc.colwise().reverse();
    }
    return grad;
}

TrainResult train(const ExampleSet& train_set, const ExampleSet& val_set, NetworkConfig net_cfg,
                  const TrainConfig& train_cfg) {
    net_cfg.validate();
    train_cfg.validate();
    if (train_set.empty()) throw ConfigError("train: empty training set");
    check_examples(train_set, net_cfg, "train");
    check_examples(val_set, net_cfg, "validation");

    NetworkParams params = init_params(net_cfg);
    if (net_cfg.standardize) {
        Index total_rows = 0;
        for (const auto& ex : train_set) total_rows += ex.features.frames.rows();
        Matrix pooled(total_rows, net_cfg.input_dim);
        Index at = 0;
        for (const auto& ex : train_set) {
            pooled.middleRows(at, ex.features.frames.rows()) = ex.features.frames;
            at += ex.features.frames.rows();
        }
        params.feature_mean = pooled.colwise().mean().transpose();
        const Matrix centered = pooled.rowwise() - params.feature_mean.transpose();
        params.feature_std =
            (centered.array().square().colwise().sum() / std::max<Index>(1, total_rows - 1))
                .sqrt()
                .transpose()
                .matrix()
                .cwiseMax(1e-8);
    }

    Vector theta = flatten(params);
    AdamState adam;
    adam.m = Vector::Zero(theta.size());
    adam.v = Vector::Zero(theta.size());

    std::mt19937_64 shuffle_rng(util::derive_seed(train_cfg.seed, kShuffleStream));
    std::mt19937_64 dropout_rng(util::derive_seed(train_cfg.seed, kDropoutStream));

    std::vector<Index> order(train_set.size());
    std::iota(order.begin(), order.end(), Index{0});

    TrainResult result;
    double best_val_loss = std::numeric_limits<double>::infinity();
    Index epochs_since_best = 0;

    for (Index epoch = 1; epoch <= train_cfg.max_epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), shuffle_rng);
        for (std::size_t start = 0; start < order.size();
             start += static_cast<std::size_t>(train_cfg.batch_size)) {
            const std::size_t stop =
                std::min(order.size(), start + static_cast<std::size_t>(train_cfg.batch_size));
            Vector grad_sum = Vector::Zero(theta.size());
            double batch_loss = 0.0;
            for (std::size_t k = start; k < stop; ++k) {
                const auto& ex = train_set[static_cast<std::size_t>(order[k])];
                double sample_loss = 0.0;
                const NetworkParams g = backward(params, net_cfg, ex.features, ex.label,
                                                 Mode::train, &dropout_rng, &sample_loss);
                grad_sum += flatten(g);
                batch_loss += sample_loss;
            }
            if (!std::isfinite(batch_loss))
                throw NumericError("training diverged at epoch " + std::to_string(epoch));
            grad_sum /= static_cast<double>(stop - start);
            if (train_cfg.gradient_clip_norm > 0.0) {
                const double norm = grad_sum.norm();
                if (norm > train_cfg.gradient_clip_norm)
                    grad_sum *= train_cfg.gradient_clip_norm / norm;
            }
            optimizer_step(theta, grad_sum, train_cfg, adam);
            unflatten(theta, params);
        }

        EpochStats stats;
        stats.epoch = epoch;
        stats.train_loss = dataset_metrics(params, net_cfg, train_set, stats.train_acc);
        if (val_set.empty()) {
            stats.val_loss = stats.train_loss;
            stats.val_acc = stats.train_acc;
        } else {
            stats.val_loss = dataset_metrics(params, net_cfg, val_set, stats.val_acc);
        }
        if (!std::isfinite(stats.train_loss) || !std::isfinite(stats.val_loss))
            throw NumericError("training diverged at epoch " + std::to_string(epoch));
        result.history.push_back(stats);

        if (stats.val_loss < best_val_loss) {
            best_val_loss = stats.val_loss;
            result.best_epoch = epoch;
            result.params = params;
            epochs_since_best = 0;
        } else {
            ++epochs_since_best;
            if (train_cfg.early_stop_patience > 0 &&
                epochs_since_best >= train_cfg.early_stop_patience)
                break;
        }
    }
    if (result.best_epoch == 0) {  // every epoch had non-improving (e.g. equal) loss
        result.best_epoch = 1;
        result.params = params;
    }
    return result;
}

GridSearchResult grid_search(const GridSearchSpec& spec, const ExampleSet& train_set,
                             const ExampleSet& val_set, const NetworkConfig& base_cfg,
                             const TrainConfig& train_cfg) {
    if (spec.hidden_units.empty() || spec.num_bilstm_layers.empty() || spec.dropout_rate.empty())
        throw ConfigError("grid_search: every candidate list must be nonempty");

    GridSearchResult result;
    for (Index hidden : spec.hidden_units) {
        for (Index layers : spec.num_bilstm_layers) {
            for (double rate : spec.dropout_rate) {
                NetworkConfig cfg = base_cfg;
                cfg.hidden_units = hidden;
                cfg.num_bilstm_layers = layers;
                cfg.dropout_rate = rate;

                GridCell cell;
                cell.config = cfg;
                cell.parameter_count = trainable_count(zero_params(cfg));
                try {
                    const TrainResult run = train(train_set, val_set, cfg, train_cfg);
                    cell.best_train_loss = std::numeric_limits<double>::infinity();
                    cell.best_val_loss = std::numeric_limits<double>::infinity();
                    for (const auto& st : run.history) {
                        cell.best_train_loss = std::min(cell.best_train_loss, st.train_loss);
                        cell.best_train_acc = std::max(cell.best_train_acc, st.train_acc);
                        cell.best_val_loss = std::min(cell.best_val_loss, st.val_loss);
                        cell.best_val_acc = std::max(cell.best_val_acc, st.val_acc);
                    }
                } catch (const NumericError&) {
                    cell.diverged = true;
                    cell.best_train_loss = std::numeric_limits<double>::infinity();
                    cell.best_val_loss = std::numeric_limits<double>::infinity();
                }
                result.cells.push_back(std::move(cell));
            }
        }
    }

    // lower is better for loss, higher for accuracy; ties fall to fewer
    // parameters, then lower dropout, then declaration order
    const GridCell* best = nullptr;
    for (const auto& cell : result.cells) {
        if (best == nullptr) {
            best = &cell;
            continue;
        }
        double lhs, rhs;
        if (spec.metric == GridMetric::training_loss) {
            lhs = -cell.best_train_loss;
            rhs = -best->best_train_loss;
        } else {
            lhs = cell.diverged ? -std::numeric_limits<double>::infinity() : cell.best_val_acc;
            rhs = best->diverged ? -std::numeric_limits<double>::infinity() : best->best_val_acc;
        }
        if (lhs > rhs)
            best = &cell;
        else if (lhs == rhs) {
            if (cell.parameter_count < best->parameter_count)
                best = &cell;
            else if (cell.parameter_count == best->parameter_count &&
                     cell.config.dropout_rate < best->config.dropout_rate)
                best = &cell;
        }
    }
    result.best_config = best->config;
    return result;
}

void save_checkpoint(const NetworkParams& params, const NetworkConfig& cfg,
                     const std::filesystem::path& path, const container::Json& extra) {
    container::Blob blob;
    blob.meta = container::Json::object();
    blob.meta["format"] = "bilstm-checkpoint";
    blob.meta["network"] = container::Json{{"input_dim", cfg.input_dim},
                                           {"hidden_units", cfg.hidden_units},
                                           {"num_bilstm_layers", cfg.num_bilstm_layers},
                                           {"dropout_rate", cfg.dropout_rate},
                                           {"num_classes", cfg.num_classes},
                                           {"seed", cfg.seed},
                                           {"standardize", cfg.standardize}};
    blob.meta["extra"] = extra;

    for_each_trainable(params, [&](const std::string& name, const auto& arr) {
        blob.arrays.push_back({name, Matrix(arr)});
    });
    if (params.feature_mean.size() > 0) {
        blob.arrays.push_back({"feature_mean", Matrix(params.feature_mean)});
        blob.arrays.push_back({"feature_std", Matrix(params.feature_std)});
    }
    container::write_blob(path, blob);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    const container::Blob blob = container::read_blob(path);
    if (!blob.meta.contains("network"))
        throw DataError("not a checkpoint (no network block): " + path.string());
    const auto& netj = blob.meta["network"];

    Checkpoint ckpt;
    try {
        ckpt.config.input_dim = netj.at("input_dim").get<Index>();
        ckpt.config.hidden_units = netj.at("hidden_units").get<Index>();
        ckpt.config.num_bilstm_layers = netj.at("num_bilstm_layers").get<Index>();
        ckpt.config.dropout_rate = netj.at("dropout_rate").get<double>();
        ckpt.config.num_classes = netj.at("num_classes").get<Index>();
        ckpt.config.seed = netj.at("seed").get<std::uint64_t>();
        ckpt.config.standardize = netj.at("standardize").get<bool>();
    } catch (const container::Json::exception& e) {
        throw DataError("malformed checkpoint network block: " + std::string(e.what()));
    }
    ckpt.extra = blob.meta.contains("extra") ? blob.meta["extra"] : container::Json::object();

    std::map<std::string, const Matrix*> by_name;
    for (const auto& arr : blob.arrays) by_name[arr.name] = &arr.data;

    ckpt.params = zero_params(ckpt.config);
    for_each_trainable(ckpt.params, [&](const std::string& name, auto& arr) {
        const auto it = by_name.find(name);
        if (it == by_name.end()) throw ShapeError("checkpoint missing array '" + name + "'");
        if (it->second->rows() != arr.rows() || it->second->cols() != arr.cols())
            throw ShapeError("checkpoint array '" + name + "' has shape " +
                             std::to_string(it->second->rows()) + "x" +
                             std::to_string(it->second->cols()) + ", expected " +
                             std::to_string(arr.rows()) + "x" + std::to_string(arr.cols()));
        arr = *it->second;
    });
    if (ckpt.config.standardize) {
        const auto mean_it = by_name.find("feature_mean");
        const auto std_it = by_name.find("feature_std");
        if (mean_it == by_name.end() || std_it == by_name.end())
            throw ShapeError("standardizing checkpoint lacks feature statistics");
        if (mean_it->second->cols() != 1 || std_it->second->cols() != 1 ||
            mean_it->second->rows() != ckpt.config.input_dim ||
            std_it->second->rows() != ckpt.config.input_dim)
            throw ShapeError("checkpoint feature statistics have the wrong shape");
        ckpt.params.feature_mean = mean_it->second->col(0);
        ckpt.params.feature_std = std_it->second->col(0);
    }
    return ckpt;
}

void write_history_csv(const std::filesystem::path& path, const std::vector<EpochStats>& history) {
    std::ofstream os(path);
    if (!os) throw DataError("cannot create history file: " + path.string());
    os << "epoch,train_loss,train_acc,val_loss,val_acc\n";
    for (const auto& st : history) {
        os << st.epoch << ',' << util::format_double(st.train_loss) << ','
           << util::format_double(st.train_acc) << ',' << util::format_double(st.val_loss) << ','
           << util::format_double(st.val_acc) << "\n";
    }
    if (!os) throw DataError("failed writing history file: " + path.string());
}

void write_grid_csv(const std::filesystem::path& path, const GridSearchResult& result) {
    std::ofstream os(path);
    if (!os) throw DataError("cannot create grid table: " + path.string());
    os << "hidden_units,num_bilstm_layers,dropout_rate,parameter_count,best_train_loss,"
          "best_train_acc,best_val_loss,best_val_acc,diverged,selected\n";
    for (const auto& cell : result.cells) {
        const auto& c = cell.config;
        const bool selected = c.hidden_units == result.best_config.hidden_units &&
                              c.num_bilstm_layers == result.best_config.num_bilstm_layers &&
                              c.dropout_rate == result.best_config.dropout_rate;
        os << c.hidden_units << ',' << c.num_bilstm_layers << ','
           << util::format_double(c.dropout_rate) << ',' << cell.parameter_count << ','
           << util::format_double(cell.best_train_loss) << ','
           << util::format_double(cell.best_train_acc) << ','
           << util::format_double(cell.best_val_loss) << ','
           << util::format_double(cell.best_val_acc) << ',' << (cell.diverged ? 1 : 0) << ','
           << (selected ? 1 : 0) << "\n";
    }
    if (!os) throw DataError("failed writing grid table: " + path.string());
}

Index argmax(const Eigen::Ref<const Vector>& scores) {
    if (scores.size() == 0) throw ShapeError("argmax of an empty vector");
    Index best = 0;
    for (Index k = 1; k < scores.size(); ++k)
        if (scores[k] > scores[best]) best = k;
    return best;
}

}  // namespace coughlab::net
