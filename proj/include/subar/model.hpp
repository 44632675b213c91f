#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "subar/adam.hpp"
#include "subar/binning.hpp"
#include "subar/common.hpp"
#include "subar/features.hpp"
#include "subar/lstm.hpp"
#include "subar/schedule.hpp"
#include "subar/series.hpp"

namespace subar {

// ---------------------------------------------------------------------------
// Model configuration and construction
// ---------------------------------------------------------------------------

struct ModelConfig {
    std::size_t K = 1;
    Ordering ordering = regular_ordering();
    GenerationMode mode = GenerationMode::alternating;
    std::size_t layers = 1;
    std::size_t hidden = 64;
    std::size_t levels = 3;
    std::size_t bins = 12;
    std::size_t seasonal_bins = 64;
    std::size_t lag_period = 0;       // 0 disables the lag feature block
    std::size_t extra_covariates = 0; // dataset-supplied per-step dims
    double interlayer_dropout = 0.001;
    double input_dropout = 0.0;       // applied to input features in training
    std::size_t backfill_standard_block = 0; // reverse K-blocks before a standard model
    std::size_t low2high_K = 0; // >=2: high-frequency half of the hybrid (adds an input slot)

    /// Head emits the per-level bin logits plus two edge-adjustment logits
    /// folded into the coarsest level's outermost bins.
    std::size_t head_width() const { return levels * bins + 2; }

    std::size_t value_width() const { return value_block_width(levels, bins); }

    std::size_t input_width_for(std::size_t k) const {
        std::size_t slots = value_slots_for(k, K, mode);
        if (low2high_K >= 2) slots += 1; // upcoming low-frequency value
        return slots * value_width() + (lag_period > 0 ? value_width() : 0) +
               seasonal_block_width(seasonal_bins) + extra_covariates;
    }
};

/// The full model: K per-sub-series stacks (independent parameters), one
/// shared binning, plus the configuration that fixes the wiring.
struct SutraNetModel {
    ModelConfig config;
    BinningSpec binning;
    std::vector<StackParams> sub_models;
    bool trained = false;

    static SutraNetModel create(const ModelConfig& config, const BinningSpec& binning,
                                std::uint64_t seed) {
        require(config.K >= 1, "model needs K >= 1");
        require(binning.levels == config.levels && binning.bins == config.bins,
                "binning shape does not match model config");
        SutraNetModel m;
        m.config = config;
        m.binning = binning;
        for (std::size_t k = 0; k < config.K; ++k) {
            StackParams stack = StackParams::zeros(
                config.input_width_for(k), config.hidden, config.layers, config.head_width(),
                config.layers > 1 ? config.interlayer_dropout : 0.0);
            Rng rng(Rng::mix(seed ^ (0x517cc1b727220a95ULL * (k + 1))));
            stack.init(rng);
            m.sub_models.push_back(std::move(stack));
        }
        return m;
    }

    std::size_t param_count() const {
        std::size_t n = 0;
        for (const StackParams& s : sub_models) n += s.param_count();
        return n;
    }
};

// ---------------------------------------------------------------------------
// Head adapter: raw head output <-> per-level logits
// ---------------------------------------------------------------------------

inline C2FLogits c2f_logits_from_head(const Vec& head, const BinningSpec& spec) {
    C2FLogits logits;
    logits.levels.assign(spec.levels, std::vector<double>(spec.bins));
    for (std::size_t l = 0; l < spec.levels; ++l) {
        for (std::size_t b = 0; b < spec.bins; ++b) {
            logits.levels[l][b] = head[static_cast<Eigen::Index>(l * spec.bins + b)];
        }
    }
    // Edge-adjustment logits modulate the bins that absorb out-of-extent mass.
    logits.levels[0][0] += head[static_cast<Eigen::Index>(spec.levels * spec.bins)];
    logits.levels[0][spec.bins - 1] += head[static_cast<Eigen::Index>(spec.levels * spec.bins + 1)];
    return logits;
}

/// Gradient of c2far_nll with respect to the raw head output.
inline Vec nll_head_gradient(const C2FLogits& logits, const C2FEncoding& target,
                             const BinningSpec& spec) {
    Vec dhead = Vec::Zero(static_cast<Eigen::Index>(spec.levels * spec.bins + 2));
    const std::vector<std::size_t> idx = clamped_target_indices(target, spec);
    for (std::size_t l = 0; l < spec.levels; ++l) {
        const std::vector<double> p = softmax(logits.levels[l]);
        for (std::size_t b = 0; b < spec.bins; ++b) {
            dhead[static_cast<Eigen::Index>(l * spec.bins + b)] =
                p[b] - (b == idx[l] ? 1.0 : 0.0);
        }
    }
    dhead[static_cast<Eigen::Index>(spec.levels * spec.bins)] =
        dhead[0];
    dhead[static_cast<Eigen::Index>(spec.levels * spec.bins + 1)] =
        dhead[static_cast<Eigen::Index>(spec.bins - 1)];
    return dhead;
}

// ---------------------------------------------------------------------------
// Window runner: value bookkeeping and feature assembly for one window
// ---------------------------------------------------------------------------

/// Holds the per-sub-series scales and realized values of one window while a
/// teacher-forced pass or a sampling rollout walks it. Values are stored in
/// the real (unnormalized) scale; every encoding normalizes with the target
/// sub-model's scale.
class WindowRunner {
public:
    WindowRunner(const SutraNetModel& model, const Window& window, std::size_t horizon_steps)
        : model_(&model), window_(&window) {
        const ModelConfig& cfg = model.config;
        require(window.T() % cfg.K == 0,
                "conditioning length ", window.T(), " not divisible by K=", cfg.K);
        require(horizon_steps % cfg.K == 0,
                "horizon ", horizon_steps, " not divisible by K=", cfg.K);
        require(window.N() == 0 || window.N() == horizon_steps,
                "window prediction length ", window.N(), " != horizon ", horizon_steps);
        if (cfg.extra_covariates > 0) {
            require(window.covariates.size() >= window.T() + horizon_steps,
                    "window lacks covariates for the requested horizon");
        }
        T_tilde_ = window.T() / cfg.K;
        N_tilde_ = horizon_steps / cfg.K;
        const std::size_t steps = T_tilde_ + N_tilde_;
        realized_.assign(cfg.K, std::vector<double>(steps, 0.0));
        known_.assign(cfg.K, std::vector<char>(steps, 0));
        for (std::size_t k = 0; k < cfg.K; ++k) {
            for (std::size_t t = 0; t < steps; ++t) {
                const std::size_t pos = t * cfg.K + cfg.ordering.offset_of(k, cfg.K);
                if (pos < window.total()) {
                    realized_[k][t] = window.value_at(pos);
                    known_[k][t] = 1;
                }
            }
        }
        scales_.reserve(cfg.K);
        for (std::size_t k = 0; k < cfg.K; ++k) {
            std::vector<double> cond(realized_[k].begin(),
                                     realized_[k].begin() + static_cast<std::ptrdiff_t>(T_tilde_));
            scales_.push_back(minmax_fit(cond));
        }
    }

    std::size_t T_tilde() const { return T_tilde_; }
    std::size_t N_tilde() const { return N_tilde_; }
    std::size_t total_steps() const { return T_tilde_ + N_tilde_; }
    const ScaleParams& scale(std::size_t k) const { return scales_[k]; }

    double realized(std::size_t k, std::size_t t) const { return realized_[k][t]; }
    bool is_known(std::size_t k, std::size_t t) const { return known_[k][t] != 0; }

    void set_realized(std::size_t k, std::size_t t, double value) {
        realized_[k][t] = value;
        known_[k][t] = 1;
    }

    /// Forgets all prediction-range values; used between sampling rollouts.
    void reset_prediction() {
        for (std::size_t k = 0; k < model_->config.K; ++k) {
            for (std::size_t t = T_tilde_; t < total_steps(); ++t) known_[k][t] = 0;
        }
    }

    std::size_t target_position(std::size_t k, std::size_t t) const {
        return t * model_->config.K + model_->config.ordering.offset_of(k, model_->config.K);
    }

    /// Normalized target the sub-model trains against at (k, t).
    C2FEncoding target_encoding(std::size_t k, std::size_t t) const {
        return c2f_encode(scales_[k].apply(realized_[k][t]), model_->binning);
    }

    /// Assembles the input features of sub-step (k, t). All value inputs are
    /// normalized with sub-series k's scale. Expanding ranges trades the
    /// thermometer fast path for one-entry-per-dim output (needed by input
    /// dropout).
    void build_features(std::size_t k, std::size_t t, SparseFeatures& out,
                        bool expand_ranges = false) const {
        const ModelConfig& cfg = model_->config;
        const std::size_t vw = cfg.value_width();
        out.clear();
        out.width = cfg.input_width_for(k);
        const std::vector<InputRef> refs =
            input_refs_for(k, static_cast<std::ptrdiff_t>(t), cfg.K, cfg.mode);
        for (std::size_t slot = 0; slot < refs.size(); ++slot) {
            append_value_block(value_at(refs[slot], k), model_->binning, slot * vw, out,
                               expand_ranges);
        }
        std::size_t base = refs.size() * vw;
        if (cfg.lag_period > 0) {
            append_value_block(lag_value(k, t), model_->binning, base, out, expand_ranges);
            base += vw;
        }
        const std::size_t pos = target_position(k, t);
        const SeasonalPhase phase = seasonal_phase(
            window_->start_epoch + static_cast<std::int64_t>(pos) * window_->freq_seconds,
            window_->freq_seconds);
        append_seasonal_block(phase, cfg.seasonal_bins, base, out);
        base += seasonal_block_width(cfg.seasonal_bins);
        if (cfg.extra_covariates > 0) {
            const std::vector<double>& cov = window_->covariates[pos];
            require(cov.size() == cfg.extra_covariates, "covariate row at position ", pos,
                    " has ", cov.size(), " dims, expected ", cfg.extra_covariates);
            for (std::size_t i = 0; i < cov.size(); ++i) {
                if (cov[i] != 0.0) {
                    out.entries.push_back(
                        {static_cast<std::uint32_t>(base + i), cov[i]});
                }
            }
        }
    }

private:
    MaybeValue value_at(const InputRef& ref, std::size_t target_k) const {
        if (ref.missing()) return MaybeValue::none();
        const auto t = static_cast<std::size_t>(ref.time);
        if (!is_known(ref.sub_series, t)) return MaybeValue::none();
        return MaybeValue::of(scales_[target_k].apply(realized_[ref.sub_series][t]));
    }

    MaybeValue lag_value(std::size_t k, std::size_t t) const {
        const ModelConfig& cfg = model_->config;
        const std::ptrdiff_t pos = static_cast<std::ptrdiff_t>(target_position(k, t)) -
                                   static_cast<std::ptrdiff_t>(cfg.lag_period);
        if (pos < 0) return MaybeValue::none();
        const std::size_t offset = static_cast<std::size_t>(pos) % cfg.K;
        std::size_t owner = cfg.ordering.kind == OrderingKind::regular ? offset : cfg.K - 1 - offset;
        const std::size_t tt = static_cast<std::size_t>(pos) / cfg.K;
        if (!is_known(owner, tt)) return MaybeValue::none();
        return MaybeValue::of(scales_[k].apply(realized_[owner][tt]));
    }

    const SutraNetModel* model_;
    const Window* window_;
    std::size_t T_tilde_ = 0;
    std::size_t N_tilde_ = 0;
    std::vector<ScaleParams> scales_;
    std::vector<std::vector<double>> realized_;
    std::vector<std::vector<char>> known_;
};

// ---------------------------------------------------------------------------
// Teacher-forced likelihood (and its gradients)
// ---------------------------------------------------------------------------

struct SubModelLoss {
    double nll = 0.0;
    std::size_t steps = 0;
};

/// Teacher-forced NLL of sub-series k over one window: every conditioning
/// input comes from true values, and the prediction-range cross-entropies
/// are summed. When `grads` is given, the exact gradients of (nll *
/// loss_scale) are accumulated into it.
inline SubModelLoss sub_model_teacher_nll(const SutraNetModel& model, const WindowRunner& runner,
                                          std::size_t k, StackParams* grads = nullptr,
                                          double loss_scale = 1.0, Rng* dropout_rng = nullptr,
                                          const Mat* prefix0 = nullptr) {
    const ModelConfig& cfg = model.config;
    const StackParams& stack = model.sub_models[k];
    const bool train_mode = grads != nullptr;
    const bool dropout = train_mode && cfg.input_dropout > 0.0;
    require(!dropout || dropout_rng != nullptr, "input dropout needs an RNG");
    SequenceRun run(stack, prefix0, train_mode, dropout_rng);
    SparseFeatures features;
    std::vector<std::pair<std::size_t, Vec>> dhead;
    SubModelLoss loss;
    for (std::size_t t = 0; t < runner.total_steps(); ++t) {
        runner.build_features(k, t, features, dropout);
        if (dropout) input_dropout_sparse(features, cfg.input_dropout, *dropout_rng);
        const bool is_prediction = t >= runner.T_tilde();
        const Vec& head = run.step(features, is_prediction);
        if (!is_prediction) continue;
        const C2FLogits logits = c2f_logits_from_head(head, model.binning);
        const C2FEncoding target = runner.target_encoding(k, t);
        const double step_nll = c2far_nll(logits, target, model.binning);
        require(std::isfinite(step_nll), "non-finite loss for sub-series ", k,
                " at prediction step ", t - runner.T_tilde());
        loss.nll += step_nll;
        loss.steps += 1;
        if (grads != nullptr) {
            dhead.emplace_back(run.steps() - 1,
                               (loss_scale * nll_head_gradient(logits, target, model.binning)).eval());
        }
    }
    if (grads != nullptr) run.backward(dhead, *grads);
    return loss;
}

/// Total teacher-forced NLL over all sub-series of one window (Eq.-style sum
/// of per-sub-series prediction-range terms).
inline double teacher_forced_nll(const SutraNetModel& model, const Window& window) {
    require(window.N() > 0, "teacher-forced NLL needs a populated prediction range");
    WindowRunner runner(model, window, window.N());
    double total = 0.0;
    for (std::size_t k = 0; k < model.config.K; ++k) {
        total += sub_model_teacher_nll(model, runner, k).nll;
    }
    return total;
}

// ---------------------------------------------------------------------------
// Standard single-model pipeline
//
// The plain autoregressive forecaster (one network walking the original
// series step by step). Written as a direct loop so the generalized
// schedule machinery can be checked against it bit for bit at K=1.
// ---------------------------------------------------------------------------

inline double standard_teacher_nll(const SutraNetModel& model, const Window& window) {
    require(model.config.K == 1, "the standard pipeline is the K=1 configuration");
    require(window.N() > 0, "teacher-forced NLL needs a populated prediction range");
    const ModelConfig& cfg = model.config;
    const ScaleParams scale = minmax_fit(window.conditioning);
    const StackParams& stack = model.sub_models[0];
    SequenceRun run(stack);
    SparseFeatures features;
    const std::size_t vw = cfg.value_width();
    double total = 0.0;
    for (std::size_t t = 0; t < window.total(); ++t) {
        features.clear();
        features.width = cfg.input_width_for(0);
        const MaybeValue prev = t == 0 ? MaybeValue::none()
                                       : MaybeValue::of(scale.apply(window.value_at(t - 1)));
        append_value_block(prev, model.binning, 0, features);
        std::size_t base = vw;
        if (cfg.lag_period > 0) {
            const MaybeValue lag =
                t >= cfg.lag_period
                    ? MaybeValue::of(scale.apply(window.value_at(t - cfg.lag_period)))
                    : MaybeValue::none();
            append_value_block(lag, model.binning, base, features);
            base += vw;
        }
        const SeasonalPhase phase = seasonal_phase(
            window.start_epoch + static_cast<std::int64_t>(t) * window.freq_seconds,
            window.freq_seconds);
        append_seasonal_block(phase, cfg.seasonal_bins, base, features);
        const bool is_prediction = t >= window.T();
        const Vec& head = run.step(features, is_prediction);
        if (!is_prediction) continue;
        const C2FLogits logits = c2f_logits_from_head(head, model.binning);
        const C2FEncoding target = c2f_encode(scale.apply(window.value_at(t)), model.binning);
        total += c2far_nll(logits, target, model.binning);
    }
    return total;
}

// ---------------------------------------------------------------------------
// Spec-level convenience: exact BPTT gradients for one sequence
// ---------------------------------------------------------------------------

/// Gradients of the summed prediction-range NLL of a single stack over an
/// explicit input/target sequence. Targets are given for the last
/// `targets.size()` steps.
inline StackParams bptt_gradients(const StackParams& stack, const BinningSpec& spec,
                                  const std::vector<SparseFeatures>& inputs,
                                  const std::vector<C2FEncoding>& targets,
                                  double loss_scale = 1.0, double* nll_out = nullptr) {
    require(targets.size() <= inputs.size(), "more targets than steps");
    const std::size_t first_loss = inputs.size() - targets.size();
    SequenceRun run(stack);
    std::vector<std::pair<std::size_t, Vec>> dhead;
    double nll = 0.0;
    for (std::size_t t = 0; t < inputs.size(); ++t) {
        const bool want = t >= first_loss;
        const Vec& head = run.step(inputs[t], want);
        if (!want) continue;
        const C2FLogits logits = c2f_logits_from_head(head, spec);
        const C2FEncoding& target = targets[t - first_loss];
        nll += c2far_nll(logits, target, spec);
        dhead.emplace_back(t, (loss_scale * nll_head_gradient(logits, target, spec)).eval());
    }
    StackParams grads = stack.zeros_like();
    run.backward(dhead, grads);
    if (nll_out != nullptr) *nll_out = nll;
    return grads;
}

} // namespace subar
