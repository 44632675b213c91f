#pragma once

#include <algorithm>
#include <future>
#include <thread>
#include <vector>

#include "subar/model.hpp"

namespace subar {

// ---------------------------------------------------------------------------
// Forecast distribution
// ---------------------------------------------------------------------------

/// Monte-Carlo forecast: one merged trajectory per rollout, in the original
/// value order and scale, plus lazily-derived empirical quantiles.
class ForecastDistribution {
public:
    ForecastDistribution(std::vector<std::vector<double>> samples, std::size_t horizon)
        : samples_(std::move(samples)), horizon_(horizon) {
        require(!samples_.empty(), "forecast distribution needs at least one sample");
        for (const auto& row : samples_) {
            require(row.size() == horizon_, "sample row length ", row.size(),
                    " != horizon ", horizon_);
        }
    }

    std::size_t n_rollouts() const { return samples_.size(); }
    std::size_t horizon() const { return horizon_; }
    const std::vector<std::vector<double>>& samples() const { return samples_; }

    /// Linearly-interpolated empirical quantile at one horizon step.
    double quantile(double alpha, std::size_t h) const {
        require(alpha >= 0.0 && alpha <= 1.0, "quantile level ", alpha, " outside [0,1]");
        require(h < horizon_, "horizon step ", h, " out of range ", horizon_);
        ensure_sorted();
        const std::vector<double>& xs = sorted_[h];
        const double pos = alpha * static_cast<double>(xs.size() - 1);
        const std::size_t i = static_cast<std::size_t>(std::floor(pos));
        if (i + 1 >= xs.size()) return xs.back();
        const double frac = pos - static_cast<double>(i);
        return xs[i] + frac * (xs[i + 1] - xs[i]);
    }

    /// Per-horizon values of one quantile level.
    std::vector<double> quantile_track(double alpha) const {
        std::vector<double> out(horizon_);
        for (std::size_t h = 0; h < horizon_; ++h) out[h] = quantile(alpha, h);
        return out;
    }

    std::vector<std::vector<double>> quantile_tracks(const std::vector<double>& alphas) const {
        std::vector<std::vector<double>> out;
        out.reserve(alphas.size());
        for (double a : alphas) out.push_back(quantile_track(a));
        return out;
    }

private:
    void ensure_sorted() const {
        if (!sorted_.empty()) return;
        sorted_.assign(horizon_, std::vector<double>(samples_.size()));
        for (std::size_t h = 0; h < horizon_; ++h) {
            for (std::size_t r = 0; r < samples_.size(); ++r) sorted_[h][r] = samples_[r][h];
            std::sort(sorted_[h].begin(), sorted_[h].end());
        }
    }

    std::vector<std::vector<double>> samples_;
    std::size_t horizon_;
    mutable std::vector<std::vector<double>> sorted_;
};

/// Per-horizon empirical quantiles for a list of levels (monotone in alpha).
inline std::vector<std::vector<double>> quantiles(const ForecastDistribution& dist,
                                                  const std::vector<double>& alphas) {
    return dist.quantile_tracks(alphas);
}

// ---------------------------------------------------------------------------
// SutraNet sampling
// ---------------------------------------------------------------------------

namespace detail {

/// Conditioning-range states of every sub-model, computed once per window and
/// cloned into each rollout.
struct EncodedStates {
    std::vector<std::vector<CellState>> per_sub_model;
};

inline EncodedStates encode_conditioning(const SutraNetModel& model, const WindowRunner& runner,
                                         const std::vector<Mat>& prefixes) {
    EncodedStates enc;
    enc.per_sub_model.resize(model.config.K);
    SparseFeatures features;
    for (std::size_t k = 0; k < model.config.K; ++k) {
        StackStepper stepper(model.sub_models[k], &prefixes[k]);
        for (std::size_t t = 0; t < runner.T_tilde(); ++t) {
            runner.build_features(k, t, features);
            stepper.step(features);
        }
        enc.per_sub_model[k] = stepper.states();
    }
    return enc;
}

/// One sampled trajectory; fills the runner's prediction range and returns
/// the merged horizon values in original order.
inline std::vector<double> sample_rollout(const SutraNetModel& model, WindowRunner& runner,
                                          const std::vector<ScheduleEntry>& schedule,
                                          const EncodedStates& encoded,
                                          const std::vector<Mat>& prefixes, Rng& rng) {
    const ModelConfig& cfg = model.config;
    std::vector<StackStepper> steppers;
    steppers.reserve(cfg.K);
    for (std::size_t k = 0; k < cfg.K; ++k) {
        steppers.emplace_back(model.sub_models[k], &prefixes[k]);
        steppers.back().set_states(encoded.per_sub_model[k]);
    }
    runner.reset_prediction();
    SparseFeatures features;
    const std::size_t T = runner.T_tilde() * cfg.K;
    std::vector<double> merged(runner.N_tilde() * cfg.K, 0.0);
    for (const ScheduleEntry& e : schedule) {
        runner.build_features(e.sub_series, e.time, features);
        const Vec& head = steppers[e.sub_series].step(features);
        const C2FLogits logits = c2f_logits_from_head(head, model.binning);
        const double normalized = c2far_sample(fixed_level_logits(logits), model.binning, rng);
        const double value = runner.scale(e.sub_series).invert(normalized);
        runner.set_realized(e.sub_series, e.time, value);
        merged[e.target_position - T] = value;
    }
    return merged;
}

} // namespace detail

/// Monte-Carlo forecast: encodes the conditioning range once, then draws
/// n_rollouts coherent trajectories by walking the generation schedule and
/// feeding every sampled value back as an autoregressive input. Rollouts are
/// deterministic per (seed, rollout index) and run in parallel chunks.
inline ForecastDistribution forecast(const SutraNetModel& model, const Window& window,
                                     std::size_t horizon, std::size_t n_rollouts,
                                     std::uint64_t seed, std::size_t n_threads = 1) {
    require(model.trained, "model has not been trained");
    require(n_rollouts >= 1, "need at least one rollout");
    const ModelConfig& cfg = model.config;
    WindowRunner base_runner(model, window, horizon);
    std::vector<Mat> prefixes;
    prefixes.reserve(cfg.K);
    for (std::size_t k = 0; k < cfg.K; ++k) {
        prefixes.push_back(build_input_prefix(model.sub_models[k].layers[0]));
    }
    const detail::EncodedStates encoded = detail::encode_conditioning(model, base_runner, prefixes);
    const std::vector<ScheduleEntry> schedule = build_schedule(
        cfg.K, cfg.ordering, cfg.mode, base_runner.T_tilde(), base_runner.N_tilde());
    const Rng base_rng(seed);

    std::vector<std::vector<double>> samples(n_rollouts);
    auto run_chunk = [&](std::size_t first, std::size_t last) {
        WindowRunner runner = base_runner;
        for (std::size_t r = first; r < last; ++r) {
            Rng rng = base_rng.fork(r);
            samples[r] = detail::sample_rollout(model, runner, schedule, encoded, prefixes, rng);
        }
    };
    if (n_threads <= 1 || n_rollouts < 4) {
        run_chunk(0, n_rollouts);
    } else {
        const std::size_t chunk = (n_rollouts + n_threads - 1) / n_threads;
        std::vector<std::future<void>> futures;
        for (std::size_t first = 0; first < n_rollouts; first += chunk) {
            const std::size_t last = std::min(first + chunk, n_rollouts);
            futures.push_back(std::async(std::launch::async, run_chunk, first, last));
        }
        for (auto& f : futures) f.get();
    }
    return ForecastDistribution(std::move(samples), horizon);
}

/// Deterministic decode: at every step take the most probable bin at each
/// level and emit the midpoint of the selected finest cell.
inline std::vector<double> forecast_greedy(const SutraNetModel& model, const Window& window,
                                           std::size_t horizon) {
    require(model.trained, "model has not been trained");
    const ModelConfig& cfg = model.config;
    WindowRunner runner(model, window, horizon);
    std::vector<Mat> prefixes;
    for (std::size_t k = 0; k < cfg.K; ++k) {
        prefixes.push_back(build_input_prefix(model.sub_models[k].layers[0]));
    }
    const detail::EncodedStates encoded = detail::encode_conditioning(model, runner, prefixes);
    std::vector<StackStepper> steppers;
    for (std::size_t k = 0; k < cfg.K; ++k) {
        steppers.emplace_back(model.sub_models[k], &prefixes[k]);
        steppers.back().set_states(encoded.per_sub_model[k]);
    }
    runner.reset_prediction();
    const std::vector<ScheduleEntry> schedule =
        build_schedule(cfg.K, cfg.ordering, cfg.mode, runner.T_tilde(), runner.N_tilde());
    SparseFeatures features;
    const std::size_t T = runner.T_tilde() * cfg.K;
    std::vector<double> merged(horizon, 0.0);
    for (const ScheduleEntry& e : schedule) {
        runner.build_features(e.sub_series, e.time, features);
        const Vec& head = steppers[e.sub_series].step(features);
        const C2FLogits logits = c2f_logits_from_head(head, model.binning);
        C2FEncoding enc;
        for (std::size_t l = 0; l < model.binning.levels; ++l) {
            const auto& lv = logits.levels[l];
            enc.indices.push_back(static_cast<std::size_t>(
                std::max_element(lv.begin(), lv.end()) - lv.begin()));
        }
        double lo, hi;
        cell_bounds(model.binning, enc, lo, hi);
        const double value = runner.scale(e.sub_series).invert(0.5 * (lo + hi));
        runner.set_realized(e.sub_series, e.time, value);
        merged[e.target_position - T] = value;
    }
    return merged;
}

/// Standard-pipeline greedy decode (direct loop, K=1), the reference the
/// schedule-driven path is checked against.
inline std::vector<double> standard_forecast_greedy(const SutraNetModel& model,
                                                    const Window& window, std::size_t horizon) {
    require(model.config.K == 1, "the standard pipeline is the K=1 configuration");
    require(model.trained, "model has not been trained");
    const ModelConfig& cfg = model.config;
    const ScaleParams scale = minmax_fit(window.conditioning);
    const Mat prefix = build_input_prefix(model.sub_models[0].layers[0]);
    StackStepper stepper(model.sub_models[0], &prefix);
    SparseFeatures features;
    const std::size_t vw = cfg.value_width();
    std::vector<double> realized(window.T() + horizon, 0.0);
    for (std::size_t t = 0; t < window.T(); ++t) realized[t] = window.value_at(t);
    std::vector<double> out(horizon, 0.0);
    for (std::size_t t = 0; t < window.T() + horizon; ++t) {
        features.clear();
        features.width = cfg.input_width_for(0);
        const MaybeValue prev =
            t == 0 ? MaybeValue::none() : MaybeValue::of(scale.apply(realized[t - 1]));
        append_value_block(prev, model.binning, 0, features);
        std::size_t base = vw;
        if (cfg.lag_period > 0) {
            const MaybeValue lag = t >= cfg.lag_period
                                       ? MaybeValue::of(scale.apply(realized[t - cfg.lag_period]))
                                       : MaybeValue::none();
            append_value_block(lag, model.binning, base, features);
            base += vw;
        }
        const SeasonalPhase phase = seasonal_phase(
            window.start_epoch + static_cast<std::int64_t>(t) * window.freq_seconds,
            window.freq_seconds);
        append_seasonal_block(phase, cfg.seasonal_bins, base, features);
        const Vec& head = stepper.step(features);
        if (t < window.T()) continue;
        const C2FLogits logits = c2f_logits_from_head(head, model.binning);
        C2FEncoding enc;
        for (std::size_t l = 0; l < model.binning.levels; ++l) {
            const auto& lv = logits.levels[l];
            enc.indices.push_back(static_cast<std::size_t>(
                std::max_element(lv.begin(), lv.end()) - lv.begin()));
        }
        double lo, hi;
        cell_bounds(model.binning, enc, lo, hi);
        const double value = scale.invert(0.5 * (lo + hi));
        realized[t] = value;
        out[t - window.T()] = value;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Low-to-high-frequency hybrid
// ---------------------------------------------------------------------------

/// Extracts the low-frequency view of a window: every K-th value starting at
/// offset K-1, with the frequency scaled accordingly.
inline Window low_frequency_view(const Window& window, std::size_t K) {
    require(window.T() % K == 0 && window.N() % K == 0,
            "window lengths not divisible by K: T=", window.T(), ", N=", window.N(), ", K=", K);
    Window low;
    for (std::size_t p = K - 1; p < window.T(); p += K) low.conditioning.push_back(window.value_at(p));
    for (std::size_t p = window.T() + K - 1; p < window.total(); p += K) {
        low.prediction.push_back(window.value_at(p));
    }
    low.origin_offset = window.origin_offset;
    low.start_epoch = window.start_epoch + static_cast<std::int64_t>(K - 1) * window.freq_seconds;
    low.freq_seconds = window.freq_seconds * static_cast<std::int64_t>(K);
    return low;
}

namespace detail {

/// Position of the nearest low-frequency slot at or after p.
inline std::size_t next_low_position(std::size_t p, std::size_t K) {
    return p + (K - 1 - p % K);
}

/// Features of the high-frequency model at position p: previous value, the
/// upcoming low-frequency value, optional lag block, calendar block.
inline void build_high_features(const SutraNetModel& high, const Window& window,
                                const std::vector<double>& realized,
                                const std::vector<char>& known, const ScaleParams& scale,
                                std::size_t p, SparseFeatures& out) {
    const ModelConfig& cfg = high.config;
    require(cfg.low2high_K >= 2, "model is not the high-frequency half of a hybrid");
    const std::size_t vw = cfg.value_width();
    out.clear();
    out.width = cfg.input_width_for(0);
    const MaybeValue prev = (p > 0 && known[p - 1]) ? MaybeValue::of(scale.apply(realized[p - 1]))
                                                    : MaybeValue::none();
    append_value_block(prev, high.binning, 0, out);
    const std::size_t q = next_low_position(p, cfg.low2high_K);
    const MaybeValue upcoming = (q < known.size() && known[q])
                                    ? MaybeValue::of(scale.apply(realized[q]))
                                    : MaybeValue::none();
    append_value_block(upcoming, high.binning, vw, out);
    std::size_t base = 2 * vw;
    if (cfg.lag_period > 0) {
        const MaybeValue lag = (p >= cfg.lag_period && known[p - cfg.lag_period])
                                   ? MaybeValue::of(scale.apply(realized[p - cfg.lag_period]))
                                   : MaybeValue::none();
        append_value_block(lag, high.binning, base, out);
        base += vw;
    }
    const SeasonalPhase phase = seasonal_phase(
        window.start_epoch + static_cast<std::int64_t>(p) * window.freq_seconds,
        window.freq_seconds);
    append_seasonal_block(phase, cfg.seasonal_bins, base, out);
}

} // namespace detail

/// Teacher-forced NLL of the hybrid's high-frequency model over one window.
/// Loss covers only the prediction steps the high model actually samples at
/// inference (the low-frequency positions are hard-constrained there).
inline double low2high_teacher_nll(const SutraNetModel& high_model, const Window& window,
                                   StackParams* grads = nullptr, double loss_scale = 1.0,
                                   std::size_t* loss_steps = nullptr) {
    const ModelConfig& cfg = high_model.config;
    const std::size_t K = cfg.low2high_K;
    require(K >= 2, "model is not the high-frequency half of a hybrid");
    require(window.N() > 0, "teacher-forced NLL needs a populated prediction range");
    require(window.T() % K == 0 && window.N() % K == 0,
            "window lengths not divisible by K: T=", window.T(), ", N=", window.N(), ", K=", K);
    const ScaleParams scale = minmax_fit(window.conditioning);
    std::vector<double> realized(window.total());
    std::vector<char> known(window.total(), 1);
    for (std::size_t p = 0; p < window.total(); ++p) realized[p] = window.value_at(p);
    SequenceRun run(high_model.sub_models[0]);
    SparseFeatures features;
    std::vector<std::pair<std::size_t, Vec>> dhead;
    double total = 0.0;
    std::size_t steps = 0;
    for (std::size_t p = 0; p < window.total(); ++p) {
        detail::build_high_features(high_model, window, realized, known, scale, p, features);
        const bool is_loss = p >= window.T() && (p % K) != K - 1;
        const Vec& head = run.step(features, is_loss);
        if (!is_loss) continue;
        const C2FLogits logits = c2f_logits_from_head(head, high_model.binning);
        const C2FEncoding target = c2f_encode(scale.apply(realized[p]), high_model.binning);
        const double nll = c2far_nll(logits, target, high_model.binning);
        require(std::isfinite(nll), "non-finite loss at position ", p);
        total += nll;
        steps += 1;
        if (grads != nullptr) {
            dhead.emplace_back(run.steps() - 1,
                               (loss_scale * nll_head_gradient(logits, target, high_model.binning)).eval());
        }
    }
    if (grads != nullptr) run.backward(dhead, *grads);
    if (loss_steps != nullptr) *loss_steps = steps;
    return total;
}

/// Samples the low-frequency sub-series in full with the low model, then
/// generates the remaining values with the high model, conditioning on the
/// drawn low values as features while those positions stay fixed to the
/// drawn values (uniform weights across rollouts).
inline ForecastDistribution low2highfreq_forecast(const SutraNetModel& low_model,
                                                  const SutraNetModel& high_model,
                                                  const Window& window, std::size_t horizon,
                                                  std::size_t n_rollouts, std::uint64_t seed,
                                                  std::size_t n_threads = 1) {
    require(low_model.trained, "low-frequency model has not been trained");
    require(low_model.config.K == 1, "the low-frequency part is a single-sequence model");
    const std::size_t K = high_model.config.low2high_K;
    if (K == 1) {
        // Every position belongs to the low-frequency sub-series; the hybrid
        // collapses to a single standard forecast.
        return forecast(low_model, window, horizon, n_rollouts, seed, n_threads);
    }
    require(high_model.trained, "high-frequency model has not been trained");
    require(K >= 2, "high model is not configured as the hybrid's high-frequency half");
    require(window.T() % K == 0 && horizon % K == 0,
            "window lengths not divisible by K: T=", window.T(), ", N=", horizon, ", K=", K);
    const Window low_window = low_frequency_view(window, K);
    const Low2HighSchedule schedule = build_low2high_schedule(K, window.T(), horizon);
    const ScaleParams high_scale = minmax_fit(window.conditioning);

    // All low-frequency trajectories first (the low model encodes once).
    const ForecastDistribution low_dist =
        forecast(low_model, low_window, horizon / K, n_rollouts,
                 Rng::mix(seed ^ 0xa5a5a5a5a5a5a5a5ULL), n_threads);

    // High-frequency conditioning never looks past the last conditioning
    // value (which is itself a low-frequency slot), so encode once.
    const Mat prefix = build_input_prefix(high_model.sub_models[0].layers[0]);
    std::vector<double> cond_realized(window.T() + horizon, 0.0);
    std::vector<char> cond_known(window.T() + horizon, 0);
    for (std::size_t p = 0; p < window.T(); ++p) {
        cond_realized[p] = window.value_at(p);
        cond_known[p] = 1;
    }
    std::vector<CellState> encoded;
    {
        StackStepper stepper(high_model.sub_models[0], &prefix);
        SparseFeatures features;
        for (std::size_t p = 0; p < window.T(); ++p) {
            detail::build_high_features(high_model, window, cond_realized, cond_known, high_scale,
                                        p, features);
            stepper.step(features);
        }
        encoded = stepper.states();
    }

    const Rng base_rng(seed);
    std::vector<std::vector<double>> samples(n_rollouts);
    auto run_chunk = [&](std::size_t first, std::size_t last) {
        std::vector<double> realized;
        std::vector<char> known;
        SparseFeatures features;
        for (std::size_t r = first; r < last; ++r) {
            Rng rng = base_rng.fork(r);
            realized = cond_realized;
            known = cond_known;
            const std::vector<double>& low_samples = low_dist.samples()[r];
            for (std::size_t i = 0; i < schedule.low_positions.size(); ++i) {
                realized[schedule.low_positions[i]] = low_samples[i];
                known[schedule.low_positions[i]] = 1;
            }
            StackStepper stepper(high_model.sub_models[0], &prefix);
            stepper.set_states(encoded);
            std::vector<double> merged(horizon, 0.0);
            for (const auto& hs : schedule.high_walk) {
                detail::build_high_features(high_model, window, realized, known, high_scale,
                                            hs.position, features);
                const Vec& head = stepper.step(features);
                if (!hs.constrained) {
                    const C2FLogits logits = c2f_logits_from_head(head, high_model.binning);
                    const double normalized =
                        c2far_sample(fixed_level_logits(logits), high_model.binning, rng);
                    realized[hs.position] = high_scale.invert(normalized);
                    known[hs.position] = 1;
                }
                merged[hs.position - window.T()] = realized[hs.position];
            }
            samples[r] = std::move(merged);
        }
    };
    if (n_threads <= 1 || n_rollouts < 4) {
        run_chunk(0, n_rollouts);
    } else {
        const std::size_t chunk = (n_rollouts + n_threads - 1) / n_threads;
        std::vector<std::future<void>> futures;
        for (std::size_t first = 0; first < n_rollouts; first += chunk) {
            futures.push_back(std::async(std::launch::async, run_chunk, first,
                                         std::min(first + chunk, n_rollouts)));
        }
        for (auto& f : futures) f.get();
    }
    return ForecastDistribution(std::move(samples), horizon);
}

} // namespace subar
