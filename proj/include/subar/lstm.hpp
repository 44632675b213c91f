#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "subar/common.hpp"
#include "subar/features.hpp"

namespace subar {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// ---------------------------------------------------------------------------
// Gated recurrent cell
//
// Four gates in the order [input; forget; candidate; output], stacked along
// the rows of each weight matrix. Both an input-side and a recurrent-side
// bias vector are kept, mirroring the usual deep-learning framework layout.
// ---------------------------------------------------------------------------

struct CellParams {
    Mat w_ih; // (4H, D)
    Mat w_hh; // (4H, H)
    Vec b_ih; // 4H
    Vec b_hh; // 4H

    std::size_t hidden() const { return static_cast<std::size_t>(w_hh.cols()); }
    std::size_t input_width() const { return static_cast<std::size_t>(w_ih.cols()); }

    static CellParams zeros(std::size_t input_width, std::size_t hidden) {
        CellParams p;
        p.w_ih = Mat::Zero(static_cast<Eigen::Index>(4 * hidden), static_cast<Eigen::Index>(input_width));
        p.w_hh = Mat::Zero(static_cast<Eigen::Index>(4 * hidden), static_cast<Eigen::Index>(hidden));
        p.b_ih = Vec::Zero(static_cast<Eigen::Index>(4 * hidden));
        p.b_hh = Vec::Zero(static_cast<Eigen::Index>(4 * hidden));
        return p;
    }

    /// Uniform +-1/sqrt(H) weights, zero biases except forget-gate bias 1.
    void init(Rng& rng) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(hidden()));
        for (Eigen::Index j = 0; j < w_ih.cols(); ++j)
            for (Eigen::Index i = 0; i < w_ih.rows(); ++i) w_ih(i, j) = rng.uniform(-bound, bound);
        for (Eigen::Index j = 0; j < w_hh.cols(); ++j)
            for (Eigen::Index i = 0; i < w_hh.rows(); ++i) w_hh(i, j) = rng.uniform(-bound, bound);
        b_ih.setZero();
        b_hh.setZero();
        const auto H = static_cast<Eigen::Index>(hidden());
        b_ih.segment(H, H).setOnes();
    }

    std::size_t param_count() const {
        return static_cast<std::size_t>(w_ih.size() + w_hh.size() + b_ih.size() + b_hh.size());
    }
};

struct CellState {
    Vec h;
    Vec c;

    static CellState zero(std::size_t hidden) {
        CellState s;
        s.h = Vec::Zero(static_cast<Eigen::Index>(hidden));
        s.c = Vec::Zero(static_cast<Eigen::Index>(hidden));
        return s;
    }
};

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

namespace detail {

/// gates = b_ih + b_hh + w_ih*x + w_hh*h, with x given sparsely. Thermometer
/// runs are folded through `prefix` (column prefix sums of w_ih) in O(1)
/// column operations when available.
inline void gate_preactivations(const CellParams& p, const SparseFeatures& x, const Vec& h,
                                const Mat* prefix, Vec& gates) {
    gates = p.b_ih + p.b_hh;
    gates.noalias() += p.w_hh * h;
    for (const SparseFeatures::Entry& e : x.entries) {
        gates += e.val * p.w_ih.col(e.col);
    }
    if (prefix != nullptr) {
        for (const SparseFeatures::Range& r : x.ranges) {
            gates += prefix->col(r.first + r.count) - prefix->col(r.first);
        }
    } else {
        for (const SparseFeatures::Range& r : x.ranges) {
            for (std::uint32_t j = 0; j < r.count; ++j) gates += p.w_ih.col(r.first + j);
        }
    }
}

inline void gate_preactivations_dense(const CellParams& p, const Vec& x, const Vec& h, Vec& gates) {
    gates = p.b_ih + p.b_hh;
    gates.noalias() += p.w_ih * x;
    gates.noalias() += p.w_hh * h;
}

/// Applies the four-gate update in place: consumes preactivations, produces
/// activated gates plus the new state.
inline void apply_gates(const Vec& gates, const Vec& c_prev, Vec& i, Vec& f, Vec& g, Vec& o,
                        Vec& c, Vec& tanh_c, Vec& h) {
    const Eigen::Index H = c_prev.size();
    i = gates.segment(0, H).unaryExpr([](double v) { return sigmoid(v); });
    f = gates.segment(H, H).unaryExpr([](double v) { return sigmoid(v); });
    g = gates.segment(2 * H, H).array().tanh();
    o = gates.segment(3 * H, H).unaryExpr([](double v) { return sigmoid(v); });
    c = f.cwiseProduct(c_prev) + i.cwiseProduct(g);
    tanh_c = c.array().tanh();
    h = o.cwiseProduct(tanh_c);
}

} // namespace detail

/// Column prefix sums of a layer's input weights; column j holds the sum of
/// w_ih columns [0, j). Lets thermometer feature runs enter the recurrence
/// as two column operations instead of one per set dim.
inline Mat build_input_prefix(const CellParams& p) {
    Mat prefix(p.w_ih.rows(), p.w_ih.cols() + 1);
    prefix.col(0).setZero();
    for (Eigen::Index j = 0; j < p.w_ih.cols(); ++j) {
        prefix.col(j + 1) = prefix.col(j) + p.w_ih.col(j);
    }
    return prefix;
}

/// One step of the four-gate update (dense input).
inline CellState cell_forward(const CellParams& params, const CellState& state, const Vec& input) {
    require(static_cast<std::size_t>(input.size()) == params.input_width(),
            "cell input width ", input.size(), " != expected ", params.input_width());
    Vec gates;
    detail::gate_preactivations_dense(params, input, state.h, gates);
    CellState out;
    Vec i, f, g, o, tanh_c;
    detail::apply_gates(gates, state.c, i, f, g, o, out.c, tanh_c, out.h);
    return out;
}

// ---------------------------------------------------------------------------
// Layer stack with projection head
// ---------------------------------------------------------------------------

struct StackParams {
    std::vector<CellParams> layers;
    Mat w_head; // (n_out, H)
    Vec b_head; // n_out
    double interlayer_dropout = 0.0;

    std::size_t hidden() const { return layers.front().hidden(); }
    std::size_t input_width() const { return layers.front().input_width(); }
    std::size_t head_width() const { return static_cast<std::size_t>(b_head.size()); }
    std::size_t depth() const { return layers.size(); }

    static StackParams zeros(std::size_t input_width, std::size_t hidden, std::size_t n_layers,
                             std::size_t head_width, double interlayer_dropout = 0.0) {
        require(n_layers >= 1, "stack needs at least one layer");
        StackParams s;
        s.interlayer_dropout = interlayer_dropout;
        s.layers.push_back(CellParams::zeros(input_width, hidden));
        for (std::size_t l = 1; l < n_layers; ++l) {
            s.layers.push_back(CellParams::zeros(hidden, hidden));
        }
        s.w_head = Mat::Zero(static_cast<Eigen::Index>(head_width), static_cast<Eigen::Index>(hidden));
        s.b_head = Vec::Zero(static_cast<Eigen::Index>(head_width));
        return s;
    }

    void init(Rng& rng) {
        for (CellParams& layer : layers) layer.init(rng);
        const double bound = 1.0 / std::sqrt(static_cast<double>(hidden()));
        for (Eigen::Index j = 0; j < w_head.cols(); ++j)
            for (Eigen::Index i = 0; i < w_head.rows(); ++i) w_head(i, j) = rng.uniform(-bound, bound);
        b_head.setZero();
    }

    std::size_t param_count() const {
        std::size_t n = static_cast<std::size_t>(w_head.size() + b_head.size());
        for (const CellParams& layer : layers) n += layer.param_count();
        return n;
    }

    /// Flat view over every parameter tensor, in a fixed order shared by the
    /// optimizer, serialization, and gradient checks.
    struct TensorRef {
        std::string name;
        double* data;
        std::size_t size;
    };

    std::vector<TensorRef> tensors() {
        std::vector<TensorRef> out;
        for (std::size_t l = 0; l < layers.size(); ++l) {
            const std::string tag = "layer" + std::to_string(l);
            out.push_back({tag + ".w_ih", layers[l].w_ih.data(), static_cast<std::size_t>(layers[l].w_ih.size())});
            out.push_back({tag + ".w_hh", layers[l].w_hh.data(), static_cast<std::size_t>(layers[l].w_hh.size())});
            out.push_back({tag + ".b_ih", layers[l].b_ih.data(), static_cast<std::size_t>(layers[l].b_ih.size())});
            out.push_back({tag + ".b_hh", layers[l].b_hh.data(), static_cast<std::size_t>(layers[l].b_hh.size())});
        }
        out.push_back({"head.w", w_head.data(), static_cast<std::size_t>(w_head.size())});
        out.push_back({"head.b", b_head.data(), static_cast<std::size_t>(b_head.size())});
        return out;
    }

    StackParams zeros_like() const {
        StackParams g = *this;
        for (CellParams& layer : g.layers) {
            layer.w_ih.setZero();
            layer.w_hh.setZero();
            layer.b_ih.setZero();
            layer.b_hh.setZero();
        }
        g.w_head.setZero();
        g.b_head.setZero();
        return g;
    }

    void accumulate(const StackParams& other, double scale = 1.0) {
        for (std::size_t l = 0; l < layers.size(); ++l) {
            layers[l].w_ih += scale * other.layers[l].w_ih;
            layers[l].w_hh += scale * other.layers[l].w_hh;
            layers[l].b_ih += scale * other.layers[l].b_ih;
            layers[l].b_hh += scale * other.layers[l].b_hh;
        }
        w_head += scale * other.w_head;
        b_head += scale * other.b_head;
    }
};

/// Closed-form parameter count of a stack; layers past the first take the
/// hidden vector as input.
inline std::size_t stack_param_count(std::size_t input_width, std::size_t hidden,
                                     std::size_t n_layers, std::size_t head_width) {
    std::size_t n = 4 * hidden * (input_width + hidden) + 8 * hidden;
    for (std::size_t l = 1; l < n_layers; ++l) {
        n += 4 * hidden * (hidden + hidden) + 8 * hidden;
    }
    n += head_width * hidden + head_width;
    return n;
}

/// Feeds the input through every layer (hidden vectors passed upward, with
/// inter-layer dropout in train mode) and projects the top hidden state.
inline Vec stack_forward(const StackParams& params, std::vector<CellState>& states,
                         const Vec& input, bool train_mode = false, Rng* rng = nullptr) {
    require(states.size() == params.depth(), "state count ", states.size(),
            " != layer count ", params.depth());
    Vec x = input;
    for (std::size_t l = 0; l < params.depth(); ++l) {
        states[l] = cell_forward(params.layers[l], states[l], x);
        x = states[l].h;
        if (train_mode && params.interlayer_dropout > 0.0 && l + 1 < params.depth()) {
            require(rng != nullptr, "inter-layer dropout needs an RNG in train mode");
            const double p = params.interlayer_dropout;
            const double scale = 1.0 / (1.0 - p);
            for (Eigen::Index i = 0; i < x.size(); ++i) {
                x[i] = (rng->uniform() < p) ? 0.0 : x[i] * scale;
            }
        }
    }
    Vec head = params.b_head;
    head.noalias() += params.w_head * states.back().h;
    return head;
}

// ---------------------------------------------------------------------------
// Teacher-forced sequence evaluation with exact backpropagation through time
// ---------------------------------------------------------------------------

/// Stateless-inference stepper: advances the stack without recording
/// anything. Used for Monte-Carlo rollouts where no gradients are needed.
class StackStepper {
public:
    StackStepper(const StackParams& params, const Mat* prefix0 = nullptr)
        : params_(&params), prefix_(prefix0) {
        states_.assign(params.depth(), CellState::zero(params.hidden()));
    }

    void set_states(const std::vector<CellState>& states) { states_ = states; }
    const std::vector<CellState>& states() const { return states_; }

    /// One step over sparse input; returns the head output.
    const Vec& step(const SparseFeatures& x) {
        Vec* input = nullptr;
        for (std::size_t l = 0; l < params_->depth(); ++l) {
            const CellParams& layer = params_->layers[l];
            if (l == 0) {
                detail::gate_preactivations(layer, x, states_[l].h, prefix_, gates_);
            } else {
                detail::gate_preactivations_dense(layer, *input, states_[l].h, gates_);
            }
            detail::apply_gates(gates_, states_[l].c, i_, f_, g_, o_, c_new_, tanh_c_, h_new_);
            states_[l].c.swap(c_new_);
            states_[l].h.swap(h_new_);
            input = &states_[l].h;
        }
        head_ = params_->b_head;
        head_.noalias() += params_->w_head * states_.back().h;
        return head_;
    }

private:
    const StackParams* params_;
    const Mat* prefix_;
    std::vector<CellState> states_;
    Vec gates_, i_, f_, g_, o_, c_new_, tanh_c_, h_new_, head_;
};

/// Records a teacher-forced pass over one sequence so the exact gradient of
/// the prediction-range loss can be propagated back through time.
class SequenceRun {
public:
    SequenceRun(const StackParams& params, const Mat* prefix0 = nullptr,
                bool train_mode = false, Rng* rng = nullptr)
        : params_(&params), prefix0_(prefix0), train_mode_(train_mode), rng_(rng) {
        states_.assign(params.depth(), CellState::zero(params.hidden()));
    }

    std::size_t steps() const { return steps_.size(); }
    const std::vector<CellState>& states() const { return states_; }

    /// Advances one step; returns the head output when requested.
    const Vec& step(const SparseFeatures& x, bool want_head) {
        StepCache cache;
        cache.input = x;
        cache.layer.resize(params_->depth());
        const Vec* input = nullptr;
        for (std::size_t l = 0; l < params_->depth(); ++l) {
            const CellParams& layer = params_->layers[l];
            LayerCache& lc = cache.layer[l];
            lc.c_prev = states_[l].c;
            lc.h_prev = states_[l].h;
            if (l == 0) {
                detail::gate_preactivations(layer, x, states_[l].h, prefix0_, gates_scratch_);
            } else {
                detail::gate_preactivations_dense(layer, *input, states_[l].h, gates_scratch_);
            }
            detail::apply_gates(gates_scratch_, lc.c_prev, lc.i, lc.f, lc.g, lc.o, lc.c, lc.tanh_c, lc.h);
            states_[l].c = lc.c;
            states_[l].h = lc.h;
            if (l + 1 < params_->depth()) {
                lc.h_out = lc.h;
                if (train_mode_ && params_->interlayer_dropout > 0.0) {
                    require(rng_ != nullptr, "inter-layer dropout needs an RNG in train mode");
                    const double p = params_->interlayer_dropout;
                    const double scale = 1.0 / (1.0 - p);
                    lc.dropout_mask = Vec::Zero(lc.h.size());
                    for (Eigen::Index i = 0; i < lc.h.size(); ++i) {
                        lc.dropout_mask[i] = (rng_->uniform() < p) ? 0.0 : scale;
                    }
                    lc.h_out = lc.h.cwiseProduct(lc.dropout_mask);
                }
                input = &lc.h_out;
            }
        }
        if (want_head) {
            cache.head = params_->b_head;
            cache.head.noalias() += params_->w_head * states_.back().h;
            cache.has_head = true;
        }
        steps_.push_back(std::move(cache));
        return steps_.back().head;
    }

    const Vec& head_output(std::size_t t) const {
        require(steps_[t].has_head, "step ", t, " was run without a head output");
        return steps_[t].head;
    }

    /// Backpropagates the given per-step head-output gradients through the
    /// whole recorded sequence, accumulating into `grads` (same shapes as the
    /// parameters). Steps without a gradient entry contribute nothing.
    void backward(const std::vector<std::pair<std::size_t, Vec>>& dhead_by_step,
                  StackParams& grads) const {
        const std::size_t L = params_->depth();
        const auto H = static_cast<Eigen::Index>(params_->hidden());
        std::vector<Vec> dh(L, Vec::Zero(H));
        std::vector<Vec> dc(L, Vec::Zero(H));
        std::vector<Vec> head_grad(steps_.size());
        for (const auto& [t, g] : dhead_by_step) {
            require(t < steps_.size(), "gradient step index ", t, " out of range");
            head_grad[t] = g;
        }
        Vec dz(4 * H);
        for (std::size_t t = steps_.size(); t-- > 0;) {
            const StepCache& cache = steps_[t];
            if (head_grad[t].size() > 0) {
                const Vec& gh = head_grad[t];
                grads.w_head.noalias() += gh * cache.layer[L - 1].h.transpose();
                grads.b_head += gh;
                dh[L - 1].noalias() += params_->w_head.transpose() * gh;
            }
            for (std::size_t l = L; l-- > 0;) {
                const LayerCache& lc = cache.layer[l];
                // Through h = o * tanh(c) and c = f*c_prev + i*g.
                const Vec do_ = dh[l].cwiseProduct(lc.tanh_c);
                dc[l] += dh[l].cwiseProduct(lc.o).cwiseProduct(
                    (1.0 - lc.tanh_c.array().square()).matrix());
                const Vec di = dc[l].cwiseProduct(lc.g);
                const Vec dg = dc[l].cwiseProduct(lc.i);
                const Vec df = dc[l].cwiseProduct(lc.c_prev);
                dc[l] = dc[l].cwiseProduct(lc.f); // becomes dc_prev for step t-1
                dz.segment(0, H) = di.cwiseProduct(lc.i).cwiseProduct((1.0 - lc.i.array()).matrix());
                dz.segment(H, H) = df.cwiseProduct(lc.f).cwiseProduct((1.0 - lc.f.array()).matrix());
                dz.segment(2 * H, H) = dg.cwiseProduct((1.0 - lc.g.array().square()).matrix());
                dz.segment(3 * H, H) = do_.cwiseProduct(lc.o).cwiseProduct((1.0 - lc.o.array()).matrix());

                CellParams& layer_grad = grads.layers[l];
                layer_grad.b_ih += dz;
                layer_grad.b_hh += dz;
                layer_grad.w_hh.noalias() += dz * lc.h_prev.transpose();
                dh[l].noalias() = params_->layers[l].w_hh.transpose() * dz;

                if (l == 0) {
                    for (const SparseFeatures::Entry& e : cache.input.entries) {
                        layer_grad.w_ih.col(e.col) += e.val * dz;
                    }
                    for (const SparseFeatures::Range& r : cache.input.ranges) {
                        for (std::uint32_t j = 0; j < r.count; ++j) {
                            layer_grad.w_ih.col(r.first + j) += dz;
                        }
                    }
                } else {
                    const LayerCache& below = cache.layer[l - 1];
                    const Vec& x_in = below.dropout_mask.size() > 0 ? below.h_out : below.h;
                    layer_grad.w_ih.noalias() += dz * x_in.transpose();
                    Vec dx = params_->layers[l].w_ih.transpose() * dz;
                    if (below.dropout_mask.size() > 0) dx = dx.cwiseProduct(below.dropout_mask);
                    dh[l - 1] += dx;
                }
            }
        }
    }

private:
    struct LayerCache {
        Vec c_prev, h_prev;
        Vec i, f, g, o, c, tanh_c, h;
        Vec h_out;        // h after inter-layer dropout (only layers below the top)
        Vec dropout_mask; // empty when no dropout was applied
    };
    struct StepCache {
        SparseFeatures input;
        std::vector<LayerCache> layer;
        Vec head;
        bool has_head = false;
    };

    const StackParams* params_;
    const Mat* prefix0_;
    bool train_mode_;
    Rng* rng_;
    std::vector<CellState> states_;
    std::vector<StepCache> steps_;
    Vec gates_scratch_;
};

} // namespace subar
