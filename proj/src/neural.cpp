#include "marlin/neural.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "marlin/rng.hpp"

namespace marlin {

namespace {

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// flat-layout bookkeeping; gate order is input, forget, cell, output
struct Layout {
    int I, H, T;
    std::size_t gate_size;  // Wx + Wh + b for one gate
    std::size_t head_off;

    explicit Layout(const NetworkSpec& s)
        : I(s.input_width), H(s.lstm_hidden), T(s.T_hist) {
        gate_size = static_cast<std::size_t>(I) * H + static_cast<std::size_t>(H) * H + H;
        head_off = 4 * gate_size;
    }
    std::size_t wx(int gate) const { return gate * gate_size; }
    std::size_t wh(int gate) const { return gate * gate_size + static_cast<std::size_t>(I) * H; }
    std::size_t b(int gate) const {
        return gate * gate_size + static_cast<std::size_t>(I) * H + static_cast<std::size_t>(H) * H;
    }
};

std::size_t dense_count(int in, int out) {
    return (static_cast<std::size_t>(in) + 1) * out;
}

struct Tape {
    // T*H each; c_prev/h_prev are implicit (previous row, zeros at t=0)
    std::vector<double> gi, gf, gg, go, c, tc, h;
    // head intermediates
    std::vector<double> h1, h2, out;

    void resize_lstm(int T, int H) {
        std::size_t n = static_cast<std::size_t>(T) * H;
        gi.resize(n); gf.resize(n); gg.resize(n); go.resize(n);
        c.resize(n); tc.resize(n); h.resize(n);
    }
};

void lstm_forward(const NetworkSpec& spec, const double* p, const double* x, Tape& tp) {
    Layout L(spec);
    int I = L.I, H = L.H, T = L.T;
    tp.resize_lstm(T, H);
    std::vector<double> a(4 * static_cast<std::size_t>(H));
    for (int t = 0; t < T; ++t) {
        const double* xt = x + static_cast<std::size_t>(t) * I;
        const double* hprev = t > 0 ? tp.h.data() + static_cast<std::size_t>(t - 1) * H : nullptr;
        for (int g = 0; g < 4; ++g) {
            double* ag = a.data() + static_cast<std::size_t>(g) * H;
            const double* bias = p + L.b(g);
            for (int j = 0; j < H; ++j) ag[j] = bias[j];
            const double* Wx = p + L.wx(g);
            for (int r = 0; r < I; ++r) {
                double xr = xt[r];
                if (xr == 0.0) continue;  // observation bits are mostly zero
                const double* row = Wx + static_cast<std::size_t>(r) * H;
                for (int j = 0; j < H; ++j) ag[j] += xr * row[j];
            }
            if (hprev) {
                const double* Wh = p + L.wh(g);
                for (int r = 0; r < H; ++r) {
                    double hr = hprev[r];
                    const double* row = Wh + static_cast<std::size_t>(r) * H;
                    for (int j = 0; j < H; ++j) ag[j] += hr * row[j];
                }
            }
        }
        std::size_t off = static_cast<std::size_t>(t) * H;
        for (int j = 0; j < H; ++j) {
            double iv = sigmoid(a[j]);
            double fv = sigmoid(a[H + j]);
            double gv = std::tanh(a[2 * static_cast<std::size_t>(H) + j]);
            double ov = sigmoid(a[3 * static_cast<std::size_t>(H) + j]);
            double cprev = t > 0 ? tp.c[off - H + j] : 0.0;
            double cv = fv * cprev + iv * gv;
            double tcv = std::tanh(cv);
            tp.gi[off + j] = iv;
            tp.gf[off + j] = fv;
            tp.gg[off + j] = gv;
            tp.go[off + j] = ov;
            tp.c[off + j] = cv;
            tp.tc[off + j] = tcv;
            tp.h[off + j] = ov * tcv;
        }
    }
}

// accumulates parameter gradients; dz is the loss gradient at the final
// hidden state
void lstm_backward(const NetworkSpec& spec, const double* p, const double* x, const Tape& tp,
                   const std::vector<double>& dz, double* grad) {
    Layout L(spec);
    int I = L.I, H = L.H, T = L.T;
    std::vector<double> dh(dz), dc(H, 0.0), dh_prev(H), da(4 * static_cast<std::size_t>(H));
    for (int t = T - 1; t >= 0; --t) {
        std::size_t off = static_cast<std::size_t>(t) * H;
        const double* xt = x + static_cast<std::size_t>(t) * I;
        const double* hprev = t > 0 ? tp.h.data() + off - H : nullptr;
        for (int j = 0; j < H; ++j) {
            double iv = tp.gi[off + j], fv = tp.gf[off + j], gv = tp.gg[off + j],
                   ov = tp.go[off + j], tcv = tp.tc[off + j];
            double cprev = t > 0 ? tp.c[off - H + j] : 0.0;
            // c_t collects gradient both from h_t and from c_{t+1}
            double dtotal_c = dc[j] + dh[j] * ov * (1.0 - tcv * tcv);
            da[j] = dtotal_c * gv * iv * (1.0 - iv);                                 // input
            da[H + j] = dtotal_c * cprev * fv * (1.0 - fv);                          // forget
            da[2 * static_cast<std::size_t>(H) + j] = dtotal_c * iv * (1.0 - gv * gv);  // cell
            da[3 * static_cast<std::size_t>(H) + j] = dh[j] * tcv * ov * (1.0 - ov);    // output
            dc[j] = dtotal_c * fv;
        }
        std::fill(dh_prev.begin(), dh_prev.end(), 0.0);
        for (int g = 0; g < 4; ++g) {
            const double* dag = da.data() + static_cast<std::size_t>(g) * H;
            double* gWx = grad + L.wx(g);
            double* gWh = grad + L.wh(g);
            double* gb = grad + L.b(g);
            for (int j = 0; j < H; ++j) gb[j] += dag[j];
            for (int r = 0; r < I; ++r) {
                double xr = xt[r];
                if (xr == 0.0) continue;
                double* row = gWx + static_cast<std::size_t>(r) * H;
                for (int j = 0; j < H; ++j) row[j] += xr * dag[j];
            }
            if (hprev) {
                const double* Wh = p + L.wh(g);
                for (int r = 0; r < H; ++r) {
                    double hr = hprev[r];
                    double* row = gWh + static_cast<std::size_t>(r) * H;
                    const double* wrow = Wh + static_cast<std::size_t>(r) * H;
                    double acc = 0.0;
                    for (int j = 0; j < H; ++j) {
                        row[j] += hr * dag[j];
                        acc += wrow[j] * dag[j];
                    }
                    dh_prev[r] += acc;
                }
            }
        }
        std::swap(dh, dh_prev);
        if (t == 0) break;
    }
}

// dense layer y = b + W^T x, W stored input-major (in x out)
void dense_forward(const double* W, const double* b, const double* x, int in, int out,
                   double* y) {
    for (int j = 0; j < out; ++j) y[j] = b[j];
    for (int r = 0; r < in; ++r) {
        double xr = x[r];
        if (xr == 0.0) continue;
        const double* row = W + static_cast<std::size_t>(r) * out;
        for (int j = 0; j < out; ++j) y[j] += xr * row[j];
    }
}

void dense_backward(const double* W, const double* x, const double* dy, int in, int out,
                    double* gW, double* gb, double* dx) {
    for (int j = 0; j < out; ++j) gb[j] += dy[j];
    for (int r = 0; r < in; ++r) {
        double xr = x[r];
        double* grow = gW + static_cast<std::size_t>(r) * out;
        const double* wrow = W + static_cast<std::size_t>(r) * out;
        double acc = 0.0;
        for (int j = 0; j < out; ++j) {
            grow[j] += xr * dy[j];
            acc += wrow[j] * dy[j];
        }
        if (dx) dx[r] += acc;
    }
}

// offsets of the head blocks, in layout order
struct HeadLayout {
    std::size_t w1, b1, w2, b2, w3, b3, w4, b4;
    int in1, out1, in2, out2;  // dueling/critic shapes
};

HeadLayout head_layout(const NetworkSpec& s) {
    Layout L(s);
    HeadLayout hl{};
    std::size_t off = L.head_off;
    int H = s.lstm_hidden;
    switch (s.head) {
        case HeadKind::DuelingQ:
            hl.w1 = off; off += static_cast<std::size_t>(H) * s.adv_width;
            hl.b1 = off; off += s.adv_width;
            hl.w2 = off; off += static_cast<std::size_t>(H) * s.val_width;
            hl.b2 = off; off += s.val_width;
            hl.w3 = off; off += static_cast<std::size_t>(s.adv_width) * s.n_actions;
            hl.b3 = off; off += s.n_actions;
            hl.w4 = off; off += s.val_width;
            hl.b4 = off;
            break;
        case HeadKind::SoftmaxActor:
            hl.w1 = off; off += static_cast<std::size_t>(H) * s.n_actions;
            hl.b1 = off;
            break;
        case HeadKind::Critic:
            hl.w1 = off; off += static_cast<std::size_t>(H) * s.critic_hidden;
            hl.b1 = off; off += s.critic_hidden;
            hl.w2 = off; off += s.critic_hidden;
            hl.b2 = off;
            break;
    }
    return hl;
}

void head_forward(const NetworkSpec& s, const double* p, const double* z, Tape& tp) {
    HeadLayout hl = head_layout(s);
    int H = s.lstm_hidden;
    switch (s.head) {
        case HeadKind::DuelingQ: {
            int AW = s.adv_width, VW = s.val_width, A = s.n_actions;
            tp.h1.assign(AW, 0.0);
            tp.h2.assign(VW, 0.0);
            tp.out.assign(A, 0.0);
            dense_forward(p + hl.w1, p + hl.b1, z, H, AW, tp.h1.data());
            for (auto& v : tp.h1) v = std::tanh(v);
            dense_forward(p + hl.w2, p + hl.b2, z, H, VW, tp.h2.data());
            for (auto& v : tp.h2) v = std::tanh(v);
            std::vector<double> adv(A);
            dense_forward(p + hl.w3, p + hl.b3, tp.h1.data(), AW, A, adv.data());
            double value = p[hl.b4];
            for (int r = 0; r < VW; ++r) value += tp.h2[r] * p[hl.w4 + r];
            double mean_adv = 0.0;
            for (double v : adv) mean_adv += v;
            mean_adv /= A;
            for (int j = 0; j < A; ++j) tp.out[j] = value + adv[j] - mean_adv;
            break;
        }
        case HeadKind::SoftmaxActor: {
            int A = s.n_actions;
            tp.out.assign(A, 0.0);
            dense_forward(p + hl.w1, p + hl.b1, z, H, A, tp.out.data());
            double m = *std::max_element(tp.out.begin(), tp.out.end());
            double sum = 0.0;
            for (auto& v : tp.out) {
                v = std::exp(v - m);
                sum += v;
            }
            for (auto& v : tp.out) v /= sum;
            break;
        }
        case HeadKind::Critic: {
            int CH = s.critic_hidden;
            tp.h1.assign(CH, 0.0);
            dense_forward(p + hl.w1, p + hl.b1, z, H, CH, tp.h1.data());
            for (auto& v : tp.h1) v = std::tanh(v);
            double value = p[hl.b2];
            for (int r = 0; r < CH; ++r) value += tp.h1[r] * p[hl.w2 + r];
            tp.out.assign(1, value);
            break;
        }
    }
}

// dout is dQ for DuelingQ, dlogits for SoftmaxActor, dV for Critic
void head_backward(const NetworkSpec& s, const double* p, const double* z, const Tape& tp,
                   const std::vector<double>& dout, double* grad, std::vector<double>& dz) {
    HeadLayout hl = head_layout(s);
    int H = s.lstm_hidden;
    dz.assign(H, 0.0);
    switch (s.head) {
        case HeadKind::DuelingQ: {
            int AW = s.adv_width, VW = s.val_width, A = s.n_actions;
            double sum_dq = 0.0;
            for (double v : dout) sum_dq += v;
            std::vector<double> dA(A);
            for (int j = 0; j < A; ++j) dA[j] = dout[j] - sum_dq / A;
            double dV = sum_dq;
            // advantage branch
            std::vector<double> dh1(AW, 0.0);
            dense_backward(p + hl.w3, tp.h1.data(), dA.data(), AW, A, grad + hl.w3,
                           grad + hl.b3, dh1.data());
            for (int r = 0; r < AW; ++r) dh1[r] *= 1.0 - tp.h1[r] * tp.h1[r];
            dense_backward(p + hl.w1, z, dh1.data(), H, AW, grad + hl.w1, grad + hl.b1,
                           dz.data());
            // value branch
            std::vector<double> dh2(VW);
            grad[hl.b4] += dV;
            for (int r = 0; r < VW; ++r) {
                grad[hl.w4 + r] += tp.h2[r] * dV;
                dh2[r] = p[hl.w4 + r] * dV * (1.0 - tp.h2[r] * tp.h2[r]);
            }
            dense_backward(p + hl.w2, z, dh2.data(), H, VW, grad + hl.w2, grad + hl.b2,
                           dz.data());
            break;
        }
        case HeadKind::SoftmaxActor:
            dense_backward(p + hl.w1, z, dout.data(), H, s.n_actions, grad + hl.w1,
                           grad + hl.b1, dz.data());
            break;
        case HeadKind::Critic: {
            int CH = s.critic_hidden;
            double dV = dout[0];
            std::vector<double> dh1(CH);
            grad[hl.b2] += dV;
            for (int r = 0; r < CH; ++r) {
                grad[hl.w2 + r] += tp.h1[r] * dV;
                dh1[r] = p[hl.w2 + r] * dV * (1.0 - tp.h1[r] * tp.h1[r]);
            }
            dense_backward(p + hl.w1, z, dh1.data(), H, CH, grad + hl.w1, grad + hl.b1,
                           dz.data());
            break;
        }
    }
}

void forward_with_tape(const NetworkSpec& spec, const double* p, const double* x, Tape& tp) {
    lstm_forward(spec, p, x, tp);
    const double* z = tp.h.data() + static_cast<std::size_t>(spec.T_hist - 1) * spec.lstm_hidden;
    head_forward(spec, p, z, tp);
}

void check_input(const NetworkSpec& spec, std::size_t n) {
    if (n != static_cast<std::size_t>(spec.T_hist) * spec.input_width)
        throw std::invalid_argument("state: expected length T_hist * input_width");
}

void check_params(const NetworkSpec& spec, const ParameterVector& params) {
    if (params.size() != param_count(spec))
        throw std::invalid_argument("params: length does not match the spec layout");
}

// one backward pass for a single sample given the head-output gradient
void accumulate_sample(const NetworkSpec& spec, const double* p, const double* x,
                       const Tape& tp, const std::vector<double>& dout, double* grad) {
    std::vector<double> dz;
    const double* z = tp.h.data() + static_cast<std::size_t>(spec.T_hist - 1) * spec.lstm_hidden;
    head_backward(spec, p, z, tp, dout, grad, dz);
    lstm_backward(spec, p, x, tp, dz, grad);
}

}  // namespace

void NetworkSpec::validate() const {
    if (input_width < 1) throw std::invalid_argument("input_width: must be >= 1");
    if (T_hist < 1) throw std::invalid_argument("T_hist: must be >= 1");
    if (lstm_hidden < 1) throw std::invalid_argument("lstm_hidden: must be >= 1");
    if (head != HeadKind::Critic && n_actions < 1)
        throw std::invalid_argument("n_actions: must be >= 1");
    if (head == HeadKind::DuelingQ && (adv_width < 1 || val_width < 1))
        throw std::invalid_argument("adv_width/val_width: must be >= 1");
    if (head == HeadKind::Critic && critic_hidden < 1)
        throw std::invalid_argument("critic_hidden: must be >= 1");
}

std::string NetworkSpec::describe() const {
    std::string s = "lstm(in=" + std::to_string(input_width) + ",T=" + std::to_string(T_hist) +
                    ",h=" + std::to_string(lstm_hidden) + ");";
    switch (head) {
        case HeadKind::DuelingQ:
            s += "duelq(adv=" + std::to_string(adv_width) + ",val=" + std::to_string(val_width) +
                 ",act=" + std::to_string(n_actions) + ")";
            break;
        case HeadKind::SoftmaxActor:
            s += "actor(act=" + std::to_string(n_actions) + ")";
            break;
        case HeadKind::Critic:
            s += "critic(h=" + std::to_string(critic_hidden) + ")";
            break;
    }
    return s;
}

std::size_t param_count(const NetworkSpec& spec) {
    spec.validate();
    int H = spec.lstm_hidden;
    std::size_t n = 4 * (static_cast<std::size_t>(spec.input_width) + H + 1) * H;
    switch (spec.head) {
        case HeadKind::DuelingQ:
            n += dense_count(H, spec.adv_width) + dense_count(H, spec.val_width) +
                 dense_count(spec.adv_width, spec.n_actions) + dense_count(spec.val_width, 1);
            break;
        case HeadKind::SoftmaxActor:
            n += dense_count(H, spec.n_actions);
            break;
        case HeadKind::Critic:
            n += dense_count(H, spec.critic_hidden) + dense_count(spec.critic_hidden, 1);
            break;
    }
    return n;
}

ParameterVector init_params(const NetworkSpec& spec, std::uint64_t seed) {
    spec.validate();
    Layout L(spec);
    ParameterVector p(param_count(spec));
    Rng rng(mix_seed(seed, 0x696e6974ULL));  // "init"
    auto fill = [&](std::size_t off, std::size_t n, int fan_in) {
        double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
        for (std::size_t i = 0; i < n; ++i) p[off + i] = rng.uniform(-bound, bound);
    };
    int H = spec.lstm_hidden;
    fill(0, L.head_off, spec.input_width + H);  // all four gates
    HeadLayout hl = head_layout(spec);
    switch (spec.head) {
        case HeadKind::DuelingQ:
            fill(hl.w1, dense_count(H, spec.adv_width), H);
            fill(hl.w2, dense_count(H, spec.val_width), H);
            fill(hl.w3, dense_count(spec.adv_width, spec.n_actions), spec.adv_width);
            fill(hl.w4, dense_count(spec.val_width, 1), spec.val_width);
            break;
        case HeadKind::SoftmaxActor:
            fill(hl.w1, dense_count(H, spec.n_actions), H);
            break;
        case HeadKind::Critic:
            fill(hl.w1, dense_count(H, spec.critic_hidden), H);
            fill(hl.w2, dense_count(spec.critic_hidden, 1), spec.critic_hidden);
            break;
    }
    return p;
}

std::vector<double> forward(const NetworkSpec& spec, const ParameterVector& params,
                            std::span<const double> state) {
    check_params(spec, params);
    check_input(spec, state.size());
    Tape tp;
    forward_with_tape(spec, params.data(), state.data(), tp);
    return tp.out;
}

std::vector<double> dqn_targets(const NetworkSpec& spec, const ParameterVector& params,
                                const std::vector<TdSample>& batch, double gamma) {
    check_params(spec, params);
    std::vector<double> targets(batch.size());
    Tape tp;
    for (std::size_t i = 0; i < batch.size(); ++i) {
        check_input(spec, batch[i].s_next.size());
        forward_with_tape(spec, params.data(), batch[i].s_next.data(), tp);
        targets[i] = batch[i].r + gamma * *std::max_element(tp.out.begin(), tp.out.end());
    }
    return targets;
}

double dqn_loss(const NetworkSpec& spec, const ParameterVector& params,
                const std::vector<TdSample>& batch, const std::vector<double>& targets) {
    if (batch.empty()) throw std::invalid_argument("batch: empty");
    double loss = 0.0;
    Tape tp;
    for (std::size_t i = 0; i < batch.size(); ++i) {
        forward_with_tape(spec, params.data(), batch[i].s.data(), tp);
        double d = tp.out[batch[i].a] - targets[i];
        loss += d * d;
    }
    return loss / static_cast<double>(batch.size());
}

GradientVector backward_dqn(const NetworkSpec& spec, const ParameterVector& params,
                            const std::vector<TdSample>& batch,
                            const std::vector<double>& targets) {
    if (batch.empty()) throw std::invalid_argument("batch: empty");
    check_params(spec, params);
    GradientVector grad(params.size(), 0.0);
    Tape tp;
    double inv_b = 1.0 / static_cast<double>(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) {
        check_input(spec, batch[i].s.size());
        forward_with_tape(spec, params.data(), batch[i].s.data(), tp);
        std::vector<double> dout(spec.n_actions, 0.0);
        dout[batch[i].a] = 2.0 * (tp.out[batch[i].a] - targets[i]) * inv_b;
        accumulate_sample(spec, params.data(), batch[i].s.data(), tp, dout, grad.data());
    }
    return grad;
}

std::vector<double> critic_targets(const NetworkSpec& spec, const ParameterVector& params,
                                   const std::vector<CriticSample>& batch, double gamma) {
    check_params(spec, params);
    std::vector<double> targets(batch.size());
    Tape tp;
    for (std::size_t i = 0; i < batch.size(); ++i) {
        forward_with_tape(spec, params.data(), batch[i].s_next.data(), tp);
        targets[i] = batch[i].r + gamma * tp.out[0];
    }
    return targets;
}

double critic_loss(const NetworkSpec& spec, const ParameterVector& params,
                   const std::vector<CriticSample>& batch, const std::vector<double>& targets) {
    if (batch.empty()) throw std::invalid_argument("batch: empty");
    double loss = 0.0;
    Tape tp;
    for (std::size_t i = 0; i < batch.size(); ++i) {
        forward_with_tape(spec, params.data(), batch[i].s.data(), tp);
        double d = tp.out[0] - targets[i];
        loss += d * d;
    }
    return loss / static_cast<double>(batch.size());
}

GradientVector backward_critic(const NetworkSpec& spec, const ParameterVector& params,
                               const std::vector<CriticSample>& batch,
                               const std::vector<double>& targets) {
    if (batch.empty()) throw std::invalid_argument("batch: empty");
    check_params(spec, params);
    GradientVector grad(params.size(), 0.0);
    Tape tp;
    double inv_b = 1.0 / static_cast<double>(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) {
        forward_with_tape(spec, params.data(), batch[i].s.data(), tp);
        std::vector<double> dout(1, 2.0 * (tp.out[0] - targets[i]) * inv_b);
        accumulate_sample(spec, params.data(), batch[i].s.data(), tp, dout, grad.data());
    }
    return grad;
}

double actor_loss(const NetworkSpec& spec, const ParameterVector& params,
                  const std::vector<ActorSample>& batch) {
    if (batch.empty()) throw std::invalid_argument("batch: empty");
    double loss = 0.0;
    Tape tp;
    for (const auto& sample : batch) {
        forward_with_tape(spec, params.data(), sample.s.data(), tp);
        loss += -std::log(tp.out[sample.a]) * sample.delta;
    }
    return loss / static_cast<double>(batch.size());
}

GradientVector backward_actor(const NetworkSpec& spec, const ParameterVector& params,
                              const std::vector<ActorSample>& batch) {
    if (batch.empty()) throw std::invalid_argument("batch: empty");
    check_params(spec, params);
    GradientVector grad(params.size(), 0.0);
    Tape tp;
    double inv_b = 1.0 / static_cast<double>(batch.size());
    for (const auto& sample : batch) {
        check_input(spec, sample.s.size());
        forward_with_tape(spec, params.data(), sample.s.data(), tp);
        // d/dlogits of -delta * log pi(a) = delta * (pi - onehot(a))
        std::vector<double> dlogits(spec.n_actions);
        for (int j = 0; j < spec.n_actions; ++j)
            dlogits[j] = sample.delta * tp.out[j] * inv_b;
        dlogits[sample.a] -= sample.delta * inv_b;
        accumulate_sample(spec, params.data(), sample.s.data(), tp, dlogits, grad.data());
    }
    return grad;
}

void sgd_step(ParameterVector& params, const GradientVector& grad, double alpha) {
    if (params.size() != grad.size())
        throw std::invalid_argument("sgd_step: layout mismatch");
    for (std::size_t i = 0; i < params.size(); ++i) params[i] -= alpha * grad[i];
}

AdamState make_adam_state(std::size_t n) {
    AdamState st;
    st.m.assign(n, 0.0);
    st.v.assign(n, 0.0);
    st.t = 0;
    return st;
}

void adam_step(AdamState& state, ParameterVector& params, const GradientVector& grad,
               double alpha) {
    if (params.size() != grad.size() || state.m.size() != params.size())
        throw std::invalid_argument("adam_step: layout mismatch");
    constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    state.t += 1;
    double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.t));
    double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.t));
    for (std::size_t i = 0; i < params.size(); ++i) {
        state.m[i] = beta1 * state.m[i] + (1.0 - beta1) * grad[i];
        state.v[i] = beta2 * state.v[i] + (1.0 - beta2) * grad[i] * grad[i];
        double mhat = state.m[i] / bc1;
        double vhat = state.v[i] / bc2;
        params[i] -= alpha * mhat / (std::sqrt(vhat) + eps);
    }
}

ParameterVector fedavg(const std::vector<ParameterVector>& params_list) {
    if (params_list.empty()) throw std::invalid_argument("fedavg: empty list");
    std::size_t n = params_list[0].size();
    for (const auto& p : params_list)
        if (p.size() != n) throw std::invalid_argument("fedavg: layout mismatch");
    ParameterVector avg(n, 0.0);
    for (const auto& p : params_list)
        for (std::size_t i = 0; i < n; ++i) avg[i] += p[i];
    double inv = 1.0 / static_cast<double>(params_list.size());
    for (auto& v : avg) v *= inv;
    return avg;
}

QuantizedParams quantize_params(const ParameterVector& params, int bits) {
    if (bits < 2 || bits > 16) throw std::invalid_argument("bits: must be in [2, 16]");
    if (params.empty()) throw std::invalid_argument("params: empty");
    check_finite(params, "quantize_params");
    double lo = params[0], hi = params[0];
    for (double v : params) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    QuantizedParams q;
    q.bits = bits;
    q.offset = lo;
    std::uint32_t levels = (1u << bits) - 1;
    q.scale = levels > 0 ? (hi - lo) / levels : 0.0;
    q.codes.resize(params.size());
    if (q.scale == 0.0) {
        std::fill(q.codes.begin(), q.codes.end(), 0u);  // constant vector
        return q;
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        double c = std::round((params[i] - lo) / q.scale);
        q.codes[i] = static_cast<std::uint32_t>(std::min(std::max(c, 0.0),
                                                         static_cast<double>(levels)));
    }
    return q;
}

ParameterVector dequantize_params(const QuantizedParams& q) {
    ParameterVector out(q.codes.size());
    for (std::size_t i = 0; i < q.codes.size(); ++i)
        out[i] = q.offset + q.scale * static_cast<double>(q.codes[i]);
    return out;
}

namespace {

template <typename T>
void put_raw(std::vector<std::uint8_t>& buf, T v) {
    std::uint8_t bytes[sizeof(T)];
    std::memcpy(bytes, &v, sizeof(T));
    buf.insert(buf.end(), bytes, bytes + sizeof(T));
}

template <typename T>
T get_raw(const std::vector<std::uint8_t>& buf, std::size_t& pos) {
    if (pos + sizeof(T) > buf.size()) throw std::runtime_error("quantized blob truncated");
    T v;
    std::memcpy(&v, buf.data() + pos, sizeof(T));
    pos += sizeof(T);
    return v;
}

}  // namespace

std::vector<std::uint8_t> pack_quantized(const QuantizedParams& q) {
    std::vector<std::uint8_t> buf;
    put_raw<std::uint16_t>(buf, static_cast<std::uint16_t>(q.bits));
    put_raw<std::uint64_t>(buf, q.codes.size());
    put_raw<double>(buf, q.scale);
    put_raw<double>(buf, q.offset);
    std::uint64_t acc = 0;
    int nbits = 0;
    for (std::uint32_t code : q.codes) {
        acc |= static_cast<std::uint64_t>(code) << nbits;
        nbits += q.bits;
        while (nbits >= 8) {
            buf.push_back(static_cast<std::uint8_t>(acc & 0xff));
            acc >>= 8;
            nbits -= 8;
        }
    }
    if (nbits > 0) buf.push_back(static_cast<std::uint8_t>(acc & 0xff));
    return buf;
}

QuantizedParams unpack_quantized(const std::vector<std::uint8_t>& blob) {
    std::size_t pos = 0;
    QuantizedParams q;
    q.bits = get_raw<std::uint16_t>(blob, pos);
    std::uint64_t count = get_raw<std::uint64_t>(blob, pos);
    q.scale = get_raw<double>(blob, pos);
    q.offset = get_raw<double>(blob, pos);
    q.codes.resize(count);
    std::uint64_t acc = 0;
    int nbits = 0;
    std::uint32_t mask = (1u << q.bits) - 1;
    for (std::uint64_t i = 0; i < count; ++i) {
        while (nbits < q.bits) {
            if (pos >= blob.size()) throw std::runtime_error("quantized blob truncated");
            acc |= static_cast<std::uint64_t>(blob[pos++]) << nbits;
            nbits += 8;
        }
        q.codes[i] = static_cast<std::uint32_t>(acc & mask);
        acc >>= q.bits;
        nbits -= q.bits;
    }
    return q;
}

std::uint64_t spec_hash(const NetworkSpec& spec) {
    // FNV-1a over the canonical description
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : spec.describe()) {
        h ^= static_cast<std::uint8_t>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

static constexpr char kMagic[8] = {'M', 'R', 'L', 'N', 'C', 'K', 'P', 'T'};

void save_checkpoint(const std::string& path, const NetworkSpec& spec,
                     const ParameterVector& params) {
    check_params(spec, params);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open checkpoint for writing: " + path);
    out.write(kMagic, sizeof(kMagic));
    std::uint32_t version = 1;
    std::uint64_t hash = spec_hash(spec);
    std::uint64_t count = params.size();
    out.write(reinterpret_cast<const char*>(&version), sizeof(version));
    out.write(reinterpret_cast<const char*>(&hash), sizeof(hash));
    out.write(reinterpret_cast<const char*>(&count), sizeof(count));
    out.write(reinterpret_cast<const char*>(params.data()),
              static_cast<std::streamsize>(params.size() * sizeof(double)));
    if (!out) throw std::runtime_error("short write to checkpoint: " + path);
}

ParameterVector load_checkpoint(const std::string& path, const NetworkSpec& expected_spec) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw std::runtime_error("not a checkpoint file: " + path);
    std::uint32_t version = 0;
    std::uint64_t hash = 0, count = 0;
    in.read(reinterpret_cast<char*>(&version), sizeof(version));
    in.read(reinterpret_cast<char*>(&hash), sizeof(hash));
    in.read(reinterpret_cast<char*>(&count), sizeof(count));
    if (!in || version != 1) throw std::runtime_error("unsupported checkpoint version: " + path);
    if (hash != spec_hash(expected_spec))
        throw std::runtime_error("checkpoint spec mismatch: " + path + " (expected " +
                                 expected_spec.describe() + ")");
    if (count != param_count(expected_spec))
        throw std::runtime_error("checkpoint parameter count mismatch: " + path);
    ParameterVector params(count);
    in.read(reinterpret_cast<char*>(params.data()),
            static_cast<std::streamsize>(count * sizeof(double)));
    if (!in) throw std::runtime_error("checkpoint truncated: " + path);
    return params;
}

void check_finite(const ParameterVector& params, const char* what) {
    for (double v : params)
        if (!std::isfinite(v))
            throw std::runtime_error(std::string(what) + ": non-finite parameter");
}

}  // namespace marlin
