#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace marlin {

enum class HeadKind { DuelingQ, SoftmaxActor, Critic };

// LSTM sequence encoder followed by one of three heads. Parameters live in a
// flat vector with a fixed layout (see describe()); that layout is what
// federated averaging, quantization and checkpoints operate on.
struct NetworkSpec {
    int input_width = 18;
    int T_hist = 5;
    int lstm_hidden = 20;
    HeadKind head = HeadKind::DuelingQ;
    int n_actions = 11;     // DuelingQ / SoftmaxActor
    int adv_width = 10;     // DuelingQ
    int val_width = 10;     // DuelingQ
    int critic_hidden = 5;  // Critic

    void validate() const;
    int output_width() const { return head == HeadKind::Critic ? 1 : n_actions; }
    // Canonical layout description; hashed into checkpoint headers.
    std::string describe() const;
};

using ParameterVector = std::vector<double>;
using GradientVector = std::vector<double>;

// Flat layout, in order:
//   LSTM gates input, forget, cell, output; per gate Wx (input_width x H,
//   input-major), Wh (H x H), bias (H).
//   DuelingQ head: advW (H x adv_width), advb, valW (H x val_width), valb,
//     advOutW (adv_width x n_actions), advOutb, valOutW (val_width x 1), valOutb.
//   SoftmaxActor head: W (H x n_actions), b.
//   Critic head: W (H x critic_hidden), b, outW (critic_hidden x 1), outb.
std::size_t param_count(const NetworkSpec& spec);

// Per-layer uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)), deterministic per seed.
ParameterVector init_params(const NetworkSpec& spec, std::uint64_t seed);

// state is the flattened T_hist x input_width window, oldest slot first.
// Returns Q-values, softmax action scores, or the scalar value.
std::vector<double> forward(const NetworkSpec& spec, const ParameterVector& params,
                            std::span<const double> state);

// --- losses -----------------------------------------------------------------
// Bootstrap targets are computed once from the given parameters and then
// treated as constants; backward_* differentiates the frozen-target loss the
// corresponding loss(...) function evaluates.

struct TdSample {
    std::vector<double> s;  // T_hist * input_width
    int a = 0;
    double r = 0.0;
    std::vector<double> s_next;
};

struct CriticSample {
    std::vector<double> s;
    double r = 0.0;
    std::vector<double> s_next;
};

struct ActorSample {
    std::vector<double> s;
    int a = 0;
    double delta = 0.0;  // TD error, already a constant for the actor
};

// y_i = r_i + gamma * max_a Q(s'_i, a)
std::vector<double> dqn_targets(const NetworkSpec& spec, const ParameterVector& params,
                                const std::vector<TdSample>& batch, double gamma);
double dqn_loss(const NetworkSpec& spec, const ParameterVector& params,
                const std::vector<TdSample>& batch, const std::vector<double>& targets);
GradientVector backward_dqn(const NetworkSpec& spec, const ParameterVector& params,
                            const std::vector<TdSample>& batch,
                            const std::vector<double>& targets);

// y_i = r_i + gamma * V(s'_i)
std::vector<double> critic_targets(const NetworkSpec& spec, const ParameterVector& params,
                                   const std::vector<CriticSample>& batch, double gamma);
double critic_loss(const NetworkSpec& spec, const ParameterVector& params,
                   const std::vector<CriticSample>& batch, const std::vector<double>& targets);
GradientVector backward_critic(const NetworkSpec& spec, const ParameterVector& params,
                               const std::vector<CriticSample>& batch,
                               const std::vector<double>& targets);

// mean of -log pi(a_i | s_i) * delta_i
double actor_loss(const NetworkSpec& spec, const ParameterVector& params,
                  const std::vector<ActorSample>& batch);
GradientVector backward_actor(const NetworkSpec& spec, const ParameterVector& params,
                              const std::vector<ActorSample>& batch);

// --- optimizers ---------------------------------------------------------------

void sgd_step(ParameterVector& params, const GradientVector& grad, double alpha);

struct AdamState {
    std::vector<double> m, v;
    std::int64_t t = 0;
};

AdamState make_adam_state(std::size_t n);
// beta1 = 0.9, beta2 = 0.999, eps = 1e-8, bias-corrected
void adam_step(AdamState& state, ParameterVector& params, const GradientVector& grad,
               double alpha);

// --- federation ---------------------------------------------------------------

ParameterVector fedavg(const std::vector<ParameterVector>& params_list);

struct QuantizedParams {
    int bits = 0;
    double scale = 0.0;   // quantization step
    double offset = 0.0;  // vector minimum
    std::vector<std::uint32_t> codes;
};

// Uniform affine quantization of the whole vector to 2^bits levels,
// bits in [2, 16]. Round-trip error is at most (max-min)/2^bits per element.
QuantizedParams quantize_params(const ParameterVector& params, int bits);
ParameterVector dequantize_params(const QuantizedParams& q);

// Wire form: u16 bits, u64 count, f64 scale, f64 offset, then the codes
// bit-packed little-endian. Matches the digital cost count * bits.
std::vector<std::uint8_t> pack_quantized(const QuantizedParams& q);
QuantizedParams unpack_quantized(const std::vector<std::uint8_t>& blob);

// --- checkpoints ----------------------------------------------------------------

// Header: magic "MRLNCKPT", u32 version, u64 spec hash, u64 count; then the
// parameters as little-endian f64 in layout order.
void save_checkpoint(const std::string& path, const NetworkSpec& spec,
                     const ParameterVector& params);
ParameterVector load_checkpoint(const std::string& path, const NetworkSpec& expected_spec);

std::uint64_t spec_hash(const NetworkSpec& spec);

// Throws std::runtime_error if any entry is non-finite.
void check_finite(const ParameterVector& params, const char* what);

}  // namespace marlin
