#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "mmlab/rng.hpp"
#include "mmlab/strategies.hpp"

namespace mmlab {

// Small dense nets with hand-written forward/backward passes. Weights are
// kept both row-major (out x in, used by the backward pass) and transposed
// (in x out, used by the forward pass) so every inner loop is a contiguous
// axpy that the compiler can vectorize.

struct Linear {
    int in = 0;
    int out = 0;
    std::vector<double> w;   // out x in
    std::vector<double> wt;  // in x out, kept in sync with w
    std::vector<double> b;

    void sync_wt();
};

struct MlpGrads {
    std::vector<std::vector<double>> dw;
    std::vector<std::vector<double>> db;

    void zero();
};

class Mlp {
public:
    Mlp() = default;
    // ReLU on all hidden layers, linear output. Weights uniform in
    // +-1/sqrt(fan_in), biases zero.
    static Mlp make(const std::vector<int>& sizes, Rng& rng);

    int input_dim() const { return layers.empty() ? 0 : layers.front().in; }
    int output_dim() const { return layers.empty() ? 0 : layers.back().out; }
    std::size_t param_count() const;

    // Thread-safe single-sample forward.
    void forward1(const double* x, double* y) const;

    // Batched forward keeping the activations needed by backward_batch.
    struct Cache {
        int batch = 0;
        std::vector<std::vector<double>> inputs;  // inputs[i]: input to layer i, batch x in_i
        std::vector<std::vector<double>> pre;     // pre[i]: pre-activation, batch x out_i
    };
    void forward_batch(const double* x, int batch, Cache& cache) const;

    // dout is dL/d(output) (batch x out_last). Accumulates into grads; when
    // dx is non-null it receives dL/d(input) (batch x in_0).
    void backward_batch(const Cache& cache, const std::vector<double>& dout, MlpGrads& grads,
                        std::vector<double>* dx) const;

    // dL/d(input) only; parameter gradients are not formed. Used when
    // differentiating a frozen net with respect to its inputs.
    std::vector<double> backward_input(const Cache& cache, const std::vector<double>& dout) const;

    MlpGrads make_grads() const;

    std::vector<Linear> layers;
};

inline constexpr double kLogStdMin = -20.0;
inline constexpr double kLogStdMax = 2.0;
inline constexpr double kSquashEps = 1e-6;
inline constexpr int kActionDim = 2;

// Actor head: 4-wide output split into mean[2] and log_std[2], the latter
// hard-clamped to [kLogStdMin, kLogStdMax].
void actor_forward1(const Mlp& actor, const std::array<double, 3>& obs,
                    std::array<double, 2>& mean, std::array<double, 2>& log_std);

struct SquashedSample {
    std::array<double, 2> action{};  // in (-1,1)^2
    std::array<double, 2> z{};       // the standard-normal draws (reparameterization)
    double log_prob = 0.0;
};

// a = tanh(mean + exp(log_std) * z), z ~ N(0, I).
SquashedSample sample_squashed(Rng& rng, const std::array<double, 2>& mean,
                               const std::array<double, 2>& log_std);

// log-density of the tanh-squashed Gaussian at the sample defined by z:
// sum_j [ -z_j^2/2 - log_std_j - log(2 pi)/2 - log(1 - a_j^2 + eps) ].
double squashed_log_prob(const std::array<double, 2>& z, const std::array<double, 2>& log_std,
                         const std::array<double, 2>& action);

std::array<double, 2> deterministic_action(const std::array<double, 2>& mean);

// Tick mapping: off = round(a * a_max), round half away from zero. Component
// 0 is the ask offset, component 1 the bid offset.
std::pair<double, double> map_action(const std::array<double, 2>& a, int a_max);

// Checkpoint: "MMSACNET" magic, u32 version, u32 layer count, (u32 in, u32
// out) per layer, u64 hash of the normalization-statistics file the policy
// was trained with, then per layer the weights row-major and the biases as
// little-endian 64-bit floats.
void save_checkpoint(const std::string& path, const Mlp& actor, std::uint64_t norm_hash);

struct Checkpoint {
    Mlp actor;
    std::uint64_t norm_hash = 0;
};

Checkpoint load_checkpoint(const std::string& path);

// Deterministic-mode policy behind the common controller interface.
class NeuralController : public Controller {
public:
    NeuralController(Mlp actor, int a_max) : actor_(std::move(actor)), a_max_(a_max) {}
    std::pair<double, double> act(const ObsView& obs) const override;
    std::string name() const override { return "drl"; }
    const Mlp& actor() const { return actor_; }

private:
    Mlp actor_;
    int a_max_;
};

}  // namespace mmlab
