#include "mmlab/net.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace mmlab {

namespace {

// Register-tiled kernels. A 32-wide accumulator block (four vector
// registers) stays live across the contraction dimension, giving four
// independent FMA chains; the remainder path uses a four-way split dot so
// narrow layers are not latency-bound either.
constexpr int kTile = 32;

inline double split_dot(const double* __restrict a, const double* __restrict b, int n,
                        int stride_b) {
    double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
    int k = 0;
    for (; k + 4 <= n; k += 4) {
        s0 += a[k] * b[static_cast<std::size_t>(k) * stride_b];
        s1 += a[k + 1] * b[static_cast<std::size_t>(k + 1) * stride_b];
        s2 += a[k + 2] * b[static_cast<std::size_t>(k + 2) * stride_b];
        s3 += a[k + 3] * b[static_cast<std::size_t>(k + 3) * stride_b];
    }
    for (; k < n; ++k) s0 += a[k] * b[static_cast<std::size_t>(k) * stride_b];
    return (s0 + s1) + (s2 + s3);
}

inline double split_dot2(const double* __restrict a, int stride_a, const double* __restrict b,
                         int stride_b, int n) {
    double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
    int k = 0;
    for (; k + 4 <= n; k += 4) {
        s0 += a[static_cast<std::size_t>(k) * stride_a] * b[static_cast<std::size_t>(k) * stride_b];
        s1 += a[static_cast<std::size_t>(k + 1) * stride_a] *
              b[static_cast<std::size_t>(k + 1) * stride_b];
        s2 += a[static_cast<std::size_t>(k + 2) * stride_a] *
              b[static_cast<std::size_t>(k + 2) * stride_b];
        s3 += a[static_cast<std::size_t>(k + 3) * stride_a] *
              b[static_cast<std::size_t>(k + 3) * stride_b];
    }
    for (; k < n; ++k)
        s0 += a[static_cast<std::size_t>(k) * stride_a] * b[static_cast<std::size_t>(k) * stride_b];
    return (s0 + s1) + (s2 + s3);
}

inline double split_sum(const double* __restrict a, int stride, int n) {
    double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
    int k = 0;
    for (; k + 4 <= n; k += 4) {
        s0 += a[static_cast<std::size_t>(k) * stride];
        s1 += a[static_cast<std::size_t>(k + 1) * stride];
        s2 += a[static_cast<std::size_t>(k + 2) * stride];
        s3 += a[static_cast<std::size_t>(k + 3) * stride];
    }
    for (; k < n; ++k) s0 += a[static_cast<std::size_t>(k) * stride];
    return (s0 + s1) + (s2 + s3);
}

// y[b][o] = bias[o] + sum_i x[b][i] * wt[i][o]; wt is in x out.
void forward_gemm(const double* __restrict x, const double* __restrict wt,
                  const double* __restrict bias, double* __restrict y, int batch, int in,
                  int out) {
    for (int bi = 0; bi < batch; ++bi) {
        const double* xr = x + static_cast<std::size_t>(bi) * in;
        double* yr = y + static_cast<std::size_t>(bi) * out;
        int o0 = 0;
        for (; o0 + kTile <= out; o0 += kTile) {
            double acc[kTile];
            for (int t = 0; t < kTile; ++t) acc[t] = bias[o0 + t];
            for (int i = 0; i < in; ++i) {
                const double xv = xr[i];
                const double* wr = wt + static_cast<std::size_t>(i) * out + o0;
                for (int t = 0; t < kTile; ++t) acc[t] += xv * wr[t];
            }
            for (int t = 0; t < kTile; ++t) yr[o0 + t] = acc[t];
        }
        for (; o0 < out; ++o0) yr[o0] = bias[o0] + split_dot(xr, wt + o0, in, out);
    }
}

// dw[o][i] += sum_b dy[b][o] * x[b][i]; db[o] += sum_b dy[b][o].
// Blocked over the batch so both operand blocks stay cache-resident.
void grad_gemm(const double* __restrict dy, const double* __restrict x, double* __restrict dw,
               double* __restrict db, int batch, int in, int out) {
    constexpr int kBlock = 64;
    for (int b0 = 0; b0 < batch; b0 += kBlock) {
        const int bend = std::min(b0 + kBlock, batch);
        for (int o = 0; o < out; ++o) {
            const double* dyo = dy + o;
            int i0 = 0;
            for (; i0 + kTile <= in; i0 += kTile) {
                double acc[kTile] = {};
                for (int bi = b0; bi < bend; ++bi) {
                    const double g = dyo[static_cast<std::size_t>(bi) * out];
                    const double* xr = x + static_cast<std::size_t>(bi) * in + i0;
                    for (int t = 0; t < kTile; ++t) acc[t] += g * xr[t];
                }
                double* dwr = dw + static_cast<std::size_t>(o) * in + i0;
                for (int t = 0; t < kTile; ++t) dwr[t] += acc[t];
            }
            for (; i0 < in; ++i0)
                dw[static_cast<std::size_t>(o) * in + i0] +=
                    split_dot2(x + static_cast<std::size_t>(b0) * in + i0, in, dyo + b0 * out,
                               out, bend - b0);
            db[o] += split_sum(dyo + b0 * out, out, bend - b0);
        }
    }
}

// dx[b][i] = sum_o dy[b][o] * w[o][i]; w is out x in.
void backprop_gemm(const double* __restrict dy, const double* __restrict w,
                   double* __restrict dx, int batch, int in, int out) {
    for (int bi = 0; bi < batch; ++bi) {
        const double* dyr = dy + static_cast<std::size_t>(bi) * out;
        double* dxr = dx + static_cast<std::size_t>(bi) * in;
        int i0 = 0;
        for (; i0 + kTile <= in; i0 += kTile) {
            double acc[kTile] = {};
            for (int o = 0; o < out; ++o) {
                const double g = dyr[o];
                const double* wr = w + static_cast<std::size_t>(o) * in + i0;
                for (int t = 0; t < kTile; ++t) acc[t] += g * wr[t];
            }
            for (int t = 0; t < kTile; ++t) dxr[i0 + t] = acc[t];
        }
        for (; i0 < in; ++i0) dxr[i0] = split_dot(dyr, w + i0, out, in);
    }
}

}  // namespace

void Linear::sync_wt() {
    wt.resize(static_cast<std::size_t>(in) * out);
    for (int o = 0; o < out; ++o)
        for (int i = 0; i < in; ++i)
            wt[static_cast<std::size_t>(i) * out + o] = w[static_cast<std::size_t>(o) * in + i];
}

void MlpGrads::zero() {
    for (auto& g : dw) std::fill(g.begin(), g.end(), 0.0);
    for (auto& g : db) std::fill(g.begin(), g.end(), 0.0);
}

Mlp Mlp::make(const std::vector<int>& sizes, Rng& rng) {
    if (sizes.size() < 2) throw std::invalid_argument("Mlp::make: need at least two sizes");
    Mlp net;
    for (std::size_t i = 0; i + 1 < sizes.size(); ++i) {
        Linear layer;
        layer.in = sizes[i];
        layer.out = sizes[i + 1];
        layer.w.resize(static_cast<std::size_t>(layer.in) * layer.out);
        layer.b.assign(static_cast<std::size_t>(layer.out), 0.0);
        const double bound = 1.0 / std::sqrt(static_cast<double>(layer.in));
        for (auto& v : layer.w) v = uniform(rng, -bound, bound);
        layer.sync_wt();
        net.layers.push_back(std::move(layer));
    }
    return net;
}

std::size_t Mlp::param_count() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += l.w.size() + l.b.size();
    return n;
}

void Mlp::forward1(const double* x, double* y) const {
    thread_local std::vector<double> buf_a, buf_b;
    const double* cur = x;
    for (std::size_t li = 0; li < layers.size(); ++li) {
        const Linear& l = layers[li];
        const bool last = li + 1 == layers.size();
        std::vector<double>& outbuf = (li % 2 == 0) ? buf_a : buf_b;
        outbuf.resize(static_cast<std::size_t>(l.out));
        forward_gemm(cur, l.wt.data(), l.b.data(), outbuf.data(), 1, l.in, l.out);
        if (last) {
            std::copy(outbuf.begin(), outbuf.end(), y);
            return;
        }
        for (double& v : outbuf) v = v > 0.0 ? v : 0.0;
        cur = outbuf.data();
    }
}

void Mlp::forward_batch(const double* x, int batch, Cache& cache) const {
    cache.batch = batch;
    cache.inputs.resize(layers.size());
    cache.pre.resize(layers.size());
    cache.inputs[0].assign(x, x + static_cast<std::size_t>(batch) * layers[0].in);
    for (std::size_t li = 0; li < layers.size(); ++li) {
        const Linear& l = layers[li];
        auto& pre = cache.pre[li];
        pre.resize(static_cast<std::size_t>(batch) * l.out);
        forward_gemm(cache.inputs[li].data(), l.wt.data(), l.b.data(), pre.data(), batch, l.in,
                     l.out);
        if (li + 1 < layers.size()) {
            auto& next = cache.inputs[li + 1];
            next.resize(pre.size());
            for (std::size_t i = 0; i < pre.size(); ++i) next[i] = pre[i] > 0.0 ? pre[i] : 0.0;
        }
    }
}

void Mlp::backward_batch(const Cache& cache, const std::vector<double>& dout, MlpGrads& grads,
                         std::vector<double>* dx) const {
    const int batch = cache.batch;
    thread_local std::vector<double> buf_a, buf_b;
    buf_a.assign(dout.begin(), dout.end());
    std::vector<double>* cur = &buf_a;
    std::vector<double>* next = &buf_b;
    for (std::size_t li = layers.size(); li-- > 0;) {
        const Linear& l = layers[li];
        grad_gemm(cur->data(), cache.inputs[li].data(), grads.dw[li].data(), grads.db[li].data(),
                  batch, l.in, l.out);
        if (li == 0 && dx == nullptr) return;
        next->resize(static_cast<std::size_t>(batch) * l.in);
        backprop_gemm(cur->data(), l.w.data(), next->data(), batch, l.in, l.out);
        if (li > 0) {
            const auto& pre = cache.pre[li - 1];
            for (std::size_t i = 0; i < next->size(); ++i)
                if (pre[i] <= 0.0) (*next)[i] = 0.0;
        }
        std::swap(cur, next);
    }
    if (dx) *dx = *cur;
}

std::vector<double> Mlp::backward_input(const Cache& cache,
                                        const std::vector<double>& dout) const {
    const int batch = cache.batch;
    thread_local std::vector<double> buf_a, buf_b;
    buf_a.assign(dout.begin(), dout.end());
    std::vector<double>* cur = &buf_a;
    std::vector<double>* next = &buf_b;
    for (std::size_t li = layers.size(); li-- > 0;) {
        const Linear& l = layers[li];
        next->resize(static_cast<std::size_t>(batch) * l.in);
        backprop_gemm(cur->data(), l.w.data(), next->data(), batch, l.in, l.out);
        if (li > 0) {
            const auto& pre = cache.pre[li - 1];
            for (std::size_t i = 0; i < next->size(); ++i)
                if (pre[i] <= 0.0) (*next)[i] = 0.0;
        }
        std::swap(cur, next);
    }
    return *cur;
}

MlpGrads Mlp::make_grads() const {
    MlpGrads g;
    for (const auto& l : layers) {
        g.dw.emplace_back(l.w.size(), 0.0);
        g.db.emplace_back(l.b.size(), 0.0);
    }
    return g;
}

void actor_forward1(const Mlp& actor, const std::array<double, 3>& obs,
                    std::array<double, 2>& mean, std::array<double, 2>& log_std) {
    std::array<double, 2 * kActionDim> head{};
    actor.forward1(obs.data(), head.data());
    for (int j = 0; j < kActionDim; ++j) {
        mean[j] = head[j];
        log_std[j] = std::clamp(head[kActionDim + j], kLogStdMin, kLogStdMax);
    }
}

double squashed_log_prob(const std::array<double, 2>& z, const std::array<double, 2>& log_std,
                         const std::array<double, 2>& action) {
    constexpr double kLog2Pi = 1.8378770664093453;
    double lp = 0.0;
    for (int j = 0; j < kActionDim; ++j) {
        lp += -0.5 * z[j] * z[j] - log_std[j] - 0.5 * kLog2Pi;
        lp -= std::log(1.0 - action[j] * action[j] + kSquashEps);
    }
    return lp;
}

SquashedSample sample_squashed(Rng& rng, const std::array<double, 2>& mean,
                               const std::array<double, 2>& log_std) {
    SquashedSample s;
    for (int j = 0; j < kActionDim; ++j) {
        s.z[j] = normal(rng);
        s.action[j] = std::tanh(mean[j] + std::exp(log_std[j]) * s.z[j]);
    }
    s.log_prob = squashed_log_prob(s.z, log_std, s.action);
    return s;
}

std::array<double, 2> deterministic_action(const std::array<double, 2>& mean) {
    return {std::tanh(mean[0]), std::tanh(mean[1])};
}

std::pair<double, double> map_action(const std::array<double, 2>& a, int a_max) {
    const double scale = static_cast<double>(a_max);
    return {std::round(a[0] * scale), std::round(a[1] * scale)};
}

namespace {
constexpr char kMagic[8] = {'M', 'M', 'S', 'A', 'C', 'N', 'E', 'T'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void write_pod(std::ofstream& f, const T& v) {
    f.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::ifstream& f) {
    T v{};
    f.read(reinterpret_cast<char*>(&v), sizeof(T));
    return v;
}
}  // namespace

void save_checkpoint(const std::string& path, const Mlp& actor, std::uint64_t norm_hash) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("save_checkpoint: cannot open " + path);
    f.write(kMagic, sizeof(kMagic));
    write_pod(f, kVersion);
    write_pod(f, static_cast<std::uint32_t>(actor.layers.size()));
    for (const auto& l : actor.layers) {
        write_pod(f, static_cast<std::uint32_t>(l.in));
        write_pod(f, static_cast<std::uint32_t>(l.out));
    }
    write_pod(f, norm_hash);
    for (const auto& l : actor.layers) {
        f.write(reinterpret_cast<const char*>(l.w.data()),
                static_cast<std::streamsize>(l.w.size() * sizeof(double)));
        f.write(reinterpret_cast<const char*>(l.b.data()),
                static_cast<std::streamsize>(l.b.size() * sizeof(double)));
    }
    if (!f) throw std::runtime_error("save_checkpoint: write failed for " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("load_checkpoint: cannot open " + path);
    char magic[8];
    f.read(magic, sizeof(magic));
    if (!f || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw std::runtime_error("load_checkpoint: bad magic in " + path);
    const auto version = read_pod<std::uint32_t>(f);
    if (version != kVersion)
        throw std::runtime_error("load_checkpoint: unsupported version in " + path);
    const auto n_layers = read_pod<std::uint32_t>(f);
    if (n_layers == 0 || n_layers > 16)
        throw std::runtime_error("load_checkpoint: implausible layer count in " + path);
    Checkpoint ckpt;
    for (std::uint32_t i = 0; i < n_layers; ++i) {
        Linear l;
        l.in = static_cast<int>(read_pod<std::uint32_t>(f));
        l.out = static_cast<int>(read_pod<std::uint32_t>(f));
        if (l.in <= 0 || l.out <= 0 || l.in > 4096 || l.out > 4096)
            throw std::runtime_error("load_checkpoint: implausible layer shape in " + path);
        l.w.resize(static_cast<std::size_t>(l.in) * l.out);
        l.b.resize(static_cast<std::size_t>(l.out));
        ckpt.actor.layers.push_back(std::move(l));
    }
    ckpt.norm_hash = read_pod<std::uint64_t>(f);
    for (auto& l : ckpt.actor.layers) {
        f.read(reinterpret_cast<char*>(l.w.data()),
               static_cast<std::streamsize>(l.w.size() * sizeof(double)));
        f.read(reinterpret_cast<char*>(l.b.data()),
               static_cast<std::streamsize>(l.b.size() * sizeof(double)));
        l.sync_wt();
    }
    if (!f) throw std::runtime_error("load_checkpoint: truncated file " + path);
    return ckpt;
}

std::pair<double, double> NeuralController::act(const ObsView& obs) const {
    const std::array<double, 3> x = {obs.norm.inv_n, obs.norm.spread_n, obs.norm.trend_n};
    std::array<double, 2> mean;
    std::array<double, 2> log_std;
    actor_forward1(actor_, x, mean, log_std);
    return map_action(deterministic_action(mean), a_max_);
}

}  // namespace mmlab
