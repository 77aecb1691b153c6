#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "koa/rng.hpp"

namespace koa::nn {

using Shape = std::vector<int>;

std::string shape_str(const Shape& s);

// Dense double-precision tensor. grad has the same extent as value once an
// op touches the tensor on a tape.
struct Tensor {
    Shape shape;
    std::vector<double> value;
    std::vector<double> grad;
    bool requires_grad = false;

    size_t numel() const { return value.size(); }
    void ensure_grad() {
        if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
    }
    void zero_grad() { grad.assign(value.size(), 0.0); }
};

using TensorPtr = std::shared_ptr<Tensor>;

TensorPtr make_tensor(Shape shape, bool requires_grad = false);
TensorPtr make_tensor(Shape shape, std::vector<double> values, bool requires_grad = false);
TensorPtr full(Shape shape, double v, bool requires_grad = false);
TensorPtr randn(Shape shape, Rng& rng, double scale = 1.0, bool requires_grad = false);

// Reverse-mode tape: ops append backward closures in execution order,
// backward() replays them in exact reverse.
class Tape {
public:
    void record(std::function<void()> backward_fn) { nodes_.push_back(std::move(backward_fn)); }

    // Seeds grad(loss)=1 and propagates. loss must be scalar.
    void backward(const TensorPtr& loss);

    void clear() { nodes_.clear(); }
    size_t size() const { return nodes_.size(); }

private:
    std::vector<std::function<void()>> nodes_;
};

// ---- forward ops (cross-correlation convention for conv2d) ----

// x: [N,Fin], W: [Fout,Fin], b: [Fout] or null
TensorPtr dense(Tape& tape, const TensorPtr& x, const TensorPtr& W, const TensorPtr& b);
// x: [N,Cin,H,W], K: [Cout,Cin,kh,kw], b: [Cout] or null
TensorPtr conv2d(Tape& tape, const TensorPtr& x, const TensorPtr& K, const TensorPtr& b,
                 int stride = 1, int pad = 0);
TensorPtr relu(Tape& tape, const TensorPtr& x);
TensorPtr silu(Tape& tape, const TensorPtr& x);
TensorPtr avg_pool2d(Tape& tape, const TensorPtr& x, int k);
TensorPtr max_pool2d(Tape& tape, const TensorPtr& x, int k);
TensorPtr upsample_nearest2x(Tape& tape, const TensorPtr& x);
TensorPtr concat(Tape& tape, const TensorPtr& x, const TensorPtr& y, int axis);
TensorPtr add(Tape& tape, const TensorPtr& x, const TensorPtr& y);
TensorPtr add_scalar(Tape& tape, const TensorPtr& x, double c);
// x: [N,C,H,W] + v: [N,C] broadcast over the spatial extent
TensorPtr add_channelwise(Tape& tape, const TensorPtr& x, const TensorPtr& v);
TensorPtr global_avg_pool(Tape& tape, const TensorPtr& x);
// per-sample, per-channel normalization; gamma/beta: [C]
TensorPtr instance_norm(Tape& tape, const TensorPtr& x, const TensorPtr& gamma,
                        const TensorPtr& beta, double eps = 1e-5);
// scalar mean cross-entropy from logits [N,C] against labels [N]
TensorPtr softmax_cross_entropy(Tape& tape, const TensorPtr& logits,
                                const std::vector<int>& labels);
TensorPtr mse(Tape& tape, const TensorPtr& a, const TensorPtr& b);
TensorPtr sum(Tape& tape, const TensorPtr& x);
// picks one element as a scalar tensor (used to backprop a single logit)
TensorPtr select(Tape& tape, const TensorPtr& x, size_t flat_index);

// interleaved sin/cos embedding, geometric frequency ladder spanning 1..1e4;
// leaf tensor, not differentiated
TensorPtr sinusoidal_embed(const std::vector<int>& t, int dim);

// inference-only helpers
std::vector<double> softmax(const std::vector<double>& logits);

// ---- optimizer ----

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// Bias-corrected Adam over a fixed set of named parameters; iteration order
// is the map order, so updates are deterministic.
class Adam {
public:
    explicit Adam(AdamConfig config = {}) : config_(config) {}

    // applies one update from the gradients currently held by the parameters
    void step(const std::map<std::string, TensorPtr>& params);

    const AdamConfig& config() const { return config_; }

private:
    AdamConfig config_;
    int64_t t_ = 0;
    std::map<std::string, std::vector<double>> m_, v_;
};

// ---- checkpoint container ----

using ParamMap = std::map<std::string, TensorPtr>;

// flat binary container of named shape-prefixed f64 arrays, little-endian
void save_checkpoint(const ParamMap& params, const std::string& path);
ParamMap load_checkpoint(const std::string& path);

void zero_grads(const ParamMap& params);
uint64_t param_checksum(const TensorPtr& t);

}  // namespace koa::nn
