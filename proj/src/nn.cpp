#include "koa/nn.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace koa::nn {

std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << "[";
    for (size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
    os << "]";
    return os.str();
}

namespace {

size_t shape_numel(const Shape& s) {
    size_t n = 1;
    for (int d : s) {
        if (d < 1) throw std::invalid_argument("tensor dimension must be >= 1, got " + shape_str(s));
        n *= static_cast<size_t>(d);
    }
    return n;
}

[[noreturn]] void shape_error(const char* op, const Shape& a, const Shape& b) {
    throw std::invalid_argument(std::string(op) + ": incompatible shapes " + shape_str(a) +
                                " and " + shape_str(b));
}

void require(bool cond, const char* op, const std::string& msg) {
    if (!cond) throw std::invalid_argument(std::string(op) + ": " + msg);
}

inline size_t idx4(int n, int c, int y, int x, int C, int H, int W) {
    return ((static_cast<size_t>(n) * C + c) * H + y) * W + x;
}

}  // namespace

TensorPtr make_tensor(Shape shape, bool requires_grad) {
    auto t = std::make_shared<Tensor>();
    t->value.assign(shape_numel(shape), 0.0);
    t->shape = std::move(shape);
    t->requires_grad = requires_grad;
    return t;
}

TensorPtr make_tensor(Shape shape, std::vector<double> values, bool requires_grad) {
    if (shape_numel(shape) != values.size())
        throw std::invalid_argument("make_tensor: value count does not match shape " +
                                    shape_str(shape));
    auto t = std::make_shared<Tensor>();
    t->shape = std::move(shape);
    t->value = std::move(values);
    t->requires_grad = requires_grad;
    return t;
}

TensorPtr full(Shape shape, double v, bool requires_grad) {
    auto t = make_tensor(std::move(shape), requires_grad);
    std::fill(t->value.begin(), t->value.end(), v);
    return t;
}

TensorPtr randn(Shape shape, Rng& rng, double scale, bool requires_grad) {
    auto t = make_tensor(std::move(shape), requires_grad);
    for (double& v : t->value) v = rng.gaussian() * scale;
    return t;
}

void Tape::backward(const TensorPtr& loss) {
    if (loss->numel() != 1)
        throw std::invalid_argument("backward: loss must be scalar, got " + shape_str(loss->shape));
    loss->ensure_grad();
    loss->grad[0] = 1.0;
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) (*it)();
}

namespace {

// every op routes through this so grads exist before the closure runs
TensorPtr prepare(Tape& tape, Shape shape, std::initializer_list<TensorPtr> inputs) {
    auto out = make_tensor(std::move(shape));
    out->ensure_grad();
    for (const TensorPtr& in : inputs)
        if (in) in->ensure_grad();
    (void)tape;
    return out;
}

}  // namespace

TensorPtr dense(Tape& tape, const TensorPtr& x, const TensorPtr& W, const TensorPtr& b) {
    require(x->shape.size() == 2, "dense", "input must be [N,Fin], got " + shape_str(x->shape));
    require(W->shape.size() == 2, "dense", "weight must be [Fout,Fin], got " + shape_str(W->shape));
    const int N = x->shape[0], Fin = x->shape[1];
    const int Fout = W->shape[0];
    if (W->shape[1] != Fin) shape_error("dense", x->shape, W->shape);
    if (b) require(b->shape == Shape{Fout}, "dense", "bias must be [Fout]");

    auto out = prepare(tape, {N, Fout}, {x, W, b});
    for (int n = 0; n < N; ++n)
        for (int f = 0; f < Fout; ++f) {
            double acc = b ? b->value[f] : 0.0;
            const double* xr = &x->value[static_cast<size_t>(n) * Fin];
            const double* wr = &W->value[static_cast<size_t>(f) * Fin];
            for (int i = 0; i < Fin; ++i) acc += xr[i] * wr[i];
            out->value[static_cast<size_t>(n) * Fout + f] = acc;
        }

    tape.record([x, W, b, out, N, Fin, Fout] {
        for (int n = 0; n < N; ++n)
            for (int f = 0; f < Fout; ++f) {
                double g = out->grad[static_cast<size_t>(n) * Fout + f];
                if (g == 0.0) continue;
                double* dxr = &x->grad[static_cast<size_t>(n) * Fin];
                double* dwr = &W->grad[static_cast<size_t>(f) * Fin];
                const double* xr = &x->value[static_cast<size_t>(n) * Fin];
                const double* wr = &W->value[static_cast<size_t>(f) * Fin];
                for (int i = 0; i < Fin; ++i) {
                    dxr[i] += g * wr[i];
                    dwr[i] += g * xr[i];
                }
                if (b) b->grad[f] += g;
            }
    });
    return out;
}

TensorPtr conv2d(Tape& tape, const TensorPtr& x, const TensorPtr& K, const TensorPtr& b,
                 int stride, int pad) {
    require(x->shape.size() == 4, "conv2d", "input must be [N,Cin,H,W], got " + shape_str(x->shape));
    require(K->shape.size() == 4, "conv2d",
            "kernel must be [Cout,Cin,kh,kw], got " + shape_str(K->shape));
    require(stride >= 1, "conv2d", "stride must be >= 1");
    require(pad >= 0, "conv2d", "pad must be >= 0");
    const int N = x->shape[0], Cin = x->shape[1], H = x->shape[2], W = x->shape[3];
    const int Cout = K->shape[0], kh = K->shape[2], kw = K->shape[3];
    if (K->shape[1] != Cin) shape_error("conv2d", x->shape, K->shape);
    const int Ho = (H + 2 * pad - kh) / stride + 1;
    const int Wo = (W + 2 * pad - kw) / stride + 1;
    require(H + 2 * pad >= kh && W + 2 * pad >= kw, "conv2d", "kernel larger than padded input");
    if (b) require(b->shape == Shape{Cout}, "conv2d", "bias must be [Cout]");

    auto out = prepare(tape, {N, Cout, Ho, Wo}, {x, K, b});
    for (int n = 0; n < N; ++n)
        for (int co = 0; co < Cout; ++co)
            for (int oy = 0; oy < Ho; ++oy)
                for (int ox = 0; ox < Wo; ++ox) {
                    double acc = b ? b->value[co] : 0.0;
                    for (int ci = 0; ci < Cin; ++ci)
                        for (int ky = 0; ky < kh; ++ky) {
                            const int iy = oy * stride + ky - pad;
                            if (iy < 0 || iy >= H) continue;
                            for (int kx = 0; kx < kw; ++kx) {
                                const int ix = ox * stride + kx - pad;
                                if (ix < 0 || ix >= W) continue;
                                acc += x->value[idx4(n, ci, iy, ix, Cin, H, W)] *
                                       K->value[idx4(co, ci, ky, kx, Cin, kh, kw)];
                            }
                        }
                    out->value[idx4(n, co, oy, ox, Cout, Ho, Wo)] = acc;
                }

    tape.record([x, K, b, out, N, Cin, H, W, Cout, kh, kw, Ho, Wo, stride, pad] {
        for (int n = 0; n < N; ++n)
            for (int co = 0; co < Cout; ++co)
                for (int oy = 0; oy < Ho; ++oy)
                    for (int ox = 0; ox < Wo; ++ox) {
                        const double g = out->grad[idx4(n, co, oy, ox, Cout, Ho, Wo)];
                        if (g == 0.0) continue;
                        if (b) b->grad[co] += g;
                        for (int ci = 0; ci < Cin; ++ci)
                            for (int ky = 0; ky < kh; ++ky) {
                                const int iy = oy * stride + ky - pad;
                                if (iy < 0 || iy >= H) continue;
                                for (int kx = 0; kx < kw; ++kx) {
                                    const int ix = ox * stride + kx - pad;
                                    if (ix < 0 || ix >= W) continue;
                                    x->grad[idx4(n, ci, iy, ix, Cin, H, W)] +=
                                        g * K->value[idx4(co, ci, ky, kx, Cin, kh, kw)];
                                    K->grad[idx4(co, ci, ky, kx, Cin, kh, kw)] +=
                                        g * x->value[idx4(n, ci, iy, ix, Cin, H, W)];
                                }
                            }
                    }
    });
    return out;
}

TensorPtr relu(Tape& tape, const TensorPtr& x) {
    auto out = prepare(tape, x->shape, {x});
    for (size_t i = 0; i < x->numel(); ++i) out->value[i] = x->value[i] > 0.0 ? x->value[i] : 0.0;
    tape.record([x, out] {
        for (size_t i = 0; i < x->numel(); ++i)
            if (x->value[i] > 0.0) x->grad[i] += out->grad[i];
    });
    return out;
}

TensorPtr silu(Tape& tape, const TensorPtr& x) {
    auto out = prepare(tape, x->shape, {x});
    for (size_t i = 0; i < x->numel(); ++i) {
        double s = 1.0 / (1.0 + std::exp(-x->value[i]));
        out->value[i] = x->value[i] * s;
    }
    tape.record([x, out] {
        for (size_t i = 0; i < x->numel(); ++i) {
            double s = 1.0 / (1.0 + std::exp(-x->value[i]));
            x->grad[i] += out->grad[i] * s * (1.0 + x->value[i] * (1.0 - s));
        }
    });
    return out;
}

namespace {

void check_pool(const TensorPtr& x, int k, const char* op) {
    require(x->shape.size() == 4, op, "input must be [N,C,H,W], got " + shape_str(x->shape));
    require(k >= 1, op, "window must be >= 1");
    require(x->shape[2] % k == 0 && x->shape[3] % k == 0, op,
            "spatial dims " + shape_str(x->shape) + " not divisible by window " + std::to_string(k));
}

}  // namespace

TensorPtr avg_pool2d(Tape& tape, const TensorPtr& x, int k) {
    check_pool(x, k, "avg_pool2d");
    const int N = x->shape[0], C = x->shape[1], H = x->shape[2], W = x->shape[3];
    const int Ho = H / k, Wo = W / k;
    auto out = prepare(tape, {N, C, Ho, Wo}, {x});
    const double inv = 1.0 / (k * k);
    for (int n = 0; n < N; ++n)
        for (int c = 0; c < C; ++c)
            for (int oy = 0; oy < Ho; ++oy)
                for (int ox = 0; ox < Wo; ++ox) {
                    double acc = 0.0;
                    for (int ky = 0; ky < k; ++ky)
                        for (int kx = 0; kx < k; ++kx)
                            acc += x->value[idx4(n, c, oy * k + ky, ox * k + kx, C, H, W)];
                    out->value[idx4(n, c, oy, ox, C, Ho, Wo)] = acc * inv;
                }
    tape.record([x, out, N, C, H, W, Ho, Wo, k, inv] {
        for (int n = 0; n < N; ++n)
            for (int c = 0; c < C; ++c)
                for (int oy = 0; oy < Ho; ++oy)
                    for (int ox = 0; ox < Wo; ++ox) {
                        const double g = out->grad[idx4(n, c, oy, ox, C, Ho, Wo)] * inv;
                        for (int ky = 0; ky < k; ++ky)
                            for (int kx = 0; kx < k; ++kx)
                                x->grad[idx4(n, c, oy * k + ky, ox * k + kx, C, H, W)] += g;
                    }
    });
    return out;
}

TensorPtr max_pool2d(Tape& tape, const TensorPtr& x, int k) {
    check_pool(x, k, "max_pool2d");
    const int N = x->shape[0], C = x->shape[1], H = x->shape[2], W = x->shape[3];
    const int Ho = H / k, Wo = W / k;
    auto out = prepare(tape, {N, C, Ho, Wo}, {x});
    auto argmax = std::make_shared<std::vector<size_t>>(out->numel());
    for (int n = 0; n < N; ++n)
        for (int c = 0; c < C; ++c)
            for (int oy = 0; oy < Ho; ++oy)
                for (int ox = 0; ox < Wo; ++ox) {
                    size_t best = idx4(n, c, oy * k, ox * k, C, H, W);
                    double bv = x->value[best];
                    for (int ky = 0; ky < k; ++ky)
                        for (int kx = 0; kx < k; ++kx) {
                            size_t i = idx4(n, c, oy * k + ky, ox * k + kx, C, H, W);
                            if (x->value[i] > bv) {
                                bv = x->value[i];
                                best = i;
                            }
                        }
                    size_t o = idx4(n, c, oy, ox, C, Ho, Wo);
                    out->value[o] = bv;
                    (*argmax)[o] = best;
                }
    tape.record([x, out, argmax] {
        for (size_t o = 0; o < out->numel(); ++o) x->grad[(*argmax)[o]] += out->grad[o];
    });
    return out;
}

TensorPtr upsample_nearest2x(Tape& tape, const TensorPtr& x) {
    require(x->shape.size() == 4, "upsample_nearest2x", "input must be [N,C,H,W]");
    const int N = x->shape[0], C = x->shape[1], H = x->shape[2], W = x->shape[3];
    auto out = prepare(tape, {N, C, 2 * H, 2 * W}, {x});
    for (int n = 0; n < N; ++n)
        for (int c = 0; c < C; ++c)
            for (int y = 0; y < 2 * H; ++y)
                for (int xx = 0; xx < 2 * W; ++xx)
                    out->value[idx4(n, c, y, xx, C, 2 * H, 2 * W)] =
                        x->value[idx4(n, c, y / 2, xx / 2, C, H, W)];
    tape.record([x, out, N, C, H, W] {
        for (int n = 0; n < N; ++n)
            for (int c = 0; c < C; ++c)
                for (int y = 0; y < 2 * H; ++y)
                    for (int xx = 0; xx < 2 * W; ++xx)
                        x->grad[idx4(n, c, y / 2, xx / 2, C, H, W)] +=
                            out->grad[idx4(n, c, y, xx, C, 2 * H, 2 * W)];
    });
    return out;
}

TensorPtr concat(Tape& tape, const TensorPtr& x, const TensorPtr& y, int axis) {
    require(x->shape.size() == y->shape.size(), "concat", "rank mismatch");
    require(axis >= 0 && axis < static_cast<int>(x->shape.size()), "concat", "axis out of range");
    for (int d = 0; d < static_cast<int>(x->shape.size()); ++d)
        if (d != axis && x->shape[d] != y->shape[d]) shape_error("concat", x->shape, y->shape);

    Shape os = x->shape;
    os[axis] += y->shape[axis];
    size_t outer = 1, inner = 1;
    for (int d = 0; d < axis; ++d) outer *= static_cast<size_t>(x->shape[d]);
    for (int d = axis + 1; d < static_cast<int>(x->shape.size()); ++d)
        inner *= static_cast<size_t>(x->shape[d]);
    const size_t xa = static_cast<size_t>(x->shape[axis]) * inner;
    const size_t ya = static_cast<size_t>(y->shape[axis]) * inner;

    auto out = prepare(tape, os, {x, y});
    for (size_t o = 0; o < outer; ++o) {
        std::copy_n(&x->value[o * xa], xa, &out->value[o * (xa + ya)]);
        std::copy_n(&y->value[o * ya], ya, &out->value[o * (xa + ya) + xa]);
    }
    tape.record([x, y, out, outer, xa, ya] {
        for (size_t o = 0; o < outer; ++o) {
            for (size_t i = 0; i < xa; ++i) x->grad[o * xa + i] += out->grad[o * (xa + ya) + i];
            for (size_t i = 0; i < ya; ++i) y->grad[o * ya + i] += out->grad[o * (xa + ya) + xa + i];
        }
    });
    return out;
}

TensorPtr add(Tape& tape, const TensorPtr& x, const TensorPtr& y) {
    if (x->shape != y->shape) shape_error("add", x->shape, y->shape);
    auto out = prepare(tape, x->shape, {x, y});
    for (size_t i = 0; i < x->numel(); ++i) out->value[i] = x->value[i] + y->value[i];
    tape.record([x, y, out] {
        for (size_t i = 0; i < out->numel(); ++i) {
            x->grad[i] += out->grad[i];
            y->grad[i] += out->grad[i];
        }
    });
    return out;
}

TensorPtr add_scalar(Tape& tape, const TensorPtr& x, double c) {
    auto out = prepare(tape, x->shape, {x});
    for (size_t i = 0; i < x->numel(); ++i) out->value[i] = x->value[i] + c;
    tape.record([x, out] {
        for (size_t i = 0; i < out->numel(); ++i) x->grad[i] += out->grad[i];
    });
    return out;
}

TensorPtr add_channelwise(Tape& tape, const TensorPtr& x, const TensorPtr& v) {
    require(x->shape.size() == 4, "add_channelwise", "input must be [N,C,H,W]");
    require(v->shape.size() == 2, "add_channelwise", "bias must be [N,C]");
    const int N = x->shape[0], C = x->shape[1], H = x->shape[2], W = x->shape[3];
    if (v->shape[0] != N || v->shape[1] != C) shape_error("add_channelwise", x->shape, v->shape);
    auto out = prepare(tape, x->shape, {x, v});
    for (int n = 0; n < N; ++n)
        for (int c = 0; c < C; ++c) {
            const double bias = v->value[static_cast<size_t>(n) * C + c];
            const size_t base = idx4(n, c, 0, 0, C, H, W);
            for (int i = 0; i < H * W; ++i) out->value[base + i] = x->value[base + i] + bias;
        }
    tape.record([x, v, out, N, C, H, W] {
        for (int n = 0; n < N; ++n)
            for (int c = 0; c < C; ++c) {
                const size_t base = idx4(n, c, 0, 0, C, H, W);
                double acc = 0.0;
                for (int i = 0; i < H * W; ++i) {
                    x->grad[base + i] += out->grad[base + i];
                    acc += out->grad[base + i];
                }
                v->grad[static_cast<size_t>(n) * C + c] += acc;
            }
    });
    return out;
}

TensorPtr global_avg_pool(Tape& tape, const TensorPtr& x) {
    require(x->shape.size() == 4, "global_avg_pool", "input must be [N,C,H,W]");
    const int N = x->shape[0], C = x->shape[1], H = x->shape[2], W = x->shape[3];
    auto out = prepare(tape, {N, C}, {x});
    const double inv = 1.0 / (H * W);
    for (int n = 0; n < N; ++n)
        for (int c = 0; c < C; ++c) {
            const size_t base = idx4(n, c, 0, 0, C, H, W);
            double acc = 0.0;
            for (int i = 0; i < H * W; ++i) acc += x->value[base + i];
            out->value[static_cast<size_t>(n) * C + c] = acc * inv;
        }
    tape.record([x, out, N, C, H, W, inv] {
        for (int n = 0; n < N; ++n)
            for (int c = 0; c < C; ++c) {
                const double g = out->grad[static_cast<size_t>(n) * C + c] * inv;
                const size_t base = idx4(n, c, 0, 0, C, H, W);
                for (int i = 0; i < H * W; ++i) x->grad[base + i] += g;
            }
    });
    return out;
}

TensorPtr instance_norm(Tape& tape, const TensorPtr& x, const TensorPtr& gamma,
                        const TensorPtr& beta, double eps) {
    require(x->shape.size() == 4, "instance_norm", "input must be [N,C,H,W]");
    const int N = x->shape[0], C = x->shape[1], H = x->shape[2], W = x->shape[3];
    require(gamma->shape == Shape{C} && beta->shape == Shape{C}, "instance_norm",
            "gamma/beta must be [C]");
    const int m = H * W;
    auto out = prepare(tape, x->shape, {x, gamma, beta});
    auto xhat = std::make_shared<std::vector<double>>(x->numel());
    auto inv_std = std::make_shared<std::vector<double>>(static_cast<size_t>(N) * C);

    for (int n = 0; n < N; ++n)
        for (int c = 0; c < C; ++c) {
            const size_t base = idx4(n, c, 0, 0, C, H, W);
            double mean = 0.0;
            for (int i = 0; i < m; ++i) mean += x->value[base + i];
            mean /= m;
            double var = 0.0;
            for (int i = 0; i < m; ++i) {
                double d = x->value[base + i] - mean;
                var += d * d;
            }
            var /= m;
            const double inv = 1.0 / std::sqrt(var + eps);
            (*inv_std)[static_cast<size_t>(n) * C + c] = inv;
            const double g = gamma->value[c], b = beta->value[c];
            for (int i = 0; i < m; ++i) {
                double xh = (x->value[base + i] - mean) * inv;
                (*xhat)[base + i] = xh;
                out->value[base + i] = g * xh + b;
            }
        }

    tape.record([x, gamma, beta, out, xhat, inv_std, N, C, H, W, m] {
        for (int n = 0; n < N; ++n)
            for (int c = 0; c < C; ++c) {
                const size_t base = idx4(n, c, 0, 0, C, H, W);
                const double g = gamma->value[c];
                const double inv = (*inv_std)[static_cast<size_t>(n) * C + c];
                double sum_dy = 0.0, sum_dy_xhat = 0.0;
                for (int i = 0; i < m; ++i) {
                    const double dy = out->grad[base + i];
                    sum_dy += dy;
                    sum_dy_xhat += dy * (*xhat)[base + i];
                    gamma->grad[c] += dy * (*xhat)[base + i];
                    beta->grad[c] += dy;
                }
                const double mean_dy = sum_dy / m;
                const double mean_dy_xhat = sum_dy_xhat / m;
                for (int i = 0; i < m; ++i) {
                    const double dy = out->grad[base + i];
                    x->grad[base + i] +=
                        g * inv * (dy - mean_dy - (*xhat)[base + i] * mean_dy_xhat);
                }
            }
    });
    return out;
}

std::vector<double> softmax(const std::vector<double>& logits) {
    double m = *std::max_element(logits.begin(), logits.end());
    std::vector<double> p(logits.size());
    double z = 0.0;
    for (size_t i = 0; i < logits.size(); ++i) {
        p[i] = std::exp(logits[i] - m);
        z += p[i];
    }
    for (double& v : p) v /= z;
    return p;
}

TensorPtr softmax_cross_entropy(Tape& tape, const TensorPtr& logits,
                                const std::vector<int>& labels) {
    require(logits->shape.size() == 2, "softmax_cross_entropy",
            "logits must be [N,C], got " + shape_str(logits->shape));
    const int N = logits->shape[0], C = logits->shape[1];
    require(static_cast<int>(labels.size()) == N, "softmax_cross_entropy",
            "label count must equal batch size");
    for (int l : labels)
        require(l >= 0 && l < C, "softmax_cross_entropy", "label out of range");

    auto out = prepare(tape, {1}, {logits});
    auto probs = std::make_shared<std::vector<double>>(logits->numel());
    double loss = 0.0;
    for (int n = 0; n < N; ++n) {
        const double* row = &logits->value[static_cast<size_t>(n) * C];
        double mx = *std::max_element(row, row + C);
        double z = 0.0;
        for (int c = 0; c < C; ++c) z += std::exp(row[c] - mx);
        double lse = mx + std::log(z);
        loss += lse - row[labels[n]];
        for (int c = 0; c < C; ++c)
            (*probs)[static_cast<size_t>(n) * C + c] = std::exp(row[c] - mx) / z;
    }
    out->value[0] = loss / N;

    tape.record([logits, out, probs, labels, N, C] {
        const double g = out->grad[0] / N;
        for (int n = 0; n < N; ++n)
            for (int c = 0; c < C; ++c)
                logits->grad[static_cast<size_t>(n) * C + c] +=
                    g * ((*probs)[static_cast<size_t>(n) * C + c] - (labels[n] == c ? 1.0 : 0.0));
    });
    return out;
}

TensorPtr mse(Tape& tape, const TensorPtr& a, const TensorPtr& b) {
    if (a->shape != b->shape) shape_error("mse", a->shape, b->shape);
    auto out = prepare(tape, {1}, {a, b});
    const size_t M = a->numel();
    double acc = 0.0;
    for (size_t i = 0; i < M; ++i) {
        double d = a->value[i] - b->value[i];
        acc += d * d;
    }
    out->value[0] = acc / static_cast<double>(M);
    tape.record([a, b, out, M] {
        const double g = out->grad[0] * 2.0 / static_cast<double>(M);
        for (size_t i = 0; i < M; ++i) {
            double d = a->value[i] - b->value[i];
            a->grad[i] += g * d;
            b->grad[i] -= g * d;
        }
    });
    return out;
}

TensorPtr sum(Tape& tape, const TensorPtr& x) {
    auto out = prepare(tape, {1}, {x});
    out->value[0] = std::accumulate(x->value.begin(), x->value.end(), 0.0);
    tape.record([x, out] {
        for (size_t i = 0; i < x->numel(); ++i) x->grad[i] += out->grad[0];
    });
    return out;
}

TensorPtr select(Tape& tape, const TensorPtr& x, size_t flat_index) {
    require(flat_index < x->numel(), "select", "index out of range");
    auto out = prepare(tape, {1}, {x});
    out->value[0] = x->value[flat_index];
    tape.record([x, out, flat_index] { x->grad[flat_index] += out->grad[0]; });
    return out;
}

TensorPtr sinusoidal_embed(const std::vector<int>& t, int dim) {
    if (dim < 2 || dim % 2 != 0)
        throw std::invalid_argument("sinusoidal_embed: dim must be even and >= 2");
    const int N = static_cast<int>(t.size());
    const int half = dim / 2;
    auto out = make_tensor({N, dim});
    for (int n = 0; n < N; ++n)
        for (int i = 0; i < half; ++i) {
            double freq = half > 1 ? std::pow(10000.0, -static_cast<double>(i) / (half - 1)) : 1.0;
            double a = t[n] * freq;
            out->value[static_cast<size_t>(n) * dim + 2 * i] = std::sin(a);
            out->value[static_cast<size_t>(n) * dim + 2 * i + 1] = std::cos(a);
        }
    return out;
}

void Adam::step(const std::map<std::string, TensorPtr>& params) {
    ++t_;
    const double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
    for (const auto& [name, p] : params) {
        p->ensure_grad();
        auto& m = m_[name];
        auto& v = v_[name];
        if (m.size() != p->numel()) m.assign(p->numel(), 0.0);
        if (v.size() != p->numel()) v.assign(p->numel(), 0.0);
        for (size_t i = 0; i < p->numel(); ++i) {
            const double g = p->grad[i];
            m[i] = config_.beta1 * m[i] + (1.0 - config_.beta1) * g;
            v[i] = config_.beta2 * v[i] + (1.0 - config_.beta2) * g * g;
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            p->value[i] -= config_.lr * mhat / (std::sqrt(vhat) + config_.eps);
        }
    }
}

namespace {

void put_u32(std::ostream& f, uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    f.write(reinterpret_cast<char*>(b), 4);
}

uint32_t get_u32(std::istream& f) {
    unsigned char b[4];
    f.read(reinterpret_cast<char*>(b), 4);
    return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
           (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}

constexpr char kMagic[4] = {'K', 'O', 'A', 'C'};

}  // namespace

void save_checkpoint(const ParamMap& params, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("save_checkpoint: cannot open " + path);
    f.write(kMagic, 4);
    put_u32(f, 1);  // version
    put_u32(f, static_cast<uint32_t>(params.size()));
    for (const auto& [name, t] : params) {
        put_u32(f, static_cast<uint32_t>(name.size()));
        f.write(name.data(), static_cast<std::streamsize>(name.size()));
        put_u32(f, static_cast<uint32_t>(t->shape.size()));
        for (int d : t->shape) put_u32(f, static_cast<uint32_t>(d));
        // doubles stored raw; this code targets little-endian IEEE hosts
        f.write(reinterpret_cast<const char*>(t->value.data()),
                static_cast<std::streamsize>(t->value.size() * sizeof(double)));
    }
    if (!f) throw std::runtime_error("save_checkpoint: write failed for " + path);
}

ParamMap load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("load_checkpoint: cannot open " + path);
    char magic[4];
    f.read(magic, 4);
    if (std::memcmp(magic, kMagic, 4) != 0)
        throw std::runtime_error("load_checkpoint: bad magic in " + path);
    uint32_t version = get_u32(f);
    if (version != 1) throw std::runtime_error("load_checkpoint: unsupported version");
    uint32_t count = get_u32(f);
    ParamMap params;
    for (uint32_t e = 0; e < count; ++e) {
        uint32_t name_len = get_u32(f);
        std::string name(name_len, '\0');
        f.read(name.data(), name_len);
        uint32_t ndim = get_u32(f);
        Shape shape(ndim);
        for (uint32_t d = 0; d < ndim; ++d) shape[d] = static_cast<int>(get_u32(f));
        auto t = make_tensor(shape, true);
        f.read(reinterpret_cast<char*>(t->value.data()),
               static_cast<std::streamsize>(t->value.size() * sizeof(double)));
        if (!f) throw std::runtime_error("load_checkpoint: truncated file " + path);
        params[name] = t;
    }
    return params;
}

void zero_grads(const ParamMap& params) {
    for (const auto& [name, t] : params) t->zero_grad();
}

uint64_t param_checksum(const TensorPtr& t) {
    // FNV-1a over the raw value bytes
    uint64_t h = 1469598103934665603ULL;
    const unsigned char* p = reinterpret_cast<const unsigned char*>(t->value.data());
    for (size_t i = 0; i < t->value.size() * sizeof(double); ++i) {
        h ^= p[i];
        h *= 1099511628211ULL;
    }
    return h;
}

}  // namespace koa::nn
