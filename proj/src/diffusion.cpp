#include "koa/diffusion.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace koa {

using nn::Tape;
using nn::TensorPtr;

double NoiseSchedule::alpha_bar(int t) const {
    if (t < 0 || t > T) throw std::invalid_argument("alpha_bar: t out of range 0..T");
    return t == 0 ? 1.0 : alpha_bars[t - 1];
}

NoiseSchedule build_schedule(int T) {
    if (T < 1) throw std::invalid_argument("build_schedule: T must be >= 1");
    NoiseSchedule s;
    s.T = T;
    s.betas.resize(T);
    s.alphas.resize(T);
    s.alpha_bars.resize(T);
    const double beta_lo = 1e-4, beta_hi = 0.02;
    double running = 1.0;
    for (int i = 0; i < T; ++i) {
        double beta = T == 1 ? beta_lo : beta_lo + (beta_hi - beta_lo) * i / (T - 1);
        s.betas[i] = beta;
        s.alphas[i] = 1.0 - beta;
        running *= s.alphas[i];
        s.alpha_bars[i] = running;
    }
    return s;
}

std::vector<double> forward_diffuse(const std::vector<double>& x0, int t,
                                    const std::vector<double>& noise, const NoiseSchedule& s) {
    if (t < 1 || t > s.T) throw std::invalid_argument("forward_diffuse: t must be in 1..T");
    if (noise.size() != x0.size())
        throw std::invalid_argument("forward_diffuse: noise size must match x0");
    const double a = std::sqrt(s.alpha_bar(t));
    const double b = std::sqrt(1.0 - s.alpha_bar(t));
    std::vector<double> out(x0.size());
    for (size_t i = 0; i < x0.size(); ++i) out[i] = a * x0[i] + b * noise[i];
    return out;
}

std::vector<int> ddim_subsequence(int T, int S) {
    if (S < 1) throw std::invalid_argument("ddim_subsequence: S must be >= 1");
    if (S > T) throw std::invalid_argument("ddim_subsequence: S must not exceed T");
    const int stride = T / S;
    std::vector<int> seq(S);
    for (int i = 0; i < S; ++i) seq[i] = T - i * stride;
    return seq;
}

std::vector<double> ddim_step(const std::vector<double>& x_t, const std::vector<double>& eps_hat,
                              int t, int t_prev, double eta, const std::vector<double>* z,
                              const NoiseSchedule& s) {
    if (!(t > t_prev && t_prev >= 0)) throw std::invalid_argument("ddim_step: need t > t_prev >= 0");
    if (eta < 0.0) throw std::invalid_argument("ddim_step: eta must be non-negative");
    if (eps_hat.size() != x_t.size()) throw std::invalid_argument("ddim_step: size mismatch");

    const double ab_t = s.alpha_bar(t);
    const double ab_prev = s.alpha_bar(t_prev);
    const double sqrt_ab_t = std::sqrt(ab_t);
    const double sqrt_one_minus_ab_t = std::sqrt(1.0 - ab_t);

    double sigma = 0.0;
    if (eta > 0.0 && t_prev > 0) {
        sigma = eta * std::sqrt((1.0 - ab_prev) / (1.0 - ab_t)) * std::sqrt(1.0 - ab_t / ab_prev);
    }
    const double sigma2 = sigma * sigma;
    if (sigma2 > 1.0 - ab_prev + 1e-15)
        throw std::runtime_error("ddim_step: sigma^2 exceeds 1 - alpha_bar(t_prev)");
    if (sigma > 0.0 && z == nullptr)
        throw std::invalid_argument("ddim_step: eta > 0 requires noise z");

    const double dir = std::sqrt(std::max(0.0, 1.0 - ab_prev - sigma2));
    const double sqrt_ab_prev = std::sqrt(ab_prev);

    std::vector<double> out(x_t.size());
    for (size_t i = 0; i < x_t.size(); ++i) {
        double x0 = (x_t[i] - sqrt_one_minus_ab_t * eps_hat[i]) / sqrt_ab_t;
        x0 = std::clamp(x0, -1.0, 1.0);
        out[i] = sqrt_ab_prev * x0 + dir * eps_hat[i];
        if (sigma > 0.0) out[i] += sigma * (*z)[i];
    }
    return out;
}

namespace {

void init_conv(nn::ParamMap& p, const std::string& prefix, int cin, int cout, Rng& rng,
               bool zero = false) {
    double std = zero ? 0.0 : std::sqrt(2.0 / (cin * 9));
    p[prefix + ".w"] = nn::randn({cout, cin, 3, 3}, rng, std, true);
    p[prefix + ".b"] = nn::make_tensor({cout}, true);
}

void init_norm(nn::ParamMap& p, const std::string& prefix, int c) {
    p[prefix + ".gamma"] = nn::full({c}, 1.0, true);
    p[prefix + ".beta"] = nn::make_tensor({c}, true);
}

void init_dense(nn::ParamMap& p, const std::string& prefix, int fin, int fout, Rng& rng) {
    p[prefix + ".w"] = nn::randn({fout, fin}, rng, std::sqrt(2.0 / fin), true);
    p[prefix + ".b"] = nn::make_tensor({fout}, true);
}

}  // namespace

DenoiserNet make_denoiser(const DenoiserConfig& config, uint64_t seed) {
    if (config.base_channels < 1 || config.time_dim < 2 || config.time_dim % 2 != 0)
        throw std::invalid_argument("make_denoiser: bad config");
    DenoiserNet net;
    net.config = config;
    Rng rng(seed);
    const int c = config.base_channels;
    auto& p = net.params;

    init_conv(p, "enc1a", 1, c, rng);
    init_norm(p, "enc1a_norm", c);
    init_conv(p, "enc1b", c, c, rng);
    init_norm(p, "enc1b_norm", c);
    init_conv(p, "enc2a", c, 2 * c, rng);
    init_norm(p, "enc2a_norm", 2 * c);
    init_conv(p, "enc2b", 2 * c, 2 * c, rng);
    init_norm(p, "enc2b_norm", 2 * c);
    init_conv(p, "enc3a", 2 * c, 4 * c, rng);
    init_norm(p, "enc3a_norm", 4 * c);
    init_conv(p, "enc3b", 4 * c, 4 * c, rng);
    init_norm(p, "enc3b_norm", 4 * c);
    init_conv(p, "dec2a", 6 * c, 2 * c, rng);
    init_norm(p, "dec2a_norm", 2 * c);
    init_conv(p, "dec2b", 2 * c, 2 * c, rng);
    init_norm(p, "dec2b_norm", 2 * c);
    init_conv(p, "dec1a", 3 * c, c, rng);
    init_norm(p, "dec1a_norm", c);
    init_conv(p, "dec1b", c, c, rng);
    init_norm(p, "dec1b_norm", c);
    init_conv(p, "out", c, 1, rng, /*zero=*/true);

    init_dense(p, "time1", config.time_dim, c, rng);
    init_dense(p, "time2", config.time_dim, 2 * c, rng);
    init_dense(p, "time3", config.time_dim, 4 * c, rng);
    init_dense(p, "time4", config.time_dim, 2 * c, rng);
    init_dense(p, "time5", config.time_dim, c, rng);
    return net;
}

TensorPtr DenoiserNet::forward(Tape& tape, const TensorPtr& x, const std::vector<int>& t) const {
    if (x->shape.size() != 4 || x->shape[1] != 1)
        throw std::invalid_argument("DenoiserNet: input must be [N,1,H,W], got " +
                                    nn::shape_str(x->shape));
    if (x->shape[2] % 4 != 0 || x->shape[3] % 4 != 0)
        throw std::invalid_argument("DenoiserNet: spatial dims must be divisible by 4");
    if (static_cast<int>(t.size()) != x->shape[0])
        throw std::invalid_argument("DenoiserNet: need one timestep per sample");

    auto at = [this](const std::string& name) -> const TensorPtr& {
        auto it = params.find(name);
        if (it == params.end()) throw std::runtime_error("DenoiserNet: missing param " + name);
        return it->second;
    };
    auto block = [&](const TensorPtr& in, const std::string& prefix) {
        auto h = nn::conv2d(tape, in, at(prefix + ".w"), at(prefix + ".b"), 1, 1);
        h = nn::instance_norm(tape, h, at(prefix + "_norm.gamma"), at(prefix + "_norm.beta"));
        return nn::silu(tape, h);
    };
    auto inject = [&](const TensorPtr& in, const TensorPtr& emb, const std::string& prefix) {
        auto proj = nn::dense(tape, emb, at(prefix + ".w"), at(prefix + ".b"));
        return nn::add_channelwise(tape, in, proj);
    };

    auto emb = nn::sinusoidal_embed(t, config.time_dim);

    auto h1 = block(x, "enc1a");
    h1 = inject(h1, emb, "time1");
    h1 = block(h1, "enc1b");

    auto h2 = nn::avg_pool2d(tape, h1, 2);
    h2 = block(h2, "enc2a");
    h2 = inject(h2, emb, "time2");
    h2 = block(h2, "enc2b");

    auto h3 = nn::avg_pool2d(tape, h2, 2);
    h3 = block(h3, "enc3a");
    h3 = inject(h3, emb, "time3");
    h3 = block(h3, "enc3b");

    auto u2 = nn::upsample_nearest2x(tape, h3);
    u2 = nn::concat(tape, u2, h2, 1);
    u2 = block(u2, "dec2a");
    u2 = inject(u2, emb, "time4");
    u2 = block(u2, "dec2b");

    auto u1 = nn::upsample_nearest2x(tape, u2);
    u1 = nn::concat(tape, u1, h1, 1);
    u1 = block(u1, "dec1a");
    u1 = inject(u1, emb, "time5");
    u1 = block(u1, "dec1b");

    return nn::conv2d(tape, u1, at("out.w"), at("out.b"), 1, 1);
}

DenoiseFn DenoiserNet::predictor(int h, int w) const {
    DenoiserNet copy = *this;  // shares the parameter tensors
    return [copy, h, w](const std::vector<double>& x, int t) {
        Tape tape;
        auto xt = nn::make_tensor({1, 1, h, w}, x);
        auto out = copy.forward(tape, xt, {t});
        return out->value;
    };
}

TrainedDenoiser train_denoiser(const std::vector<GrayImage>& images,
                               const DiffusionTrainConfig& config) {
    if (images.empty()) throw std::runtime_error("train_denoiser: empty dataset");
    const int h = images[0].height, w = images[0].width;
    for (const auto& img : images)
        if (img.width != w || img.height != h)
            throw std::invalid_argument("train_denoiser: images must share dimensions");

    TrainedDenoiser out;
    out.schedule = build_schedule(config.timesteps);
    out.net = make_denoiser(config.net, config.seed);

    // images rescaled once to [-1,1]
    std::vector<std::vector<double>> scaled(images.size());
    for (size_t i = 0; i < images.size(); ++i) {
        scaled[i].resize(images[i].size());
        for (size_t j = 0; j < images[i].size(); ++j) scaled[i][j] = images[i].pixels[j] * 2.0 - 1.0;
    }

    Rng rng(config.seed + 1);
    nn::Adam adam({config.lr});
    std::vector<size_t> order(images.size());
    std::iota(order.begin(), order.end(), 0);

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        rng.shuffle(order);
        double epoch_loss = 0.0;
        int steps = 0;
        for (size_t start = 0; start < order.size(); start += config.batch) {
            const int n = static_cast<int>(std::min<size_t>(config.batch, order.size() - start));
            auto x_t = nn::make_tensor({n, 1, h, w});
            auto eps = nn::make_tensor({n, 1, h, w});
            std::vector<int> ts(n);
            for (int b = 0; b < n; ++b) {
                ts[b] = rng.range_int(1, config.timesteps);
                const auto& x0 = scaled[order[start + b]];
                const double a = std::sqrt(out.schedule.alpha_bar(ts[b]));
                const double s = std::sqrt(1.0 - out.schedule.alpha_bar(ts[b]));
                for (int i = 0; i < h * w; ++i) {
                    double e = rng.gaussian();
                    eps->value[static_cast<size_t>(b) * h * w + i] = e;
                    x_t->value[static_cast<size_t>(b) * h * w + i] = a * x0[i] + s * e;
                }
            }
            nn::Tape tape;
            auto pred = out.net.forward(tape, x_t, ts);
            auto loss = nn::mse(tape, pred, eps);
            nn::zero_grads(out.net.params);
            tape.backward(loss);
            adam.step(out.net.params);
            epoch_loss += loss->value[0];
            ++steps;
        }
        out.epoch_loss.push_back(epoch_loss / steps);
    }
    return out;
}

std::vector<GrayImage> sample(const DenoiseFn& denoise, const NoiseSchedule& schedule,
                              const SampleRequest& request, int height, int width) {
    if (request.count < 0) throw std::invalid_argument("sample: count must be >= 0");
    if (request.ddim_steps < 1) throw std::invalid_argument("sample: ddim_steps must be >= 1");
    const auto seq = ddim_subsequence(schedule.T, request.ddim_steps);
    const size_t numel = static_cast<size_t>(height) * width;

    std::vector<GrayImage> out;
    out.reserve(request.count);
    for (int img_idx = 0; img_idx < request.count; ++img_idx) {
        Rng rng(request.seed + static_cast<uint64_t>(img_idx));
        std::vector<double> x(numel);
        for (double& v : x) v = rng.gaussian();

        for (size_t j = 0; j < seq.size(); ++j) {
            const int t = seq[j];
            const int t_prev = j + 1 < seq.size() ? seq[j + 1] : 0;
            auto eps_hat = denoise(x, t);
            if (eps_hat.size() != numel) throw std::runtime_error("sample: denoiser shape mismatch");
            if (request.eta > 0.0 && t_prev > 0) {
                std::vector<double> z(numel);
                for (double& v : z) v = rng.gaussian();
                x = ddim_step(x, eps_hat, t, t_prev, request.eta, &z, schedule);
            } else {
                x = ddim_step(x, eps_hat, t, t_prev, request.eta, nullptr, schedule);
            }
        }

        GrayImage img(width, height);
        for (size_t i = 0; i < numel; ++i)
            img.pixels[i] = std::clamp((x[i] + 1.0) / 2.0, 0.0, 1.0);
        out.push_back(std::move(img));
    }
    return out;
}

void save_denoiser(const TrainedDenoiser& model, const std::string& path) {
    nn::ParamMap params = model.net.params;
    params["_meta"] = nn::make_tensor(
        {3}, {static_cast<double>(model.schedule.T), static_cast<double>(model.net.config.base_channels),
              static_cast<double>(model.net.config.time_dim)});
    nn::save_checkpoint(params, path);
}

TrainedDenoiser load_denoiser(const std::string& path) {
    nn::ParamMap params = nn::load_checkpoint(path);
    auto meta = params.find("_meta");
    if (meta == params.end()) throw std::runtime_error("load_denoiser: not a denoiser checkpoint");
    TrainedDenoiser out;
    out.schedule = build_schedule(static_cast<int>(meta->second->value[0]));
    out.net.config.base_channels = static_cast<int>(meta->second->value[1]);
    out.net.config.time_dim = static_cast<int>(meta->second->value[2]);
    params.erase(meta);
    out.net.params = std::move(params);
    return out;
}

}  // namespace koa
