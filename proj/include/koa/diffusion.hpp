#pragma once

#include <functional>
#include <vector>

#include "koa/image.hpp"
#include "koa/nn.hpp"

namespace koa {

// Per-timestep noising constants. Index i holds the values for t = i+1;
// alpha_bar(0) is the t=0 boundary and equals 1.
struct NoiseSchedule {
    int T = 0;
    std::vector<double> betas;
    std::vector<double> alphas;
    std::vector<double> alpha_bars;

    double alpha_bar(int t) const;  // t in 0..T
};

// linear betas from 1e-4 to 0.02
NoiseSchedule build_schedule(int T);

// x_t = sqrt(abar_t) x0 + sqrt(1-abar_t) eps, elementwise
std::vector<double> forward_diffuse(const std::vector<double>& x0, int t,
                                    const std::vector<double>& noise, const NoiseSchedule& s);

// S timesteps descending from T with spacing floor(T/S); the hop from the
// last entry to t=0 is implicit
std::vector<int> ddim_subsequence(int T, int S);

// One reverse update t -> t_prev. z may be null when eta == 0.
std::vector<double> ddim_step(const std::vector<double>& x_t, const std::vector<double>& eps_hat,
                              int t, int t_prev, double eta, const std::vector<double>* z,
                              const NoiseSchedule& s);

struct DenoiserConfig {
    int base_channels = 32;  // level channels: base, 2*base, 4*base
    int time_dim = 128;
};

// Small U-Net noise predictor: 3 resolution levels, two conv+norm+silu
// blocks per level, nearest 2x upsampling with skip concatenation, timestep
// injected per level as a dense projection of the sinusoidal embedding.
struct DenoiserNet {
    DenoiserConfig config;
    nn::ParamMap params;

    // x: [N,1,H,W] in [-1,1], t: per-sample timestep -> eps_hat [N,1,H,W]
    nn::TensorPtr forward(nn::Tape& tape, const nn::TensorPtr& x, const std::vector<int>& t) const;

    // inference closure over a single image (no grads kept)
    std::function<std::vector<double>(const std::vector<double>&, int)> predictor(int h,
                                                                                  int w) const;
};

DenoiserNet make_denoiser(const DenoiserConfig& config, uint64_t seed);

struct DiffusionTrainConfig {
    int epochs = 30;
    int batch = 8;
    double lr = 1e-3;
    uint64_t seed = 0;
    int timesteps = 1000;
    DenoiserConfig net;
};

struct TrainedDenoiser {
    DenoiserNet net;
    NoiseSchedule schedule;
    std::vector<double> epoch_loss;
};

// Trains eps-prediction MSE on images rescaled to [-1,1]; deterministic for
// a fixed seed.
TrainedDenoiser train_denoiser(const std::vector<GrayImage>& images,
                               const DiffusionTrainConfig& config);

struct SampleRequest {
    int count = 1;
    int ddim_steps = 50;
    double eta = 0.0;
    uint64_t seed = 0;
};

using DenoiseFn = std::function<std::vector<double>(const std::vector<double>&, int)>;

// Draws x_T per image from seed + image index, walks the DDIM subsequence,
// rescales the result from [-1,1] to [0,1].
std::vector<GrayImage> sample(const DenoiseFn& denoise, const NoiseSchedule& schedule,
                              const SampleRequest& request, int height, int width);

void save_denoiser(const TrainedDenoiser& model, const std::string& path);
TrainedDenoiser load_denoiser(const std::string& path);

}  // namespace koa
