// Copyright 2026 The scengen Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "scengen/common.hpp"
#include "scengen/dataset.hpp"
#include "scengen/ops.hpp"
#include "scengen/optim.hpp"
#include "scengen/rng.hpp"
#include "scengen/tensor.hpp"

namespace scengen {

enum class LossKind { kBce, kWasserstein };

inline const char* loss_kind_name(LossKind k) {
  return k == LossKind::kBce ? "bce" : "wasserstein";
}

inline LossKind loss_kind_from_name(const std::string& s) {
  if (s == "bce") return LossKind::kBce;
  if (s == "wasserstein") return LossKind::kWasserstein;
  throw ConfigError("unknown loss kind '" + s + "' (expected bce|wasserstein)");
}

/// Generator layer chain plus training hyperparameters. The discriminator is
/// always the mirror image (reversed layer list and channel plan).
struct GanConfig {
  std::vector<ConvSpec> layers;     // transposed-conv geometry, in order
  std::vector<int> channel_plan;    // e.g. {100, 256, 128, 64, 1}
  LossKind loss_kind = LossKind::kWasserstein;
  int epochs = 2000;
  double learning_rate = 2e-5;
  int batch_size = 64;
  int critic_iters = 5;   // wasserstein only
  double clip_c = 0.01;   // wasserstein only
  double leaky_slope = 0.2;
  std::uint64_t seed = 1;

  void validate() const {
    if (layers.empty()) throw ConfigError("gan config has no layers");
    if (channel_plan.size() != layers.size() + 1)
      throw ConfigError("channel plan length " +
                        std::to_string(channel_plan.size()) +
                        " does not match " + std::to_string(layers.size()) +
                        " layers");
    if (channel_plan.front() != 100)
      throw ConfigError("channel plan must start at the 100-dim latent");
    if (channel_plan.back() != 1)
      throw ConfigError("channel plan must end in a single output channel");
    for (std::size_t i = 0; i < layers.size(); ++i) {
      if (layers[i].in_channels != channel_plan[i] ||
          layers[i].out_channels != channel_plan[i + 1])
        throw ConfigError("layer " + std::to_string(i) +
                          " channels disagree with the channel plan");
      if (layers[i].kh < 1 || layers[i].kw < 1 || layers[i].sh < 1 ||
          layers[i].sw < 1 || layers[i].ph < 0 || layers[i].pw < 0)
        throw ConfigError("layer " + std::to_string(i) +
                          " has non-positive kernel/stride or negative padding");
    }
    if (epochs < 1) throw ConfigError("epochs must be positive");
    if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be > 0");
    if (batch_size < 2)
      throw ConfigError("batch size must be at least 2 (batch statistics)");
    if (loss_kind == LossKind::kWasserstein) {
      if (critic_iters < 1) throw ConfigError("critic_iters must be positive");
      if (!(clip_c > 0.0)) throw ConfigError("clip_c must be positive");
    }
    if (!(leaky_slope > 0.0 && leaky_slope < 1.0))
      throw ConfigError("leaky slope must lie in (0,1)");
  }

  /// Spatial sizes after each transposed-conv layer, starting at 1x1.
  std::vector<std::pair<int, int>> generator_chain() const {
    std::vector<std::pair<int, int>> chain{{1, 1}};
    for (const auto& sp : layers) {
      const auto [h, w] = chain.back();
      chain.emplace_back(conv_transpose_out_size(h, sp.kh, sp.sh, sp.ph),
                         conv_transpose_out_size(w, sp.kw, sp.sw, sp.pw));
    }
    return chain;
  }

  static std::string chain_str(const std::vector<std::pair<int, int>>& chain) {
    std::string s;
    for (std::size_t i = 0; i < chain.size(); ++i) {
      s += std::to_string(chain[i].first) + "x" +
           std::to_string(chain[i].second);
      if (i + 1 < chain.size()) s += " -> ";
    }
    return s;
  }

  /// Throws unless the layer chain maps the 1x1 latent exactly onto
  /// parks x horizon (and back to 1x1 through the mirrored discriminator).
  void validate_for_shape(int parks, int horizon) const {
    validate();
    const auto chain = generator_chain();
    for (std::size_t i = 1; i < chain.size(); ++i)
      if (chain[i].first < 1 || chain[i].second < 1)
        throw ConfigError("generator chain collapses at layer " +
                          std::to_string(i) + ": " + chain_str(chain));
    if (chain.back() != std::pair<int, int>{parks, horizon})
      throw ConfigError("generator chain " + chain_str(chain) +
                        " does not end at " + std::to_string(parks) + "x" +
                        std::to_string(horizon));
    // Mirror: forward convs with the reversed layer list back to 1x1.
    int h = parks, w = horizon;
    for (std::size_t i = layers.size(); i-- > 0;) {
      const auto& sp = layers[i];
      h = conv_out_size(h, sp.kh, sp.sh, sp.ph);
      w = conv_out_size(w, sp.kw, sp.sw, sp.pw);
      if (h < 1 || w < 1)
        throw ConfigError("discriminator chain collapses at mirrored layer " +
                          std::to_string(i));
    }
    if (h != 1 || w != 1)
      throw ConfigError("discriminator chain ends at " + std::to_string(h) +
                        "x" + std::to_string(w) + ", expected 1x1");
  }
};

namespace detail {

inline ConvSpec make_spec(int ic, int oc, std::pair<int, int> k,
                          std::pair<int, int> s, std::pair<int, int> p) {
  ConvSpec sp;
  sp.in_channels = ic;
  sp.out_channels = oc;
  sp.kh = k.first;
  sp.kw = k.second;
  sp.sh = s.first;
  sp.sw = s.second;
  sp.ph = p.first;
  sp.pw = p.second;
  return sp;
}

inline GanConfig build_preset(const std::vector<int>& plan,
                              std::vector<std::pair<int, int>> kernels,
                              std::vector<std::pair<int, int>> strides,
                              std::vector<std::pair<int, int>> paddings) {
  GanConfig cfg;
  cfg.channel_plan = plan;
  for (std::size_t i = 0; i < kernels.size(); ++i)
    cfg.layers.push_back(
        make_spec(plan[i], plan[i + 1], kernels[i], strides[i], paddings[i]));
  return cfg;
}

}  // namespace detail

/// Named layer presets. The four dataset presets use the channel plan
/// [100,256,128,64,1]; the desk preset is a slimmer stack for fast runs on
/// the 8-farm synthetic data.
inline GanConfig gan_preset(const std::string& name) {
  const std::vector<int> full_plan = {100, 256, 128, 64, 1};
  if (name == "europe_wind_2015")  // 32 parks x 24 steps
    return detail::build_preset(full_plan,
                                {{4, 3}, {4, 4}, {4, 4}, {4, 4}},
                                {{1, 1}, {2, 2}, {2, 2}, {2, 2}},
                                {{0, 0}, {1, 1}, {1, 1}, {1, 1}});
  if (name == "german_solar_2015")  // 16 parks x 8 steps
    return detail::build_preset(full_plan,
                                {{2, 1}, {4, 4}, {4, 4}, {4, 4}},
                                {{1, 1}, {2, 2}, {2, 2}, {2, 2}},
                                {{0, 0}, {1, 1}, {1, 1}, {1, 1}});
  if (name == "german_wind_2017")  // 48 parks x 24 steps
    return detail::build_preset(full_plan,
                                {{3, 3}, {4, 4}, {4, 4}, {4, 4}},
                                {{1, 1}, {2, 2}, {2, 2}, {4, 2}},
                                {{0, 0}, {1, 1}, {1, 1}, {0, 1}});
  if (name == "german_solar_2017")  // 48 parks x 8 steps
    return detail::build_preset(full_plan,
                                {{3, 1}, {4, 4}, {4, 4}, {4, 4}},
                                {{1, 1}, {2, 2}, {2, 2}, {4, 2}},
                                {{0, 0}, {1, 1}, {1, 1}, {0, 1}});
  if (name == "desk_wind_8x24")  // 8 parks x 24 steps, slim channels
    return detail::build_preset({100, 32, 16, 8, 1},
                                {{4, 3}, {4, 4}, {3, 4}, {3, 4}},
                                {{1, 1}, {2, 2}, {1, 2}, {1, 2}},
                                {{0, 0}, {1, 1}, {1, 1}, {1, 1}});
  throw ConfigError(
      "unknown preset '" + name +
      "' (available: europe_wind_2015, german_solar_2015, german_wind_2017, "
      "german_solar_2017, desk_wind_8x24)");
}

/// Preset matching a dataset shape, if one exists.
inline std::optional<std::string> gan_preset_for_shape(int parks, int horizon) {
  if (parks == 32 && horizon == 24) return "europe_wind_2015";
  if (parks == 16 && horizon == 8) return "german_solar_2015";
  if (parks == 48 && horizon == 24) return "german_wind_2017";
  if (parks == 48 && horizon == 8) return "german_solar_2017";
  if (parks == 8 && horizon == 24) return "desk_wind_8x24";
  return std::nullopt;
}

namespace detail {

struct GanLayer {
  ConvSpec spec;
  Tensor weight, bias;
  Tensor gamma, beta;       // defined only when has_bn
  BatchNorm2dState bn;
  bool has_bn = false;
};

inline Tensor init_normal(std::vector<int> shape, double mean, double stddev,
                          Rng& rng) {
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) x = rng.normal(mean, stddev);
  return Tensor::from(std::move(shape), std::move(v), /*requires_grad=*/true);
}

}  // namespace detail

/// Transposed-conv stack mapping the [100,1,1] latent to [1,P,H]:
/// (convT -> batchnorm -> leaky-relu) x (L-1), then convT -> sigmoid.
class Generator {
 public:
  Generator(const GanConfig& cfg, int parks, int horizon, Rng& rng)
      : slope_(cfg.leaky_slope) {
    cfg.validate_for_shape(parks, horizon);
    const std::size_t last = cfg.layers.size() - 1;
    for (std::size_t i = 0; i < cfg.layers.size(); ++i) {
      detail::GanLayer l;
      l.spec = cfg.layers[i];
      l.weight = detail::init_normal(
          {l.spec.in_channels, l.spec.out_channels, l.spec.kh, l.spec.kw}, 0.0,
          0.02, rng);
      l.bias = Tensor::zeros({l.spec.out_channels}, true);
      l.has_bn = i != last;  // no batchnorm on the output layer
      if (l.has_bn) {
        l.gamma = detail::init_normal({l.spec.out_channels}, 1.0, 0.02, rng);
        l.beta = Tensor::zeros({l.spec.out_channels}, true);
        l.bn.init(l.spec.out_channels);
      }
      layers_.push_back(std::move(l));
    }
  }

  /// latent [N,100,1,1] -> scenarios [N,1,P,H] in (0,1).
  Tensor forward(const Tensor& latent, bool training) {
    Tensor h = latent;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      auto& l = layers_[i];
      h = conv_transpose2d(h, l.weight, l.bias, l.spec);
      if (l.has_bn) {
        h = batchnorm2d(h, l.gamma, l.beta, l.bn, training);
        h = leaky_relu(h, slope_);
      }
    }
    return sigmoid(h);
  }

  std::vector<Tensor> parameters() {
    std::vector<Tensor> ps;
    for (auto& l : layers_) {
      ps.push_back(l.weight);
      ps.push_back(l.bias);
      if (l.has_bn) {
        ps.push_back(l.gamma);
        ps.push_back(l.beta);
      }
    }
    return ps;
  }

  std::vector<detail::GanLayer>& layers() { return layers_; }
  const std::vector<detail::GanLayer>& layers() const { return layers_; }

 private:
  std::vector<detail::GanLayer> layers_;
  double slope_;
};

/// The generator's mirror: forward convs with the reversed layer list and
/// channel plan down to a 1x1 feature map, then a fully connected head.
/// BCE mode ends in a sigmoid; wasserstein mode is an unbounded critic.
class Discriminator {
 public:
  Discriminator(const GanConfig& cfg, int parks, int horizon, Rng& rng)
      : slope_(cfg.leaky_slope),
        sigmoid_head_(cfg.loss_kind == LossKind::kBce) {
    cfg.validate_for_shape(parks, horizon);
    const std::size_t L = cfg.layers.size();
    for (std::size_t j = 0; j < L; ++j) {
      const ConvSpec& g = cfg.layers[L - 1 - j];
      detail::GanLayer l;
      l.spec = g;
      l.spec.in_channels = g.out_channels;
      l.spec.out_channels = g.in_channels;
      l.weight = detail::init_normal(
          {l.spec.out_channels, l.spec.in_channels, l.spec.kh, l.spec.kw}, 0.0,
          0.02, rng);
      l.bias = Tensor::zeros({l.spec.out_channels}, true);
      l.has_bn = j != 0;  // no batchnorm on the input layer
      if (l.has_bn) {
        l.gamma = detail::init_normal({l.spec.out_channels}, 1.0, 0.02, rng);
        l.beta = Tensor::zeros({l.spec.out_channels}, true);
        l.bn.init(l.spec.out_channels);
      }
      layers_.push_back(std::move(l));
    }
    head_features_ = cfg.channel_plan.front();
    fc_weight_ = detail::init_normal({1, head_features_}, 0.0, 0.02, rng);
    fc_bias_ = Tensor::zeros({1}, true);
  }

  /// scenarios [N,1,P,H] -> score [N,1].
  Tensor forward(const Tensor& x, bool training) {
    Tensor h = x;
    for (auto& l : layers_) {
      h = conv2d(h, l.weight, l.bias, l.spec);
      if (l.has_bn) h = batchnorm2d(h, l.gamma, l.beta, l.bn, training);
      h = leaky_relu(h, slope_);
    }
    h = reshape(h, {h.dim(0), head_features_});
    h = linear(h, fc_weight_, fc_bias_);
    return sigmoid_head_ ? sigmoid(h) : h;
  }

  std::vector<Tensor> parameters() {
    std::vector<Tensor> ps;
    for (auto& l : layers_) {
      ps.push_back(l.weight);
      ps.push_back(l.bias);
      if (l.has_bn) {
        ps.push_back(l.gamma);
        ps.push_back(l.beta);
      }
    }
    ps.push_back(fc_weight_);
    ps.push_back(fc_bias_);
    return ps;
  }

  std::vector<detail::GanLayer>& layers() { return layers_; }
  const std::vector<detail::GanLayer>& layers() const { return layers_; }
  Tensor& fc_weight() { return fc_weight_; }
  Tensor& fc_bias() { return fc_bias_; }
  const Tensor& fc_weight() const { return fc_weight_; }
  const Tensor& fc_bias() const { return fc_bias_; }

 private:
  std::vector<detail::GanLayer> layers_;
  Tensor fc_weight_, fc_bias_;
  int head_features_ = 0;
  double slope_;
  bool sigmoid_head_;
};

/// A trained generator/discriminator pair with its provenance.
struct TrainedGan {
  GanConfig config;
  int parks = 0;
  int horizon = 0;
  double resolution_hours = 1.0;
  std::vector<FarmMeta> farms;
  std::vector<std::pair<double, double>> loss_history;  // (d_loss, g_loss)
  bool completed = false;
  std::optional<Generator> generator;
  std::optional<Discriminator> discriminator;
};

namespace detail {

inline Tensor batch_from(const ScenarioDataset& ds,
                         const std::vector<std::size_t>& order,
                         std::size_t begin, std::size_t end) {
  const int P = ds.parks(), H = ds.horizon;
  const std::size_t n = end - begin;
  std::vector<double> v;
  v.reserve(n * static_cast<std::size_t>(P) * H);
  for (std::size_t i = begin; i < end; ++i)
    v.insert(v.end(), ds.samples[order[i]].begin(), ds.samples[order[i]].end());
  return Tensor::from({static_cast<int>(n), 1, P, H}, std::move(v));
}

inline Tensor draw_latent(int n, Rng& rng) {
  std::vector<double> v(static_cast<std::size_t>(n) * 100);
  for (auto& x : v) x = rng.normal();
  return Tensor::from({n, 100, 1, 1}, std::move(v));
}

inline void check_loss_finite(double v, const char* what, int epoch) {
  if (!std::isfinite(v))
    throw NumericError(std::string(what) + " became non-finite at epoch " +
                       std::to_string(epoch));
}

}  // namespace detail

/// Trains a generator/discriminator pair on normalized day samples.
/// Deterministic for a fixed (dataset, config) pair: every random draw comes
/// from one stream seeded by config.seed.
inline TrainedGan train_gan(const ScenarioDataset& dataset,
                            const GanConfig& cfg) {
  dataset.validate();
  cfg.validate_for_shape(dataset.parks(), dataset.horizon);
  if (dataset.size() < 2) throw ConfigError("training needs >= 2 samples");
  if (static_cast<std::size_t>(cfg.batch_size) > dataset.size())
    throw ConfigError("batch size " + std::to_string(cfg.batch_size) +
                      " exceeds sample count " + std::to_string(dataset.size()));

  Rng rng(cfg.seed);
  TrainedGan model;
  model.config = cfg;
  model.parks = dataset.parks();
  model.horizon = dataset.horizon;
  model.resolution_hours = dataset.resolution_hours;
  model.farms = dataset.farms;
  model.generator.emplace(cfg, model.parks, model.horizon, rng);
  model.discriminator.emplace(cfg, model.parks, model.horizon, rng);
  Generator& gen = *model.generator;
  Discriminator& disc = *model.discriminator;

  auto g_params = gen.parameters();
  auto d_params = disc.parameters();

  std::optional<Adam> g_adam, d_adam;
  std::optional<RmsProp> g_rms, d_rms;
  if (cfg.loss_kind == LossKind::kBce) {
    g_adam.emplace(g_params, cfg.learning_rate, 0.5, 0.999);
    d_adam.emplace(d_params, cfg.learning_rate, 0.5, 0.999);
  } else {
    g_rms.emplace(g_params, cfg.learning_rate, 0.9);
    d_rms.emplace(d_params, cfg.learning_rate, 0.9);
  }
  auto g_zero = [&] { g_adam ? g_adam->zero_grad() : g_rms->zero_grad(); };
  auto g_step = [&] { g_adam ? g_adam->step() : g_rms->step(); };
  auto d_zero = [&] { d_adam ? d_adam->zero_grad() : d_rms->zero_grad(); };
  auto d_step = [&] { d_adam ? d_adam->step() : d_rms->step(); };

  const std::size_t n = dataset.size();
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;

  int critic_counter = 0;
  double last_g_loss = 0.0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    shuffle(order, rng);
    double d_loss_sum = 0.0, g_loss_sum = 0.0;
    int d_steps = 0, g_steps = 0;

    std::size_t begin = 0;
    while (begin < n) {
      std::size_t end = std::min(n, begin + static_cast<std::size_t>(cfg.batch_size));
      // A trailing single sample cannot feed batch statistics; absorb it.
      if (n - end == 1) end = n;
      const int bn = static_cast<int>(end - begin);
      Tensor real = detail::batch_from(dataset, order, begin, end);
      begin = end;

      if (cfg.loss_kind == LossKind::kBce) {
        Tensor fake = gen.forward(detail::draw_latent(bn, rng), true);
        Tensor ones = Tensor::full({bn, 1}, 1.0);
        Tensor zeros = Tensor::zeros({bn, 1});

        d_zero();
        Tensor d_loss = add(bce_loss(disc.forward(real, true), ones),
                            bce_loss(disc.forward(fake.detach(), true), zeros));
        d_loss.backward();
        d_step();

        g_zero();
        Tensor g_loss = bce_loss(disc.forward(fake, true), ones);
        g_loss.backward();
        g_step();

        detail::check_loss_finite(d_loss.item(), "discriminator loss", epoch);
        detail::check_loss_finite(g_loss.item(), "generator loss", epoch);
        d_loss_sum += d_loss.item();
        g_loss_sum += g_loss.item();
        last_g_loss = g_loss.item();
        ++d_steps;
        ++g_steps;
      } else {
        // critic step: minimize mean(C(fake)) - mean(C(real))
        Tensor fake = gen.forward(detail::draw_latent(bn, rng), true).detach();
        d_zero();
        Tensor c_loss = sub(mean_all(disc.forward(fake, true)),
                            mean_all(disc.forward(real, true)));
        c_loss.backward();
        d_step();
        clip_weights(d_params, cfg.clip_c);
        detail::check_loss_finite(c_loss.item(), "critic loss", epoch);
        d_loss_sum += c_loss.item();
        ++d_steps;

        if (++critic_counter >= cfg.critic_iters) {
          critic_counter = 0;
          g_zero();
          Tensor g_fake = gen.forward(detail::draw_latent(bn, rng), true);
          Tensor g_loss = scale(mean_all(disc.forward(g_fake, true)), -1.0);
          g_loss.backward();
          g_step();
          detail::check_loss_finite(g_loss.item(), "generator loss", epoch);
          g_loss_sum += g_loss.item();
          last_g_loss = g_loss.item();
          ++g_steps;
        }
      }
    }

    model.loss_history.emplace_back(
        d_steps ? d_loss_sum / d_steps : 0.0,
        g_steps ? g_loss_sum / g_steps : last_g_loss);
  }

  for (const auto& p : g_params)
    detail::check_finite(p.values(), "generator parameters");
  for (const auto& p : d_params)
    detail::check_finite(p.values(), "discriminator parameters");
  model.completed = true;
  return model;
}

/// Draws n scenarios from a trained generator (eval mode, running batch-norm
/// statistics). Deterministic per seed.
inline ScenarioDataset sample_scenarios(TrainedGan& model, std::size_t n,
                                        std::uint64_t seed) {
  if (n == 0) throw ConfigError("sample count must be positive");
  if (!model.generator) throw ConfigError("model holds no generator");
  ScenarioDataset out;
  out.farms = model.farms;
  out.horizon = model.horizon;
  out.resolution_hours = model.resolution_hours;

  Rng rng(seed);
  const std::size_t plane =
      static_cast<std::size_t>(model.parks) * model.horizon;
  std::size_t remaining = n;
  while (remaining > 0) {
    const int bn = static_cast<int>(std::min<std::size_t>(remaining, 64));
    Tensor z = detail::draw_latent(bn, rng);
    Tensor scen = model.generator->forward(z, /*training=*/false);
    for (int i = 0; i < bn; ++i) {
      std::vector<double> sample(scen.data() + static_cast<std::size_t>(i) * plane,
                                 scen.data() + static_cast<std::size_t>(i + 1) * plane);
      out.samples.push_back(std::move(sample));
    }
    remaining -= static_cast<std::size_t>(bn);
  }
  out.validate();
  return out;
}

}  // namespace scengen
