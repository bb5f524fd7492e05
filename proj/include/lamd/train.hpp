#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <string>
#include <tuple>
#include <vector>

#include "lamd/autodiff.hpp"
#include "lamd/data.hpp"
#include "lamd/error.hpp"
#include "lamd/models.hpp"
#include "lamd/optim.hpp"
#include "lamd/rng.hpp"

namespace lamd {

struct TrainConfig {
  std::size_t epochs = 50;
  std::size_t batch_size = 32;
  double lr = 2e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double adv_weight = 0.1;  // AEGAN adversarial weight
  std::uint64_t seed = 0;

  // epochs = 0 is accepted and returns the initial parameters.
  void validate() const {
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (!(lr > 0.0)) throw ConfigError("learning rate must be > 0");
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
      throw ConfigError("adam betas must lie in [0, 1)");
    }
    if (!(adv_weight >= 0.0)) throw ConfigError("adv_weight must be >= 0");
  }
};

/// Per-epoch mean losses; one row per epoch.
struct TrainTrace {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  std::vector<double> column(const std::string& name) const {
    const auto it = std::find(columns.begin(), columns.end(), name);
    if (it == columns.end()) throw Error("no trace column '" + name + "'");
    const auto c = static_cast<std::size_t>(it - columns.begin());
    std::vector<double> out;
    for (const auto& r : rows) out.push_back(r[c]);
    return out;
  }

  friend bool operator==(const TrainTrace&, const TrainTrace&) = default;
};

/// GLO generator with its latent codes. codes row i is paired with dataset
/// image i; codes are drawn once before training and never updated.
struct GloState {
  GeneratorModel model;
  Tensor codes;
  TrainTrace trace;
  double final_train_mse = 0.0;
};

struct GanResult {
  GeneratorModel generator;
  DiscriminatorModel discriminator;
  TrainTrace trace;
};

struct AeganResult {
  EncoderModel encoder;
  GeneratorModel generator;
  DiscriminatorModel discriminator;
  TrainTrace trace;
};

namespace detail {

inline std::vector<const Tensor*> grads_of(const ad::Gradients& g, const std::vector<ad::Var>& vars) {
  std::vector<const Tensor*> out;
  out.reserve(vars.size());
  for (const ad::Var& v : vars) out.push_back(&g[v]);
  return out;
}

// Minibatches of a fresh permutation of [0, n).
inline std::vector<std::vector<std::size_t>> epoch_batches(std::size_t n, std::size_t batch, Rng& rng) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  rng.shuffle(std::span<std::size_t>(order));
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t i = 0; i < n; i += batch) {
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(i),
                         order.begin() + static_cast<std::ptrdiff_t>(std::min(n, i + batch)));
  }
  return batches;
}

// -mean(log sigmoid(sign * logits)).
inline ad::Var logistic_loss(const ad::Var& logits, double sign) {
  return ad::scale(ad::mean(ad::log(ad::sigmoid(ad::scale(logits, sign)))), -1.0);
}

template <typename F>
auto guard_divergence(const char* protocol, std::size_t epoch, F&& step) {
  try {
    return step();
  } catch (const NumericError& e) {
    throw NumericError(std::string(protocol) + " training diverged in epoch " + std::to_string(epoch) + ": " +
                       e.what());
  }
}

inline void require_images(const ImageDataset& ds, const ImageShape& expected, std::size_t min_size) {
  if (ds.size() == 0) throw DataError("training dataset is empty");
  if (ds.size() < min_size) {
    throw DataError("dataset has " + std::to_string(ds.size()) + " images, fewer than batch size " +
                    std::to_string(min_size));
  }
  if (!(ds.image_shape() == expected)) throw ShapeError("dataset image shape does not match model");
}

}  // namespace detail

/// Latent codes paired with the first n images for a GLO run seeded `seed`.
inline Tensor glo_codes(std::size_t n, std::size_t latent_dim, std::uint64_t seed) {
  Rng rng(seed, streams::kGloCodes);
  return sample_latents(n, latent_dim, rng);
}

/// Generator minimising sum_i ||G(z_i) - x_i||^2 over fixed pairs (z_i, x_i),
/// minibatch Adam. The loss is reported as the per-pixel mean.
inline GloState train_glo(const ImageDataset& data, const GeneratorSpec& spec, const TrainConfig& cfg) {
  cfg.validate();
  detail::require_images(data, spec.image, 1);
  GloState st{init_model(spec, cfg.seed), glo_codes(data.size(), spec.latent_dim, cfg.seed), {{"epoch", "rec"}, {}}, 0.0};
  AdamState adam(cfg.lr, cfg.beta1, cfg.beta2);
  Rng shuffle(cfg.seed, streams::kShuffle);
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    double total = 0.0;
    for (const auto& batch : detail::epoch_batches(data.size(), cfg.batch_size, shuffle)) {
      total += detail::guard_divergence("GLO", epoch, [&] {
        ad::Tape tape;
        auto params = bind_params(tape, st.model.params, true);
        ad::Var z = tape.constant(gather_rows(st.codes, batch));
        ad::Var x = tape.constant(gather_rows(data.images, batch));
        ad::Var loss = ad::mse(generate(st.model, z, params), x);
        const double v = loss.value().item();
        adam.step(st.model.params, detail::grads_of(tape.backward(loss), params));
        return v * static_cast<double>(batch.size());
      });
    }
    st.trace.rows.push_back({static_cast<double>(epoch + 1), total / static_cast<double>(data.size())});
  }
  const Tensor recon = generate(st.model, st.codes);
  st.final_train_mse = mean_squared_difference(recon, data.images);
  return st;
}

/// Alternating discriminator / generator Adam steps. The generator uses the
/// non-saturating loss -log D(G(z)).
inline GanResult train_gan(const ImageDataset& data, const GeneratorSpec& gen_spec, const DiscriminatorSpec& disc_spec,
                           const TrainConfig& cfg) {
  cfg.validate();
  detail::require_images(data, gen_spec.image, cfg.batch_size);
  if (!(disc_spec.image == gen_spec.image)) throw ShapeError("generator and discriminator image shapes differ");
  GanResult r{init_model(gen_spec, cfg.seed), init_model(disc_spec, cfg.seed), {{"epoch", "d_loss", "g_loss"}, {}}};
  AdamState adam_g(cfg.lr, cfg.beta1, cfg.beta2), adam_d(cfg.lr, cfg.beta1, cfg.beta2);
  Rng shuffle(cfg.seed, streams::kShuffle);
  Rng noise(cfg.seed, streams::kTrainLatents);
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    double d_total = 0.0, g_total = 0.0;
    std::size_t steps = 0;
    for (const auto& batch : detail::epoch_batches(data.size(), cfg.batch_size, shuffle)) {
      const Tensor z = sample_latents(batch.size(), gen_spec.latent_dim, noise);
      const Tensor real = gather_rows(data.images, batch);
      detail::guard_divergence("GAN", epoch, [&] {
        const Tensor fake = generate(r.generator, z);
        ad::Tape tape;
        auto dp = bind_params(tape, r.discriminator.params, true);
        ad::Var loss = ad::add(detail::logistic_loss(r.discriminator.net.forward(tape.constant(real), dp), 1.0),
                               detail::logistic_loss(r.discriminator.net.forward(tape.constant(fake), dp), -1.0));
        d_total += loss.value().item();
        adam_d.step(r.discriminator.params, detail::grads_of(tape.backward(loss), dp));
        return 0;
      });
      detail::guard_divergence("GAN", epoch, [&] {
        ad::Tape tape;
        auto gp = bind_params(tape, r.generator.params, true);
        auto dp = bind_params(tape, r.discriminator.params, false);
        ad::Var fake = generate(r.generator, tape.constant(z), gp);
        ad::Var loss = detail::logistic_loss(r.discriminator.net.forward(fake, dp), 1.0);
        g_total += loss.value().item();
        adam_g.step(r.generator.params, detail::grads_of(tape.backward(loss), gp));
        return 0;
      });
      ++steps;
    }
    const double s = static_cast<double>(std::max<std::size_t>(steps, 1));
    r.trace.rows.push_back({static_cast<double>(epoch + 1), d_total / s, g_total / s});
  }
  return r;
}

namespace detail {

// Shared by AEGAN and the plain autoencoder. The discriminator is only stepped
// when the adversarial term is active, so adv_weight = 0 reproduces the plain
// autoencoder exactly.
inline AeganResult train_autoencoding(const ImageDataset& data, const GeneratorSpec& gen_spec,
                                      const EncoderSpec& enc_spec, const DiscriminatorSpec& disc_spec,
                                      const TrainConfig& cfg, bool train_discriminator) {
  cfg.validate();
  detail::require_images(data, gen_spec.image, cfg.batch_size);
  if (!(enc_spec.image == gen_spec.image) || enc_spec.latent_dim != gen_spec.latent_dim) {
    throw ShapeError("encoder and generator shapes differ");
  }
  AeganResult r{init_model(enc_spec, cfg.seed), init_model(gen_spec, cfg.seed), {},
                {{"epoch", "rec", "g_adv", "d_loss"}, {}}};
  if (train_discriminator) r.discriminator = init_model(disc_spec, cfg.seed);
  AdamState adam_e(cfg.lr, cfg.beta1, cfg.beta2), adam_g(cfg.lr, cfg.beta1, cfg.beta2),
      adam_d(cfg.lr, cfg.beta1, cfg.beta2);
  Rng shuffle(cfg.seed, streams::kShuffle);
  const bool adversarial = train_discriminator && cfg.adv_weight > 0.0;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    double rec_total = 0.0, adv_total = 0.0, d_total = 0.0;
    std::size_t steps = 0;
    for (const auto& batch : epoch_batches(data.size(), cfg.batch_size, shuffle)) {
      const Tensor real = gather_rows(data.images, batch);
      if (adversarial) {
        guard_divergence("AEGAN", epoch, [&] {
          ad::Tape tape;
          auto ep = bind_params(tape, r.encoder.params, false);
          auto gp = bind_params(tape, r.generator.params, false);
          auto dp = bind_params(tape, r.discriminator.params, true);
          ad::Var x = tape.constant(real);
          ad::Var recon = generate(r.generator, r.encoder.net.forward(x, ep), gp);
          ad::Var loss = ad::add(logistic_loss(r.discriminator.net.forward(x, dp), 1.0),
                                 logistic_loss(r.discriminator.net.forward(recon, dp), -1.0));
          d_total += loss.value().item();
          adam_d.step(r.discriminator.params, grads_of(tape.backward(loss), dp));
          return 0;
        });
      }
      guard_divergence("AEGAN", epoch, [&] {
        ad::Tape tape;
        auto ep = bind_params(tape, r.encoder.params, true);
        auto gp = bind_params(tape, r.generator.params, true);
        ad::Var x = tape.constant(real);
        ad::Var recon = generate(r.generator, r.encoder.net.forward(x, ep), gp);
        ad::Var rec = ad::mse(recon, x);
        ad::Var loss = rec;
        rec_total += rec.value().item();
        if (adversarial) {
          auto dp = bind_params(tape, r.discriminator.params, false);
          ad::Var adv = logistic_loss(r.discriminator.net.forward(recon, dp), 1.0);
          adv_total += adv.value().item();
          loss = ad::add(rec, ad::scale(adv, cfg.adv_weight));
        }
        const ad::Gradients g = tape.backward(loss);
        adam_e.step(r.encoder.params, grads_of(g, ep));
        adam_g.step(r.generator.params, grads_of(g, gp));
        return 0;
      });
      ++steps;
    }
    const double s = static_cast<double>(std::max<std::size_t>(steps, 1));
    r.trace.rows.push_back({static_cast<double>(epoch + 1), rec_total / s, adv_total / s, d_total / s});
  }
  return r;
}

}  // namespace detail

/// Encoder + generator minimising reconstruction plus adv_weight times the
/// non-saturating adversarial loss on reconstructions.
inline AeganResult train_aegan(const ImageDataset& data, const GeneratorSpec& gen_spec, const EncoderSpec& enc_spec,
                               const DiscriminatorSpec& disc_spec, const TrainConfig& cfg) {
  return detail::train_autoencoding(data, gen_spec, enc_spec, disc_spec, cfg, true);
}

/// Plain autoencoder; the discriminator in the result is left empty.
inline AeganResult train_autoencoder(const ImageDataset& data, const GeneratorSpec& gen_spec,
                                     const EncoderSpec& enc_spec, const TrainConfig& cfg) {
  return detail::train_autoencoding(data, gen_spec, enc_spec, DiscriminatorSpec{gen_spec.image, {}}, cfg, false);
}

/// Per-image mean squared reconstruction error ||G(E(x)) - x||^2 / numel.
inline std::vector<double> reconstruction_errors(const EncoderModel& enc, const GeneratorModel& gen,
                                                 const ImageDataset& data) {
  const Tensor recon = generate(gen, encode(enc, data.images));
  std::vector<double> errs;
  for (std::size_t i = 0; i < data.size(); ++i) {
    errs.push_back(mean_squared_difference(batch_item(recon, i), data.image(i)));
  }
  return errs;
}

}  // namespace lamd
