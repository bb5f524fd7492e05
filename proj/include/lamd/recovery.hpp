#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include "lamd/autodiff.hpp"
#include "lamd/error.hpp"
#include "lamd/models.hpp"
#include "lamd/optim.hpp"
#include "lamd/parallel.hpp"
#include "lamd/rng.hpp"
#include "lamd/stats.hpp"
#include "lamd/tensor.hpp"

// Latent recovery: z* = argmin_z loss(phi(G(z)), phi(y)), the nearest
// neighbour of a target y on the generator's output manifold.

namespace lamd {

/// Linear operator applied identically to G(z) and to the target inside the
/// recovery loss.
class PhiOperator {
 public:
  enum class Kind { identity, mask, avgpool, crop };

  static PhiOperator identity() { return PhiOperator(Kind::identity); }

  /// Binary mask of shape (c, h, w) or (h, w); 1 marks observed pixels.
  static PhiOperator mask(Tensor m) {
    for (double v : m.data()) {
      if (v != 0.0 && v != 1.0) throw ConfigError("phi mask must be {0,1}-valued");
    }
    PhiOperator op(Kind::mask);
    op.mask_ = std::move(m);
    return op;
  }

  static PhiOperator avgpool(std::size_t factor) {
    if (factor == 0) throw ConfigError("pooling factor must be positive");
    PhiOperator op(Kind::avgpool);
    op.factor_ = factor;
    return op;
  }

  static PhiOperator crop(std::size_t top, std::size_t left, std::size_t height, std::size_t width) {
    PhiOperator op(Kind::crop);
    op.rect_ = {top, left, height, width};
    return op;
  }

  Kind kind() const noexcept { return kind_; }
  std::size_t factor() const noexcept { return factor_; }

  /// Throws if the operator cannot act on images of shape `im`.
  void validate(const ImageShape& im) const {
    switch (kind_) {
      case Kind::identity: break;
      case Kind::mask: {
        const Shape full{im.channels, im.height, im.width}, plane{im.height, im.width};
        if (mask_.shape() != full && mask_.shape() != plane) {
          throw ShapeError("phi mask shape " + shape_str(mask_.shape()) + " does not match image");
        }
        break;
      }
      case Kind::avgpool:
        if (im.height % factor_ != 0 || im.width % factor_ != 0) {
          throw ShapeError("pooling factor " + std::to_string(factor_) + " does not divide image side");
        }
        break;
      case Kind::crop:
        if (rect_[2] == 0 || rect_[3] == 0 || rect_[0] + rect_[2] > im.height || rect_[1] + rect_[3] > im.width) {
          throw ShapeError("crop rectangle outside image");
        }
        break;
    }
  }

  /// Number of elements the recovery error is averaged over. For a mask this
  /// is the observed support, so errors are observed-region means.
  std::size_t domain_size(const ImageShape& im) const {
    switch (kind_) {
      case Kind::identity: return im.numel();
      case Kind::mask: {
        const Tensor m = full_mask(im);
        return static_cast<std::size_t>(std::count(m.data().begin(), m.data().end(), 1.0));
      }
      case Kind::avgpool: return im.channels * (im.height / factor_) * (im.width / factor_);
      case Kind::crop: return im.channels * rect_[2] * rect_[3];
    }
    return 0;
  }

  /// phi on a (n, c, h, w) batch recorded on the tape.
  ad::Var apply(const ad::Var& images) const {
    const Shape& s = images.shape();
    if (s.size() != 4) throw ShapeError("phi expects an (n, c, h, w) batch");
    const ImageShape im{s[1], s[2], s[3]};
    validate(im);
    switch (kind_) {
      case Kind::identity: return images;
      case Kind::mask: return ad::mask_mul(images, full_mask(im));
      case Kind::avgpool: return ad::avg_pool(images, factor_);
      case Kind::crop: return ad::crop(images, rect_[0], rect_[1], rect_[2], rect_[3]);
    }
    return images;
  }

  Tensor apply(const Tensor& images) const {
    ad::Tape tape;
    return apply(tape.constant(images)).value();
  }

 private:
  explicit PhiOperator(Kind k) : kind_(k) {}

  Tensor full_mask(const ImageShape& im) const {
    if (mask_.rank() == 3) return mask_;
    Tensor m({im.channels, im.height, im.width});
    for (std::size_t c = 0; c < im.channels; ++c)
      std::copy(mask_.data().begin(), mask_.data().end(), m.data().begin() + static_cast<std::ptrdiff_t>(c * mask_.size()));
    return m;
  }

  Kind kind_;
  Tensor mask_;
  std::size_t factor_ = 1;
  std::array<std::size_t, 4> rect_{};
};

enum class RecoveryLoss { l2, l1 };

struct RecoveryConfig {
  OptimizerConfig optimizer{};
  std::size_t restarts = 1;
  RecoveryLoss loss = RecoveryLoss::l2;
  double plausible_threshold = 0.1;
  double verbatim_threshold = 0.025;
  double nn_recovered_threshold = 0.024;
  std::uint64_t seed = 0;

  void validate() const {
    optimizer.validate();
    if (restarts < 1) throw ConfigError("restarts must be >= 1");
    if (!(plausible_threshold > 0.0) || !(verbatim_threshold > 0.0) || !(nn_recovered_threshold > 0.0)) {
      throw ConfigError("recovery thresholds must be positive");
    }
  }
};

struct RecoveryResult {
  Tensor best_z;
  // Mean squared error per phi-domain element at best_z; the minimum over
  // restarts. NaN only when `error` is set.
  double final_mse = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> restart_errors;
  std::vector<double> trace;  // objective per iteration of the best restart
  std::size_t iterations = 0;  // iterations of the best restart
  bool plausible = false;
  bool verbatim = false;
  bool stalled = false;  // every restart ended in a line-search failure
  std::string error;     // set when recovery of this target failed outright

  bool ok() const noexcept { return error.empty(); }
};

namespace detail {

inline Tensor as_batch(const Tensor& image, const ImageShape& im) {
  if (image.size() != im.numel()) {
    throw ShapeError("target shape " + shape_str(image.shape()) + " does not match generator output");
  }
  return image.reshaped(im.batch_shape(1));
}

inline void finish(RecoveryResult& r, const RecoveryConfig& cfg) {
  r.plausible = r.final_mse < cfg.plausible_threshold;
  r.verbatim = r.final_mse < cfg.verbatim_threshold;
}

}  // namespace detail

/// Best of cfg.restarts optimisations from z0 ~ N(0, I) drawn in sequence
/// from `rng`.
inline RecoveryResult recover_one(const GeneratorModel& model, const Tensor& target, const PhiOperator& phi,
                                  const RecoveryConfig& cfg, Rng& rng) {
  cfg.validate();
  const ImageShape& im = model.spec.image;
  phi.validate(im);
  const std::size_t domain = phi.domain_size(im);
  if (domain == 0) throw ConfigError("phi has empty support; recovery loss is degenerate");
  const Tensor phi_target = phi.apply(detail::as_batch(target, im));
  const double inv = 1.0 / static_cast<double>(domain);

  auto residual = [&](ad::Tape& tape, ad::Var z) {
    auto params = bind_params(tape, model.params, false);
    return ad::sub(phi.apply(generate(model, z, params)), tape.constant_ref(phi_target));
  };
  const TapeObjective objective = [&](ad::Tape& tape, ad::Var z) {
    ad::Var r = residual(tape, z);
    return ad::scale(cfg.loss == RecoveryLoss::l2 ? ad::squared_l2(r) : ad::l1_norm(r), inv);
  };
  auto mse_at = [&](const Tensor& z) {
    ad::Tape tape;
    return ad::squared_l2(residual(tape, tape.constant(z))).value().item() * inv;
  };

  RecoveryResult best;
  best.final_mse = std::numeric_limits<double>::infinity();
  best.stalled = true;
  for (std::size_t r = 0; r < cfg.restarts; ++r) {
    const Tensor z0 = sample_latents(1, model.spec.latent_dim, rng);
    MinimizeResult m = minimize(objective, z0, cfg.optimizer);
    const double err = cfg.loss == RecoveryLoss::l2 ? m.final_value() : mse_at(m.x);
    best.restart_errors.push_back(err);
    best.stalled = best.stalled && m.stalled;
    if (err < best.final_mse) {
      best.final_mse = err;
      best.best_z = std::move(m.x);
      best.trace = std::move(m.trace);
      best.iterations = m.iterations;
    }
  }
  detail::finish(best, cfg);
  return best;
}

/// Random stream for starting point `init` of a target. Keyed on the pixel
/// values rather than the position in a list, so permuting a target list
/// permutes the results and nothing else.
inline std::uint64_t target_stream(const Tensor& target, std::size_t init = 0) {
  if (init >= (std::size_t{1} << 16)) throw ConfigError("too many starting points per target");
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (double v : target.data()) {
    const auto bits = std::bit_cast<std::uint64_t>(v == 0.0 ? 0.0 : v);
    for (int b = 0; b < 64; b += 8) {
      h ^= (bits >> b) & 0xff;
      h *= 0x100000001b3ULL;
    }
  }
  return streams::kRecoveryBase + ((h & 0xffffffffULL) << 16) + init;
}

/// recover_one for every target, each on its own target_stream. Failures
/// are recorded per element.
inline std::vector<RecoveryResult> recover_set(const GeneratorModel& model, const std::vector<Tensor>& targets,
                                               const PhiOperator& phi, const RecoveryConfig& cfg,
                                               std::size_t threads = 1) {
  if (targets.empty()) throw ConfigError("recover_set needs at least one target");
  cfg.validate();
  phi.validate(model.spec.image);
  if (phi.domain_size(model.spec.image) == 0) throw ConfigError("phi has empty support; recovery loss is degenerate");
  std::vector<RecoveryResult> out(targets.size());
  parallel_for(targets.size(), threads, [&](std::size_t i) {
    Rng rng(cfg.seed, target_stream(targets[i]));
    try {
      out[i] = recover_one(model, targets[i], phi, cfg, rng);
    } catch (const Error& e) {
      out[i] = RecoveryResult{};
      out[i].error = e.what();
    }
  });
  return out;
}

/// Autoencoder "recovery": z* = E(y), error = mean((G(E(y)) - y)^2).
inline RecoveryResult recover_aegan(const EncoderModel& encoder, const GeneratorModel& generator, const Tensor& target,
                                    const RecoveryConfig& cfg = {}) {
  const ImageShape& im = generator.spec.image;
  if (!(encoder.spec.image == im) || encoder.spec.latent_dim != generator.spec.latent_dim) {
    throw ShapeError("encoder and generator shapes differ");
  }
  const Tensor y = detail::as_batch(target, im);
  RecoveryResult r;
  r.best_z = encode(encoder, y);
  r.final_mse = mean_squared_difference(generate(generator, r.best_z), y);
  r.restart_errors = {r.final_mse};
  r.trace = {r.final_mse};
  detail::finish(r, cfg);
  return r;
}

inline std::vector<RecoveryResult> recover_aegan_set(const EncoderModel& encoder, const GeneratorModel& generator,
                                                     const std::vector<Tensor>& targets,
                                                     const RecoveryConfig& cfg = {}) {
  if (targets.empty()) throw ConfigError("recover_aegan_set needs at least one target");
  std::vector<RecoveryResult> out;
  out.reserve(targets.size());
  for (const Tensor& t : targets) out.push_back(recover_aegan(encoder, generator, t, cfg));
  return out;
}

/// Fraction of results with final_mse < threshold.
inline double success_rate(const std::vector<RecoveryResult>& results, double threshold) {
  if (results.empty()) throw ConfigError("success_rate of empty result list");
  const auto hits = std::count_if(results.begin(), results.end(),
                                  [&](const RecoveryResult& r) { return r.ok() && r.final_mse < threshold; });
  return static_cast<double>(hits) / static_cast<double>(results.size());
}

inline std::vector<double> final_errors(const std::vector<RecoveryResult>& results) {
  std::vector<double> out;
  for (const auto& r : results) {
    if (r.ok()) out.push_back(r.final_mse);
  }
  return out;
}

/// Convergence study for one optimizer: every target is recovered from
/// `inits` starting points. Run k on a target uses target_stream(target, k),
/// so all optimizers share their starting points.
struct ConvergenceCurves {
  OptimizerKind kind = OptimizerKind::lbfgs;
  std::vector<double> median, q25, q75;  // per iteration 0..max_iters
  // First iteration at which the median curve is <= threshold; max_iters + 1
  // when it never gets there.
  std::size_t iterations_to_threshold = 0;
  bool reached = false;
};

inline ConvergenceCurves convergence_curves(const GeneratorModel& model, const std::vector<Tensor>& targets,
                                            std::size_t inits, const RecoveryConfig& cfg, double threshold,
                                            std::size_t threads = 1) {
  if (targets.empty() || inits == 0) throw ConfigError("convergence study needs targets and inits");
  RecoveryConfig one = cfg;
  one.restarts = 1;
  one.validate();
  const std::size_t len = cfg.optimizer.max_iters + 1;
  std::vector<std::vector<double>> traces(targets.size() * inits);
  parallel_for(traces.size(), threads, [&](std::size_t r) {
    Rng rng(cfg.seed, target_stream(targets[r / inits], r % inits));
    std::vector<double> t = recover_one(model, targets[r / inits], PhiOperator::identity(), one, rng).trace;
    // Early stops (converged or stalled) hold their last value.
    t.resize(len, t.back());
    traces[r] = std::move(t);
  });
  ConvergenceCurves c;
  c.kind = cfg.optimizer.kind;
  c.iterations_to_threshold = len;
  std::vector<double> column(traces.size());
  for (std::size_t it = 0; it < len; ++it) {
    for (std::size_t r = 0; r < traces.size(); ++r) column[r] = traces[r][it];
    c.median.push_back(lamd::median(column));
    c.q25.push_back(quantile(column, 0.25));
    c.q75.push_back(quantile(column, 0.75));
    if (!c.reached && c.median.back() <= threshold) {
      c.reached = true;
      c.iterations_to_threshold = it;
    }
  }
  return c;
}

inline void write_recovery_csv_header(std::ostream& os) {
  os << "target_id,set_label,final_mse,restarts,iterations,plausible,verbatim\n";
}

inline void write_recovery_csv_rows(std::ostream& os, const std::vector<RecoveryResult>& results,
                                    const std::string& set_label) {
  char buf[64];
  for (std::size_t i = 0; i < results.size(); ++i) {
    const RecoveryResult& r = results[i];
    std::snprintf(buf, sizeof buf, "%.9e", r.final_mse);
    os << i << ',' << set_label << ',' << buf << ',' << r.restart_errors.size() << ',' << r.iterations << ','
       << (r.plausible ? 1 : 0) << ',' << (r.verbatim ? 1 : 0) << '\n';
  }
}

}  // namespace lamd
