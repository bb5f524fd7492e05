#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "lamd/distortions.hpp"
#include "lamd/models.hpp"
#include "lamd/recovery.hpp"
#include "lamd/rng.hpp"
#include "lamd/stats.hpp"
#include "lamd/tensor.hpp"

// Memorization audit: recover train and validation targets with the same
// configuration, then compare the two error distributions.

namespace lamd {

struct AuditOptions {
  std::string model_name = "model";
  std::size_t generated_targets = 0;            // 0 leaves mre_generated empty
  std::optional<DistortionKind> distortion;     // small-distort column over the train targets
  std::size_t threads = 1;
};

struct AuditOutcome {
  AuditReport report;
  std::vector<RecoveryResult> train;
  std::vector<RecoveryResult> validation;
  std::vector<RecoveryResult> generated;
  std::vector<RecoveryResult> distorted;

  std::vector<ErrorSampleSet> samples() const {
    std::vector<ErrorSampleSet> out{{"train", final_errors(train)}, {"validation", final_errors(validation)}};
    if (!generated.empty()) out.push_back({"generated", final_errors(generated)});
    if (!distorted.empty()) out.push_back({"distorted", final_errors(distorted)});
    return out;
  }
};

/// Generator samples G(z), z drawn from (seed, kGeneratedTargets).
inline std::vector<Tensor> generated_targets(const GeneratorModel& model, std::size_t n, std::uint64_t seed) {
  Rng rng(seed, streams::kGeneratedTargets);
  const Tensor images = generate(model, sample_latents(n, model.spec.latent_dim, rng));
  std::vector<Tensor> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(batch_item(images, i));
  return out;
}

/// Targets with the small-distort setting of `kind`, one shared stream.
inline std::vector<Tensor> distorted_targets(const std::vector<Tensor>& targets, DistortionKind kind, std::size_t side,
                                             std::uint64_t seed) {
  Rng rng(seed, streams::kDistortion);
  const DistortionSpec spec = small_distortion(kind, side);
  std::vector<Tensor> out;
  for (const Tensor& t : targets) out.push_back(apply_distortion(t, spec, rng));
  return out;
}

/// Toy stand-in for Inception features: each image average-pooled to 4x4 per
/// channel and flattened, one row per image.
inline FeatureMatrix pooled_features(const std::vector<Tensor>& images) {
  if (images.empty()) throw ConfigError("pooled_features needs at least one image");
  const detail::PlaneDims d = detail::plane_dims(images.front());
  if (d.height % 4 != 0 || d.width % 4 != 0) throw ShapeError("pooled_features: image sides must be multiples of 4");
  const std::size_t bh = d.height / 4, bw = d.width / 4;
  FeatureMatrix f = FeatureMatrix::Zero(static_cast<Eigen::Index>(images.size()), static_cast<Eigen::Index>(16 * d.channels));
  for (std::size_t i = 0; i < images.size(); ++i) {
    if (images[i].size() != images.front().size()) throw ShapeError("pooled_features: images differ in size");
    const auto& v = images[i].data();
    for (std::size_t c = 0; c < d.channels; ++c)
      for (std::size_t y = 0; y < d.height; ++y)
        for (std::size_t x = 0; x < d.width; ++x)
          f(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c * 16 + (y / bh) * 4 + x / bw)) +=
              v[(c * d.height + y) * d.width + x];
  }
  return f / static_cast<double>(bh * bw);
}

namespace detail {

inline std::size_t count_failed(const std::vector<RecoveryResult>& rs) {
  std::size_t n = 0;
  for (const auto& r : rs) n += r.ok() ? 0 : 1;
  return n;
}

inline void fill_report(AuditOutcome& out, const std::string& name) {
  const std::vector<double> tr = final_errors(out.train), va = final_errors(out.validation);
  if (tr.empty() || va.empty()) throw NumericError("audit: every recovery of a target set failed");
  out.report = make_report(name, tr, va);
  if (!out.generated.empty()) {
    const auto g = final_errors(out.generated);
    if (!g.empty()) out.report.mre_generated = median(g);
  }
  if (!out.distorted.empty()) {
    const auto d = final_errors(out.distorted);
    if (!d.empty()) out.report.mre_distorted = median(d);
  }
  out.report.failed_targets = count_failed(out.train) + count_failed(out.validation) +
                              count_failed(out.generated) + count_failed(out.distorted);
}

}  // namespace detail

inline AuditOutcome audit(const GeneratorModel& model, const std::vector<Tensor>& train_targets,
                          const std::vector<Tensor>& val_targets, const RecoveryConfig& cfg,
                          const AuditOptions& opts = {}) {
  if (train_targets.empty() || val_targets.empty()) throw ConfigError("audit needs train and validation targets");
  const PhiOperator phi = PhiOperator::identity();
  AuditOutcome out;
  out.train = recover_set(model, train_targets, phi, cfg, opts.threads);
  out.validation = recover_set(model, val_targets, phi, cfg, opts.threads);
  if (opts.generated_targets > 0) {
    out.generated = recover_set(model, generated_targets(model, opts.generated_targets, cfg.seed), phi, cfg,
                                opts.threads);
  }
  if (opts.distortion) {
    out.distorted = recover_set(model, distorted_targets(train_targets, *opts.distortion, model.spec.image.height,
                                                         cfg.seed),
                                phi, cfg, opts.threads);
  }
  detail::fill_report(out, opts.model_name);
  return out;
}

/// AEGAN audit: errors are autoencoding residuals. There is no generated
/// column for autoencoders.
inline AuditOutcome audit_aegan(const EncoderModel& encoder, const GeneratorModel& generator,
                                const std::vector<Tensor>& train_targets, const std::vector<Tensor>& val_targets,
                                const RecoveryConfig& cfg, const AuditOptions& opts = {}) {
  if (train_targets.empty() || val_targets.empty()) throw ConfigError("audit needs train and validation targets");
  AuditOutcome out;
  out.train = recover_aegan_set(encoder, generator, train_targets, cfg);
  out.validation = recover_aegan_set(encoder, generator, val_targets, cfg);
  if (opts.distortion) {
    out.distorted = recover_aegan_set(
        encoder, generator,
        distorted_targets(train_targets, *opts.distortion, generator.spec.image.height, cfg.seed), cfg);
  }
  detail::fill_report(out, opts.model_name);
  return out;
}

}  // namespace lamd
