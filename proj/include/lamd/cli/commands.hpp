#pragma once

#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "lamd/cli/config.hpp"
#include "lamd/lamd.hpp"

// Subcommands of the `lamd` tool. Each command computes everything in memory
// and only then writes its files, so a failing run leaves no partial outputs.

namespace lamd::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kDataError = 2, kNumericError = 3 };

/// Files produced by one command, written together by commit().
class OutputSet {
 public:
  void add(const std::string& name, std::string bytes) { files_[name] = std::move(bytes); }

  void commit(const std::string& dir) const {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw DataError("cannot create output directory '" + dir + "': " + ec.message());
    for (const auto& [name, bytes] : files_) {
      const std::string path = (std::filesystem::path(dir) / name).string();
      std::ofstream out(path, std::ios::binary | std::ios::trunc);
      out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
      if (!out) throw DataError("cannot write '" + path + "'");
    }
  }

  const std::map<std::string, std::string>& files() const { return files_; }

 private:
  std::map<std::string, std::string> files_;
};

struct Context {
  RunConfig cfg;
  std::string out_dir = "lamd_out";
  std::size_t threads = 1;
  std::uint64_t seed = 0;
  std::ostream* log = &std::cerr;

  std::string model_dir() const { return cfg.str("model.dir").empty() ? out_dir : cfg.str("model.dir"); }
};

namespace detail {

inline std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9e", v);
  return buf;
}

inline std::string bytes_to_string(const std::vector<unsigned char>& b) { return std::string(b.begin(), b.end()); }

inline ImageDataset load_dataset(const RunConfig& cfg) {
  const std::string& source = cfg.str("data.source");
  if (source == "synthetic") return gen_synthetic(cfg.count("data.n"), cfg.count("data.side"), cfg.u64("data.seed"));
  if (source == "idx") {
    const std::string& images = cfg.str("data.idx_images");
    if (images.empty()) throw ConfigError("data.source = idx requires data.idx_images");
    std::optional<std::string> labels;
    if (!cfg.str("data.idx_labels").empty()) labels = cfg.str("data.idx_labels");
    return load_idx(images, labels, cfg.flag("data.pad_to_32"));
  }
  throw ConfigError("data.source must be synthetic or idx");
}

struct Splits {
  ImageDataset train, validation;
};

inline Splits load_splits(const RunConfig& cfg) {
  auto [tr, va] = split(load_dataset(cfg), SplitSpec{cfg.count("data.n_train")});
  return {std::move(tr), std::move(va)};
}

inline GeneratorSpec generator_spec(const RunConfig& cfg, const ImageShape& im) {
  return {architecture_from_string(cfg.str("model.architecture")), cfg.count("model.latent_dim"), im,
          cfg.counts("model.hidden")};
}

inline TrainConfig train_config(const Context& ctx) {
  const RunConfig& c = ctx.cfg;
  TrainConfig t;
  t.epochs = c.count("train.epochs");
  t.batch_size = c.count("train.batch_size");
  t.lr = c.real("train.lr");
  t.beta1 = c.real("train.beta1");
  t.beta2 = c.real("train.beta2");
  t.adv_weight = c.real("train.adv_weight");
  t.seed = ctx.seed;
  t.validate();
  return t;
}

inline RecoveryConfig recovery_config(const Context& ctx) {
  const RunConfig& c = ctx.cfg;
  RecoveryConfig r;
  r.optimizer.kind = optimizer_from_string(c.str("recovery.optimizer"));
  r.optimizer.max_iters = c.count("recovery.max_iters");
  r.optimizer.lbfgs_history = c.count("recovery.history");
  r.optimizer.sgd_lr = c.real("recovery.sgd_lr");
  r.optimizer.adam_lr = c.real("recovery.adam_lr");
  r.optimizer.grad_tol = c.real("recovery.grad_tol");
  r.restarts = c.count("recovery.restarts");
  const std::string& loss = c.str("recovery.loss");
  if (loss == "l2") r.loss = RecoveryLoss::l2;
  else if (loss == "l1") r.loss = RecoveryLoss::l1;
  else throw ConfigError("recovery.loss must be l2 or l1");
  r.seed = ctx.seed;
  r.validate();
  return r;
}

inline std::string model_kind(const RunConfig& cfg) {
  const std::string& k = cfg.str("model.kind");
  if (k != "glo" && k != "gan" && k != "aegan") throw ConfigError("model.kind must be glo, gan or aegan");
  return k;
}

inline std::string trace_csv(const TrainTrace& t) {
  std::string s;
  for (std::size_t i = 0; i < t.columns.size(); ++i) s += (i ? "," : "") + t.columns[i];
  s += "\n";
  for (const auto& row : t.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) s += (i ? "," : "") + (i == 0 ? std::to_string(static_cast<long>(row[i])) : num(row[i]));
    s += "\n";
  }
  return s;
}

// Trained models as read back from a model directory.
struct LoadedModels {
  std::string kind;
  GeneratorModel generator;
  std::optional<EncoderModel> encoder;
};

inline LoadedModels load_models(const Context& ctx) {
  const std::filesystem::path dir = ctx.model_dir();
  LoadedModels m;
  m.kind = model_kind(ctx.cfg);
  m.generator = load_generator((dir / "generator.ckpt").string());
  if (m.kind == "aegan") m.encoder = load_encoder((dir / "encoder.ckpt").string());
  return m;
}

inline std::vector<RecoveryResult> recover_targets(const LoadedModels& m, const std::vector<Tensor>& targets,
                                                   const RecoveryConfig& rc, std::size_t threads) {
  if (m.encoder) return recover_aegan_set(*m.encoder, m.generator, targets, rc);
  return recover_set(m.generator, targets, PhiOperator::identity(), rc, threads);
}

inline void check_target_shape(const LoadedModels& m, const ImageDataset& ds) {
  if (!(ds.image_shape() == m.generator.spec.image)) throw ShapeError("dataset images do not match the model");
}

inline std::string recovery_csv(const std::vector<std::pair<std::string, const std::vector<RecoveryResult>*>>& sets) {
  std::ostringstream os;
  write_recovery_csv_header(os);
  for (const auto& [label, rs] : sets) write_recovery_csv_rows(os, *rs, label);
  return os.str();
}

inline std::string audit_name(const RunConfig& cfg) {
  if (!cfg.str("audit.name").empty()) return cfg.str("audit.name");
  return cfg.str("model.kind") + "-" + cfg.str("data.n_train");
}

// Side-by-side (c, h, 3w) panel of three (c, h, w) images.
inline Tensor panel(const std::vector<Tensor>& images, const ImageShape& im) {
  Tensor out({im.channels, im.height, im.width * images.size()});
  for (std::size_t k = 0; k < images.size(); ++k)
    for (std::size_t c = 0; c < im.channels; ++c)
      for (std::size_t y = 0; y < im.height; ++y)
        for (std::size_t x = 0; x < im.width; ++x)
          out[(c * im.height + y) * im.width * images.size() + k * im.width + x] =
              images[k][(c * im.height + y) * im.width + x];
  return out;
}

inline Tensor nearest_upsample(const Tensor& pooled, const ImageShape& im, std::size_t factor) {
  Tensor out({im.channels, im.height, im.width});
  const std::size_t ph = im.height / factor, pw = im.width / factor;
  for (std::size_t c = 0; c < im.channels; ++c)
    for (std::size_t y = 0; y < im.height; ++y)
      for (std::size_t x = 0; x < im.width; ++x)
        out[(c * im.height + y) * im.width + x] = pooled[(c * ph + y / factor) * pw + x / factor];
  return out;
}

inline Tensor edit_target(const Context& ctx, const ImageDataset& validation, const ImageShape& im) {
  if (!ctx.cfg.str("edit.image").empty()) {
    Tensor t = read_pnm(ctx.cfg.str("edit.image"));
    if (t.shape() != Shape{im.channels, im.height, im.width}) throw DataError("edit.image does not match the model");
    return t;
  }
  const std::size_t i = ctx.cfg.count("edit.target_index");
  if (i >= validation.size()) throw ConfigError("edit.target_index beyond the validation set");
  return validation.image(i).reshaped({im.channels, im.height, im.width});
}

inline std::string single_recovery_csv(const RecoveryResult& r, const std::string& label) {
  std::ostringstream os;
  write_recovery_csv_header(os);
  write_recovery_csv_rows(os, {r}, label);
  return os.str();
}

}  // namespace detail

// ---------------------------------------------------------------------------

inline OutputSet cmd_train(const Context& ctx) {
  using namespace detail;
  const std::string kind = model_kind(ctx.cfg);
  const TrainConfig tc = train_config(ctx);
  const Splits data = load_splits(ctx.cfg);
  const ImageShape im = data.train.image_shape();
  const GeneratorSpec gs = generator_spec(ctx.cfg, im);
  const DiscriminatorSpec ds{im, ctx.cfg.counts("model.disc_hidden")};
  const EncoderSpec es{im, gs.latent_dim, ctx.cfg.counts("model.enc_hidden")};
  *ctx.log << "training " << kind << " on " << data.train.size() << " images for " << tc.epochs << " epochs\n";
  OutputSet out;
  if (kind == "glo") {
    const GloState st = train_glo(data.train, gs, tc);
    out.add("generator.ckpt", bytes_to_string(checkpoint_bytes(st.model)));
    out.add("train_trace.csv", trace_csv(st.trace));
    *ctx.log << "final train reconstruction MSE " << st.final_train_mse << "\n";
  } else if (kind == "gan") {
    const GanResult r = train_gan(data.train, gs, ds, tc);
    out.add("generator.ckpt", bytes_to_string(checkpoint_bytes(r.generator)));
    out.add("discriminator.ckpt", bytes_to_string(checkpoint_bytes(r.discriminator)));
    out.add("train_trace.csv", trace_csv(r.trace));
  } else {
    const AeganResult r = train_aegan(data.train, gs, es, ds, tc);
    out.add("generator.ckpt", bytes_to_string(checkpoint_bytes(r.generator)));
    out.add("encoder.ckpt", bytes_to_string(checkpoint_bytes(r.encoder)));
    out.add("discriminator.ckpt", bytes_to_string(checkpoint_bytes(r.discriminator)));
    out.add("train_trace.csv", trace_csv(r.trace));
  }
  return out;
}

inline OutputSet cmd_recover(const Context& ctx) {
  using namespace detail;
  const RecoveryConfig rc = recovery_config(ctx);
  const Splits data = load_splits(ctx.cfg);
  const LoadedModels m = load_models(ctx);
  check_target_shape(m, data.train);
  const auto tr = recover_targets(m, take_images(data.train, ctx.cfg.count("audit.train_targets")), rc, ctx.threads);
  const auto va =
      recover_targets(m, take_images(data.validation, ctx.cfg.count("audit.val_targets")), rc, ctx.threads);
  OutputSet out;
  out.add("recovery.csv", recovery_csv({{"train", &tr}, {"validation", &va}}));
  return out;
}

inline OutputSet cmd_audit(const Context& ctx) {
  using namespace detail;
  const RecoveryConfig rc = recovery_config(ctx);
  const Splits data = load_splits(ctx.cfg);
  const LoadedModels m = load_models(ctx);
  check_target_shape(m, data.train);
  AuditOptions opts;
  opts.model_name = audit_name(ctx.cfg);
  opts.threads = ctx.threads;
  if (!m.encoder) opts.generated_targets = ctx.cfg.count("audit.generated_targets");
  if (ctx.cfg.str("audit.distortion") != "none") opts.distortion = distortion_from_string(ctx.cfg.str("audit.distortion"));
  const auto train_t = take_images(data.train, ctx.cfg.count("audit.train_targets"));
  const auto val_t = take_images(data.validation, ctx.cfg.count("audit.val_targets"));
  const AuditOutcome a = m.encoder ? audit_aegan(*m.encoder, m.generator, train_t, val_t, rc, opts)
                                   : audit(m.generator, train_t, val_t, rc, opts);
  const AuditReport& r = a.report;
  *ctx.log << opts.model_name << ": MRE train " << r.mre_train << ", val " << r.mre_val << ", gap " << r.mre_gap
           << ", KS p " << r.ks_p << (r.failed_targets ? ", failed targets " + std::to_string(r.failed_targets) : "")
           << "\n";
  OutputSet out;
  std::ostringstream row;
  write_audit_csv_header(row);
  write_audit_csv_row(row, r);
  out.add("audit.csv", row.str());
  out.add("errors.csv", recovery_csv({{"train", &a.train},
                                      {"validation", &a.validation},
                                      {"generated", &a.generated},
                                      {"distorted", &a.distorted}}));
  const Histogram h = histogram(a.samples(), ctx.cfg.count("audit.bins"));
  std::ostringstream hc;
  write_histogram_csv(hc, h);
  out.add("histogram.csv", hc.str());
  out.add("histogram.svg", histogram_svg(h, "Recovery errors: " + opts.model_name));
  return out;
}

inline OutputSet cmd_distort_sweep(const Context& ctx) {
  using namespace detail;
  const RecoveryConfig rc = recovery_config(ctx);
  const Splits data = load_splits(ctx.cfg);
  const LoadedModels m = load_models(ctx);
  check_target_shape(m, data.train);
  const auto targets = take_images(data.train, ctx.cfg.count("distort.targets"));
  const std::size_t side = m.generator.spec.image.height;
  const double radius = ctx.cfg.real("distort.smoothing_radius");
  std::string csv = "kind,grid_index,sigma_d,patch_size,mre,failed\n";
  std::vector<Series> series;
  for (const std::string& name : ctx.cfg.list("distort.kinds")) {
    const DistortionKind kind = distortion_from_string(name);
    Series s{name, {}};
    for (std::size_t k = 0; k < kWarpSigmaGrid.size(); ++k) {
      const DistortionSpec spec = grid_distortion(kind, k, side, radius);
      spec.validate(side);
      Rng rng(ctx.seed, streams::kDistortion);
      std::vector<Tensor> distorted;
      for (const Tensor& t : targets) distorted.push_back(apply_distortion(t, spec, rng));
      const auto rs = recover_targets(m, distorted, rc, ctx.threads);
      const auto errs = final_errors(rs);
      if (errs.empty()) throw NumericError("every recovery failed at " + name + " grid point " + std::to_string(k));
      const double mre = median(errs);
      csv += name + "," + std::to_string(k) + "," + num(spec.sigma_d) + "," + std::to_string(spec.patch_size) + "," +
             num(mre) + "," + std::to_string(rs.size() - errs.size()) + "\n";
      s.points.emplace_back(static_cast<double>(k), mre);
      *ctx.log << name << " grid " << k << ": MRE " << mre << "\n";
    }
    series.push_back(std::move(s));
  }
  OutputSet out;
  out.add("distort_sweep.csv", csv);
  out.add("distort_sweep.svg", line_plot_svg(series, "MRE under distortion", "grid index", "MRE"));
  return out;
}

inline OutputSet cmd_inpaint(const Context& ctx) {
  using namespace detail;
  const RecoveryConfig rc = recovery_config(ctx);
  const LoadedModels m = load_models(ctx);
  if (m.encoder) throw ConfigError("inpaint needs a latent-optimised generator (glo or gan)");
  const ImageShape im = m.generator.spec.image;
  const Splits data = load_splits(ctx.cfg);
  const Tensor y = edit_target(ctx, data.validation, im);
  const auto rect = ctx.cfg.counts("inpaint.mask");
  if (rect.size() != 4) throw ConfigError("inpaint.mask must be top,left,height,width");
  if (rect[0] + rect[2] > im.height || rect[1] + rect[3] > im.width) throw ConfigError("inpaint.mask outside image");
  Tensor mask({im.height, im.width}, 1.0);
  for (std::size_t r = rect[0]; r < rect[0] + rect[2]; ++r)
    for (std::size_t c = rect[1]; c < rect[1] + rect[3]; ++c) mask[r * im.width + c] = 0.0;
  const PhiOperator phi = PhiOperator::mask(mask);
  const RecoveryResult r = recover_set(m.generator, {y}, phi, rc, 1).front();
  if (!r.ok()) throw NumericError("inpainting recovery failed: " + r.error);
  const Tensor shape3 = phi.apply(y.reshaped(im.batch_shape(1))).reshaped({im.channels, im.height, im.width});
  const Tensor recon = generate(m.generator, r.best_z).reshaped({im.channels, im.height, im.width});
  *ctx.log << "inpainting observed-region MSE " << r.final_mse << "\n";
  OutputSet out;
  out.add("inpaint.pgm", encode_pnm(panel({shape3, recon, y}, im)));
  out.add("inpaint.csv", single_recovery_csv(r, "inpaint"));
  return out;
}

inline OutputSet cmd_superres(const Context& ctx) {
  using namespace detail;
  const RecoveryConfig rc = recovery_config(ctx);
  const LoadedModels m = load_models(ctx);
  if (m.encoder) throw ConfigError("superres needs a latent-optimised generator (glo or gan)");
  const ImageShape im = m.generator.spec.image;
  const Splits data = load_splits(ctx.cfg);
  const Tensor y = edit_target(ctx, data.validation, im);
  const std::size_t factor = ctx.cfg.count("superres.factor");
  const PhiOperator phi = PhiOperator::avgpool(factor);
  phi.validate(im);
  const RecoveryResult r = recover_set(m.generator, {y}, phi, rc, 1).front();
  if (!r.ok()) throw NumericError("super-resolution recovery failed: " + r.error);
  const Tensor low = nearest_upsample(phi.apply(y.reshaped(im.batch_shape(1))), im, factor);
  const Tensor recon = generate(m.generator, r.best_z).reshaped({im.channels, im.height, im.width});
  *ctx.log << "super-resolution pooled-domain MSE " << r.final_mse << "\n";
  OutputSet out;
  out.add("superres.pgm", encode_pnm(panel({low, recon, y}, im)));
  out.add("superres.csv", single_recovery_csv(r, "superres"));
  return out;
}

inline OutputSet cmd_convergence(const Context& ctx) {
  using namespace detail;
  RecoveryConfig rc = recovery_config(ctx);
  const LoadedModels m = load_models(ctx);
  const auto targets = generated_targets(m.generator, ctx.cfg.count("convergence.targets"), ctx.seed);
  const std::size_t inits = ctx.cfg.count("convergence.inits");
  const double threshold = ctx.cfg.real("convergence.threshold");
  OutputSet out;
  std::string summary = "optimizer,iterations_to_threshold,reached,final_median\n";
  std::vector<Series> series;
  for (const std::string& name : ctx.cfg.list("convergence.optimizers")) {
    rc.optimizer.kind = optimizer_from_string(name);
    const ConvergenceCurves c = convergence_curves(m.generator, targets, inits, rc, threshold, ctx.threads);
    std::string csv = "iteration,median,q25,q75\n";
    Series s{name, {}};
    for (std::size_t it = 0; it < c.median.size(); ++it) {
      csv += std::to_string(it) + "," + num(c.median[it]) + "," + num(c.q25[it]) + "," + num(c.q75[it]) + "\n";
      s.points.emplace_back(static_cast<double>(it), c.median[it]);
    }
    out.add("convergence_" + name + ".csv", csv);
    summary += name + "," + std::to_string(c.iterations_to_threshold) + "," + (c.reached ? "1" : "0") + "," +
               num(c.median.back()) + "\n";
    *ctx.log << name << ": median reaches " << threshold << " at iteration "
             << (c.reached ? std::to_string(c.iterations_to_threshold) : std::string("never")) << "\n";
    series.push_back(std::move(s));
  }
  out.add("convergence_summary.csv", summary);
  out.add("convergence.svg", line_plot_svg(series, "Median recovery error", "iteration", "MRE", true));
  return out;
}

/// Concatenates the audit rows found in `dirs` into one table.
inline OutputSet cmd_report(const Context& ctx, const std::vector<std::string>& dirs) {
  if (dirs.empty()) throw ConfigError("report needs at least one audit directory");
  std::string header, rows;
  for (const std::string& d : dirs) {
    const std::string path = (std::filesystem::path(d) / "audit.csv").string();
    std::ifstream in(path);
    if (!in) throw DataError("no audit.csv in '" + d + "'");
    std::string h, line;
    std::getline(in, h);
    if (header.empty()) header = h;
    if (h != header) throw DataError("audit.csv in '" + d + "' has a different header");
    while (std::getline(in, line)) {
      if (!line.empty()) rows += line + "\n";
    }
  }
  (void)ctx;
  OutputSet out;
  out.add("report.csv", header + "\n" + rows);
  return out;
}

// ---------------------------------------------------------------------------

inline int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const DataError*>(&e)) return kDataError;
  if (dynamic_cast<const NumericError*>(&e)) return kNumericError;
  if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const ShapeError*>(&e)) return kUsage;
  return kNumericError;
}

/// Entry point shared by the executable and the tests.
inline int run(int argc, const char* const* argv, std::ostream& log = std::cerr) {
  CLI::App app{"Latent recovery memorization audits for toy generative models"};
  app.require_subcommand(1);
  std::string config_path, out_dir = "lamd_out";
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> threads;
  std::vector<std::string> report_dirs;
  const std::vector<std::string> names{"train",    "recover",     "audit",       "distort-sweep",
                                       "inpaint",  "superres",    "convergence", "report"};
  for (const std::string& n : names) {
    CLI::App* sub = app.add_subcommand(n);
    sub->add_option("--config", config_path, "key = value run configuration");
    sub->add_option("--seed", seed, "overrides the config seed");
    sub->add_option("--out", out_dir, "output directory");
    sub->add_option("--threads", threads, "worker threads (speed only)")->check(CLI::PositiveNumber);
    if (n == "report") sub->add_option("dirs", report_dirs, "directories holding audit.csv");
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kUsage;
  }
  const std::string cmd = app.get_subcommands().front()->get_name();
  try {
    Context ctx;
    ctx.log = &log;
    if (!config_path.empty()) ctx.cfg = RunConfig::load(config_path);
    if (seed) ctx.cfg.set("seed", std::to_string(*seed));
    if (threads) ctx.cfg.set("threads", std::to_string(*threads));
    ctx.seed = ctx.cfg.u64("seed");
    ctx.threads = ctx.cfg.count("threads");
    if (ctx.threads == 0) throw ConfigError("threads must be >= 1");
    ctx.out_dir = out_dir;
    OutputSet out;
    if (cmd == "train") out = cmd_train(ctx);
    else if (cmd == "recover") out = cmd_recover(ctx);
    else if (cmd == "audit") out = cmd_audit(ctx);
    else if (cmd == "distort-sweep") out = cmd_distort_sweep(ctx);
    else if (cmd == "inpaint") out = cmd_inpaint(ctx);
    else if (cmd == "superres") out = cmd_superres(ctx);
    else if (cmd == "convergence") out = cmd_convergence(ctx);
    else out = cmd_report(ctx, report_dirs);
    // threads never changes results; the recorded config pins it to 1.
    RunConfig resolved = ctx.cfg;
    resolved.set("threads", "1");
    out.add(cmd + "_config.txt", resolved.resolved());
    out.commit(ctx.out_dir);
    return kOk;
  } catch (const std::exception& e) {
    log << "lamd " << cmd << ": " << e.what() << "\n";
    return exit_code_for(e);
  }
}

}  // namespace lamd::cli
