#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "lamd/autodiff.hpp"
#include "lamd/error.hpp"
#include "lamd/rng.hpp"
#include "lamd/tensor.hpp"

namespace lamd {

struct ImageShape {
  std::size_t channels = 1;
  std::size_t height = 32;
  std::size_t width = 32;

  std::size_t numel() const noexcept { return channels * height * width; }
  Shape batch_shape(std::size_t n) const { return {n, channels, height, width}; }
  friend bool operator==(const ImageShape&, const ImageShape&) = default;
};

enum class Architecture : std::uint8_t { mlp = 0, upsample_conv = 1 };

inline const char* to_string(Architecture a) {
  return a == Architecture::mlp ? "mlp" : "upsample-conv";
}

inline Architecture architecture_from_string(const std::string& s) {
  if (s == "mlp") return Architecture::mlp;
  if (s == "upsample-conv") return Architecture::upsample_conv;
  throw ConfigError("unknown architecture '" + s + "'");
}

/// Generator z -> image. For upsample-conv, hidden_widths lists channel
/// counts: the first is the channel count at side/4, each later entry is one
/// upsample + 3x3 conv stage.
struct GeneratorSpec {
  Architecture architecture = Architecture::mlp;
  std::size_t latent_dim = 32;
  ImageShape image{};
  std::vector<std::size_t> hidden_widths{128, 256};
  friend bool operator==(const GeneratorSpec&, const GeneratorSpec&) = default;
};

struct DiscriminatorSpec {
  ImageShape image{};
  std::vector<std::size_t> hidden_widths{256, 64};
  friend bool operator==(const DiscriminatorSpec&, const DiscriminatorSpec&) = default;
};

struct EncoderSpec {
  ImageShape image{};
  std::size_t latent_dim = 32;
  std::vector<std::size_t> hidden_widths{256};
  friend bool operator==(const EncoderSpec&, const EncoderSpec&) = default;
};

// ---------------------------------------------------------------------------
// Layer graph shared by all three model roles.

enum class LayerKind : std::uint8_t { dense, conv3x3, upsample, leaky_relu, tanh, reshape };

struct Layer {
  LayerKind kind;
  std::size_t in = 0;   // dense: input features; conv: input channels
  std::size_t out = 0;  // dense: output features; conv: output channels
  Shape target{};       // reshape only (without batch dimension)
};

/// A feed-forward stack with a fixed parameter layout: each dense or conv
/// layer owns a weight tensor followed by a bias vector.
class Network {
 public:
  Network() = default;
  explicit Network(std::vector<Layer> layers) : layers_(std::move(layers)) {
    for (const Layer& l : layers_) {
      if (l.kind == LayerKind::dense) {
        shapes_.push_back({l.in, l.out});
        shapes_.push_back({l.out});
        fan_in_.push_back(l.in);
        fan_in_.push_back(0);
      } else if (l.kind == LayerKind::conv3x3) {
        shapes_.push_back({l.out, l.in, 3, 3});
        shapes_.push_back({l.out});
        fan_in_.push_back(l.in * 9);
        fan_in_.push_back(0);
      }
    }
  }

  const std::vector<Layer>& layers() const noexcept { return layers_; }
  /// Parameter layout: one shape per tensor, in storage order.
  const std::vector<Shape>& param_shapes() const noexcept { return shapes_; }

  std::size_t param_count() const {
    std::size_t n = 0;
    for (const Shape& s : shapes_) n += shape_numel(s);
    return n;
  }

  /// He initialisation: weights ~ N(0, 2 / fan_in), biases zero.
  std::vector<Tensor> init_params(Rng& rng) const {
    std::vector<Tensor> params;
    for (std::size_t k = 0; k < shapes_.size(); ++k) {
      Tensor t(shapes_[k], 0.0);
      if (fan_in_[k] > 0) {
        const double sd = std::sqrt(2.0 / static_cast<double>(fan_in_[k]));
        for (double& v : t.data()) v = rng.normal() * sd;
      }
      params.push_back(std::move(t));
    }
    return params;
  }

  ad::Var forward(ad::Var x, std::span<const ad::Var> params) const {
    if (params.size() != shapes_.size()) throw ShapeError("network: wrong parameter count");
    std::size_t p = 0;
    for (const Layer& l : layers_) {
      switch (l.kind) {
        case LayerKind::dense:
          x = ad::add_bias(ad::matmul(x, params[p]), params[p + 1]);
          p += 2;
          break;
        case LayerKind::conv3x3:
          x = ad::add_bias(ad::conv2d(x, params[p]), params[p + 1]);
          p += 2;
          break;
        case LayerKind::upsample: x = ad::upsample2x(x); break;
        case LayerKind::leaky_relu: x = ad::leaky_relu(x, 0.2); break;
        case LayerKind::tanh: x = ad::tanh(x); break;
        case LayerKind::reshape: {
          Shape s{x.shape()[0]};
          s.insert(s.end(), l.target.begin(), l.target.end());
          x = ad::reshape(x, std::move(s));
          break;
        }
      }
    }
    return x;
  }

 private:
  std::vector<Layer> layers_;
  std::vector<Shape> shapes_;
  std::vector<std::size_t> fan_in_;
};

inline Network build_generator_network(const GeneratorSpec& spec) {
  const ImageShape& im = spec.image;
  if (spec.latent_dim == 0 || im.channels == 0) throw ShapeError("generator: empty latent or channel count");
  if (im.height != im.width || (im.height != 16 && im.height != 32)) {
    throw ShapeError("generator: image side must be 16 or 32, got " + std::to_string(im.height) + "x" +
                     std::to_string(im.width));
  }
  if (spec.hidden_widths.empty()) throw ShapeError("generator: hidden_widths must not be empty");
  std::vector<Layer> layers;
  if (spec.architecture == Architecture::mlp) {
    std::size_t in = spec.latent_dim;
    for (std::size_t w : spec.hidden_widths) {
      layers.push_back({LayerKind::dense, in, w, {}});
      layers.push_back({LayerKind::leaky_relu});
      in = w;
    }
    layers.push_back({LayerKind::dense, in, im.numel(), {}});
    layers.push_back({LayerKind::tanh});
    layers.push_back({LayerKind::reshape, 0, 0, {im.channels, im.height, im.width}});
  } else {
    const std::size_t stages = spec.hidden_widths.size() - 1;
    if (stages == 0 || stages > 2) throw ShapeError("upsample-conv generator needs 2 or 3 hidden widths");
    const std::size_t base = im.height >> stages;
    const std::size_t c0 = spec.hidden_widths[0];
    layers.push_back({LayerKind::dense, spec.latent_dim, c0 * base * base, {}});
    layers.push_back({LayerKind::leaky_relu});
    layers.push_back({LayerKind::reshape, 0, 0, {c0, base, base}});
    std::size_t in = c0;
    for (std::size_t s = 1; s <= stages; ++s) {
      layers.push_back({LayerKind::upsample});
      layers.push_back({LayerKind::conv3x3, in, spec.hidden_widths[s], {}});
      layers.push_back({LayerKind::leaky_relu});
      in = spec.hidden_widths[s];
    }
    layers.push_back({LayerKind::conv3x3, in, im.channels, {}});
    layers.push_back({LayerKind::tanh});
  }
  return Network(std::move(layers));
}

inline Network build_mlp_head(const ImageShape& im, const std::vector<std::size_t>& hidden, std::size_t outputs) {
  if (im.numel() == 0) throw ShapeError("empty image shape");
  std::vector<Layer> layers;
  layers.push_back({LayerKind::reshape, 0, 0, {im.numel()}});
  std::size_t in = im.numel();
  for (std::size_t w : hidden) {
    layers.push_back({LayerKind::dense, in, w, {}});
    layers.push_back({LayerKind::leaky_relu});
    in = w;
  }
  layers.push_back({LayerKind::dense, in, outputs, {}});
  return Network(std::move(layers));
}

/// Binds parameters as tape leaves. Constant bindings borrow the tensors, so
/// `params` must outlive the tape.
inline std::vector<ad::Var> bind_params(ad::Tape& tape, const std::vector<Tensor>& params, bool trainable) {
  std::vector<ad::Var> vars;
  vars.reserve(params.size());
  for (const Tensor& p : params) vars.push_back(trainable ? tape.leaf(p, true) : tape.constant_ref(p));
  return vars;
}

inline std::vector<double> flatten_params(const std::vector<Tensor>& params) {
  std::vector<double> flat;
  for (const Tensor& p : params) flat.insert(flat.end(), p.data().begin(), p.data().end());
  return flat;
}

inline void assign_params(std::vector<Tensor>& params, std::span<const double> flat) {
  std::size_t offset = 0;
  for (Tensor& p : params) {
    if (offset + p.size() > flat.size()) throw ShapeError("parameter vector too short");
    std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(offset), p.size(), p.data().begin());
    offset += p.size();
  }
  if (offset != flat.size()) throw ShapeError("parameter vector length mismatch");
}

// ---------------------------------------------------------------------------

struct GeneratorModel {
  GeneratorSpec spec;
  Network net;
  std::vector<Tensor> params;

  std::vector<double> flat_params() const { return flatten_params(params); }
};

/// Outputs raw logits; D(x) = sigmoid(logit).
struct DiscriminatorModel {
  DiscriminatorSpec spec;
  Network net;
  std::vector<Tensor> params;

  std::vector<double> flat_params() const { return flatten_params(params); }
};

struct EncoderModel {
  EncoderSpec spec;
  Network net;
  std::vector<Tensor> params;

  std::vector<double> flat_params() const { return flatten_params(params); }
};

inline GeneratorModel init_model(const GeneratorSpec& spec, std::uint64_t seed) {
  GeneratorModel m{spec, build_generator_network(spec), {}};
  Rng rng(seed, streams::kGeneratorInit);
  m.params = m.net.init_params(rng);
  return m;
}

inline DiscriminatorModel init_model(const DiscriminatorSpec& spec, std::uint64_t seed) {
  DiscriminatorModel m{spec, build_mlp_head(spec.image, spec.hidden_widths, 1), {}};
  Rng rng(seed, streams::kDiscriminatorInit);
  m.params = m.net.init_params(rng);
  return m;
}

inline EncoderModel init_model(const EncoderSpec& spec, std::uint64_t seed) {
  if (spec.latent_dim == 0) throw ShapeError("encoder: latent_dim must be positive");
  EncoderModel m{spec, build_mlp_head(spec.image, spec.hidden_widths, spec.latent_dim), {}};
  Rng rng(seed, streams::kEncoderInit);
  m.params = m.net.init_params(rng);
  return m;
}

/// Latent batch (n, latent_dim) of i.i.d. standard normals.
inline Tensor sample_latents(std::size_t n, std::size_t latent_dim, Rng& rng) {
  if (n == 0) throw ShapeError("sample_latents: n must be >= 1");
  Tensor z({n, latent_dim});
  for (double& v : z.data()) v = rng.normal();
  return z;
}

/// Differentiable generation on an existing tape.
inline ad::Var generate(const GeneratorModel& model, ad::Var z, std::span<const ad::Var> params) {
  if (z.value().rank() != 2 || z.shape()[1] != model.spec.latent_dim) {
    throw ShapeError("generate: latent batch " + shape_str(z.shape()) + " does not have " +
                     std::to_string(model.spec.latent_dim) + " columns");
  }
  return model.net.forward(z, params);
}

/// Images (n, c, h, w) for a latent batch (n, latent_dim).
inline Tensor generate(const GeneratorModel& model, const Tensor& z) {
  ad::Tape tape;
  auto params = bind_params(tape, model.params, false);
  return generate(model, tape.constant(z), params).value();
}

inline Tensor encode(const EncoderModel& model, const Tensor& images) {
  ad::Tape tape;
  auto params = bind_params(tape, model.params, false);
  return model.net.forward(tape.constant(images), params).value();
}

/// D(x) in (0, 1) for every image of the batch.
inline Tensor discriminate(const DiscriminatorModel& model, const Tensor& images) {
  ad::Tape tape;
  auto params = bind_params(tape, model.params, false);
  return ad::sigmoid(model.net.forward(tape.constant(images), params)).value();
}

}  // namespace lamd
