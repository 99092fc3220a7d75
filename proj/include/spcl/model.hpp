#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "spcl/matrix.hpp"

namespace spcl {

/// Architecture of the MLP: input -> hidden_dims... -> num_classes.
/// The last hidden layer is the feature layer that alignment losses act on.
struct MlpSpec {
  int input_dim = 2;
  std::vector<int> hidden_dims{64, 32};
  int num_classes = 3;
  std::uint64_t init_seed = 0;

  void validate() const;
  friend bool operator==(const MlpSpec&, const MlpSpec&) = default;
};

/// Affine layer, y = x W + b with W of shape in x out.
struct DenseLayer {
  Matrix weight;
  Matrix bias;  // 1 x out
};

/// Gradients (or velocities) with the same shape as a model's parameters.
struct Gradients {
  std::vector<DenseLayer> layers;

  Gradients& operator*=(double s) noexcept;
};

/// Everything forward() computes, kept for backward().
struct ForwardTrace {
  Matrix input;
  std::vector<Matrix> pre_activations;  // one per layer
  std::vector<Matrix> activations;      // ReLU outputs, hidden layers only

  [[nodiscard]] const Matrix& features() const { return activations.back(); }
  [[nodiscard]] const Matrix& logits() const { return pre_activations.back(); }
};

class MlpModel {
 public:
  /// Weights ~ N(0, 1/fan_in) from Rng(spec.init_seed); biases zero.
  static MlpModel init(const MlpSpec& spec);

  /// Builds a model from explicit parameters; shapes must chain.
  static MlpModel from_layers(std::vector<DenseLayer> layers);

  [[nodiscard]] const MlpSpec& spec() const noexcept { return spec_; }
  [[nodiscard]] std::size_t num_layers() const noexcept { return layers_.size(); }
  [[nodiscard]] const std::vector<DenseLayer>& layers() const noexcept { return layers_; }
  [[nodiscard]] std::vector<DenseLayer>& layers() noexcept { return layers_; }

  /// ReLU hidden layers, affine output. Throws ShapeError on input width mismatch.
  [[nodiscard]] ForwardTrace forward(const Matrix& x) const;

  /// Logits only.
  [[nodiscard]] Matrix logits(const Matrix& x) const;

  /// Gradients of a scalar loss given its derivative w.r.t. the logits and,
  /// optionally, an extra derivative injected at the feature layer. The two
  /// contributions are summed at the feature layer.
  [[nodiscard]] Gradients backward(const ForwardTrace& trace, const Matrix& dloss_dlogits,
                                   const Matrix* dloss_dfeatures = nullptr) const;

  [[nodiscard]] Gradients zeros_like() const;

  [[nodiscard]] bool all_finite() const noexcept;

  friend bool operator==(const MlpModel& a, const MlpModel& b);

 private:
  MlpSpec spec_;
  std::vector<DenseLayer> layers_;
};

/// Row-wise argmax of the logits; ties go to the lowest class index.
std::vector<int> predict(const MlpModel& model, const Matrix& x);

/// Row-wise argmax with ties to the lowest index.
std::vector<int> argmax_rows(const Matrix& m);

/// Text checkpoint: `spcl-ckpt v1`, the layer count, one `rows cols` line per
/// layer, then one line per layer holding the row-major weights followed by
/// the bias, all at 17 significant digits.
void save_checkpoint(const MlpModel& model, const std::filesystem::path& path);

/// Throws ParseError on malformed or truncated files and ShapeError when
/// `expected` is given and the stored architecture differs from it.
MlpModel load_checkpoint(const std::filesystem::path& path,
                         const std::optional<MlpSpec>& expected = std::nullopt);

}  // namespace spcl
