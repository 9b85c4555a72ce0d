#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "stresskit/dsp.hpp"
#include "stresskit/neural/layers.hpp"

namespace stresskit {

enum class Architecture { Cnn, Crnn, CrnnAttention };

const char* to_string(Architecture a);
Architecture architecture_from_string(std::string_view s);

struct ConvLayerSpec {
  int out_channels = 64;
  int kernel_h = 3;
  int kernel_w = 3;
  int stride = 1;
  int pool_h = 2;
  int pool_w = 2;
};

/// Architecture-family configuration. The convolutional front end is fully
/// configurable; the recurrent and attention blocks see only proj_dim, so
/// their sizes are independent of the input feature kind.
struct ModelConfig {
  std::vector<ConvLayerSpec> conv_stack = {{64, 3, 3, 1, 2, 2}, {128, 3, 3, 1, 2, 2}};
  int proj_dim = 512;       // d_model; must equal 2 * lstm_hidden
  int lstm_hidden = 256;
  int attention_heads = 4;
  int dense_hidden = 256;
  int n_classes = 2;
  double dropout_rate = 0.3;
  std::uint64_t init_seed = 1;

  void validate() const;
  std::string to_json() const;
  static ModelConfig from_json(const std::string& text);

  /// A desk-scale variant for training on small synthetic corpora.
  static ModelConfig small(int n_classes);
};

/// An instantiated layer stack. Forward/backward run one sample at a time;
/// a single training loop owns and mutates the instance.
class Network {
 public:
  Architecture architecture = Architecture::Cnn;
  FeatureKind feature_kind = FeatureKind::MFCC;
  ModelConfig config;
  int input_coeffs = 0;
  /// Pad/crop length the model was trained with; stamped by train() and
  /// carried in checkpoints so evaluation pads the same way (0 = unset).
  int trained_max_frames = 0;

  Tensor forward(const Tensor& input);  // [1, T, C] -> [n_classes]
  void backward(const Tensor& grad_logits);

  std::vector<NamedParam> parameters();
  std::vector<NamedParam> buffers();
  void set_train(bool train);
  void reseed_dropout(std::uint64_t seed) { *dropout_rng_ = Rng(seed); }
  void zero_grad();

  /// Flat copies of all parameter values, and their restoration; used for
  /// best-epoch snapshots.
  std::vector<double> snapshot_parameters();
  void restore_parameters(const std::vector<double>& snapshot);

  InputNorm* input_norm();  // first layer; null until built

  std::vector<std::unique_ptr<Layer>> layers;

 private:
  friend Network build_network(Architecture, FeatureKind, const ModelConfig&, int);
  // Heap-allocated so dropout layers can keep a stable pointer across moves.
  std::unique_ptr<Rng> dropout_rng_ = std::make_unique<Rng>(0);
};

/// Assemble CNN / CRNN / CRNN+Attention over the given input width:
/// conv stack -> per-frame projection to proj_dim -> [BiLSTM ->
/// [attention]] -> temporal mean pool -> dense head.
Network build_network(Architecture arch, FeatureKind kind, const ModelConfig& cfg,
                      int input_coeffs);

long count_parameters(Network& net);

/// [1, T, C] tensor view of a feature map.
Tensor feature_to_tensor(const FeatureMap& fm);

/// Binary checkpoint: config echo plus named parameter and buffer blobs as
/// 32-bit floats, order-stable. Loading rebuilds the network and rejects
/// any mismatch between the stored blobs and the rebuilt stack.
void save_checkpoint(Network& net, const std::filesystem::path& path);
Network load_checkpoint(const std::filesystem::path& path);

}  // namespace stresskit
