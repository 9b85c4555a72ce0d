#include "stresskit/neural/network.hpp"

#include <cstring>
#include <fstream>
#include <json.hpp>

#include "stresskit/errors.hpp"

namespace stresskit {

using ordered_json = nlohmann::ordered_json;

const char* to_string(Architecture a) {
  switch (a) {
    case Architecture::Cnn: return "cnn";
    case Architecture::Crnn: return "crnn";
    case Architecture::CrnnAttention: return "crnn_attention";
  }
  return "?";
}

Architecture architecture_from_string(std::string_view s) {
  if (s == "cnn") return Architecture::Cnn;
  if (s == "crnn") return Architecture::Crnn;
  if (s == "crnn_attention" || s == "crnn+attention") return Architecture::CrnnAttention;
  throw ConfigError("unknown architecture: " + std::string(s));
}

void ModelConfig::validate() const {
  if (conv_stack.empty()) throw ConfigError("model: conv_stack must not be empty");
  for (const auto& c : conv_stack) {
    if (c.out_channels < 1 || c.kernel_h < 1 || c.kernel_w < 1 || c.stride < 1 || c.pool_h < 1 ||
        c.pool_w < 1)
      throw ConfigError("model: conv layer fields must be positive");
  }
  if (proj_dim < 1 || lstm_hidden < 1 || dense_hidden < 1 || n_classes < 2)
    throw ConfigError("model: dimensions must be positive and n_classes >= 2");
  if (proj_dim != 2 * lstm_hidden)
    throw ConfigError("model: proj_dim must equal 2 * lstm_hidden so the BiLSTM output keeps "
                      "d_model");
  if (attention_heads < 1 || proj_dim % attention_heads != 0)
    throw ConfigError("model: proj_dim must be divisible by attention_heads");
  if (dropout_rate < 0.0 || dropout_rate >= 1.0)
    throw ConfigError("model: dropout_rate must be in [0, 1)");
}

std::string ModelConfig::to_json() const {
  ordered_json j;
  ordered_json stack = ordered_json::array();
  for (const auto& c : conv_stack) {
    ordered_json l;
    l["out_channels"] = c.out_channels;
    l["kernel_h"] = c.kernel_h;
    l["kernel_w"] = c.kernel_w;
    l["stride"] = c.stride;
    l["pool_h"] = c.pool_h;
    l["pool_w"] = c.pool_w;
    stack.push_back(l);
  }
  j["conv_stack"] = stack;
  j["proj_dim"] = proj_dim;
  j["lstm_hidden"] = lstm_hidden;
  j["attention_heads"] = attention_heads;
  j["dense_hidden"] = dense_hidden;
  j["n_classes"] = n_classes;
  j["dropout_rate"] = dropout_rate;
  j["init_seed"] = init_seed;
  return j.dump();
}

ModelConfig ModelConfig::from_json(const std::string& text) {
  ordered_json j;
  try {
    j = ordered_json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("model config: ") + e.what());
  }
  ModelConfig cfg;
  cfg.conv_stack.clear();
  for (const auto& l : j.at("conv_stack")) {
    ConvLayerSpec c;
    c.out_channels = l.at("out_channels").get<int>();
    c.kernel_h = l.at("kernel_h").get<int>();
    c.kernel_w = l.at("kernel_w").get<int>();
    c.stride = l.at("stride").get<int>();
    c.pool_h = l.at("pool_h").get<int>();
    c.pool_w = l.at("pool_w").get<int>();
    cfg.conv_stack.push_back(c);
  }
  cfg.proj_dim = j.at("proj_dim").get<int>();
  cfg.lstm_hidden = j.at("lstm_hidden").get<int>();
  cfg.attention_heads = j.at("attention_heads").get<int>();
  cfg.dense_hidden = j.at("dense_hidden").get<int>();
  cfg.n_classes = j.at("n_classes").get<int>();
  cfg.dropout_rate = j.at("dropout_rate").get<double>();
  cfg.init_seed = j.at("init_seed").get<std::uint64_t>();
  return cfg;
}

ModelConfig ModelConfig::small(int n_classes) {
  ModelConfig cfg;
  cfg.conv_stack = {{8, 3, 3, 1, 2, 2}, {16, 3, 3, 1, 2, 2}};
  cfg.proj_dim = 32;
  cfg.lstm_hidden = 16;
  cfg.attention_heads = 4;
  cfg.dense_hidden = 32;
  cfg.n_classes = n_classes;
  cfg.dropout_rate = 0.1;
  return cfg;
}

Network build_network(Architecture arch, FeatureKind kind, const ModelConfig& cfg,
                      int input_coeffs) {
  cfg.validate();
  if (input_coeffs < 1) throw ConfigError("build_network: input_coeffs must be positive");

  Network net;
  net.architecture = arch;
  net.feature_kind = kind;
  net.config = cfg;
  net.input_coeffs = input_coeffs;
  *net.dropout_rng_ = Rng(cfg.init_seed);

  net.layers.push_back(std::make_unique<InputNorm>(input_coeffs));

  int channels = 1;
  int width = input_coeffs;
  for (const auto& c : cfg.conv_stack) {
    net.layers.push_back(
        std::make_unique<Conv2d>(channels, c.out_channels, c.kernel_h, c.kernel_w, c.stride));
    net.layers.push_back(std::make_unique<Relu>());
    net.layers.push_back(std::make_unique<MaxPool2d>(c.pool_h, c.pool_w));
    channels = c.out_channels;
    // stride-1 same convolution keeps width; pooling floors it
    width = ((width + 2 * ((c.kernel_w - 1) / 2) - c.kernel_w) / c.stride + 1) / c.pool_w;
    if (width < 1)
      throw ConfigError("build_network: conv stack shrinks the coefficient axis to zero for " +
                        std::to_string(input_coeffs) + " input coefficients");
  }

  net.layers.push_back(std::make_unique<FlattenToSequence>());
  net.layers.push_back(std::make_unique<Dense>(channels * width, cfg.proj_dim));
  net.layers.push_back(std::make_unique<Relu>());
  net.layers.push_back(std::make_unique<Dropout>(cfg.dropout_rate, net.dropout_rng_.get()));

  if (arch == Architecture::Crnn || arch == Architecture::CrnnAttention)
    net.layers.push_back(std::make_unique<BiLstm>(cfg.proj_dim, cfg.lstm_hidden));
  if (arch == Architecture::CrnnAttention)
    net.layers.push_back(std::make_unique<MultiHeadAttention>(cfg.proj_dim, cfg.attention_heads));

  net.layers.push_back(std::make_unique<TemporalMeanPool>());
  net.layers.push_back(std::make_unique<Dropout>(cfg.dropout_rate, net.dropout_rng_.get()));
  net.layers.push_back(std::make_unique<Dense>(cfg.proj_dim, cfg.dense_hidden));
  net.layers.push_back(std::make_unique<Relu>());
  net.layers.push_back(std::make_unique<Dense>(cfg.dense_hidden, cfg.n_classes));

  auto params = net.parameters();
  init_parameters(params, cfg.init_seed);
  return net;
}

Tensor Network::forward(const Tensor& input) {
  Tensor x = input;
  for (auto& layer : layers) x = layer->forward(x);
  return x;
}

void Network::backward(const Tensor& grad_logits) {
  Tensor g = grad_logits;
  for (auto it = layers.rbegin(); it != layers.rend(); ++it) g = (*it)->backward(g);
}

std::vector<NamedParam> Network::parameters() {
  std::vector<NamedParam> out;
  int index = 0;
  for (auto& layer : layers) {
    layer->collect_parameters(std::string(layer->kind()) + std::to_string(index), out);
    ++index;
  }
  return out;
}

std::vector<NamedParam> Network::buffers() {
  std::vector<NamedParam> out;
  int index = 0;
  for (auto& layer : layers) {
    layer->collect_buffers(std::string(layer->kind()) + std::to_string(index), out);
    ++index;
  }
  return out;
}

void Network::set_train(bool train) {
  for (auto& layer : layers) layer->set_train(train);
}

void Network::zero_grad() {
  for (auto& p : parameters()) p.tensor->zero_grad();
}

std::vector<double> Network::snapshot_parameters() {
  // Buffers (normalization statistics) ride along so a restored snapshot is
  // a complete model state.
  std::vector<double> snap;
  for (auto& p : parameters())
    snap.insert(snap.end(), p.tensor->values.begin(), p.tensor->values.end());
  for (auto& b : buffers())
    snap.insert(snap.end(), b.tensor->values.begin(), b.tensor->values.end());
  return snap;
}

void Network::restore_parameters(const std::vector<double>& snapshot) {
  std::size_t pos = 0;
  const auto fill = [&](std::vector<NamedParam> blobs) {
    for (auto& p : blobs) {
      if (pos + p.tensor->size() > snapshot.size())
        throw ShapeError("restore_parameters: snapshot too small");
      std::copy(snapshot.begin() + static_cast<std::ptrdiff_t>(pos),
                snapshot.begin() + static_cast<std::ptrdiff_t>(pos + p.tensor->size()),
                p.tensor->values.begin());
      pos += p.tensor->size();
    }
  };
  fill(parameters());
  fill(buffers());
  if (pos != snapshot.size()) throw ShapeError("restore_parameters: snapshot size mismatch");
}

InputNorm* Network::input_norm() {
  if (layers.empty()) return nullptr;
  return dynamic_cast<InputNorm*>(layers.front().get());
}

long count_parameters(Network& net) {
  long total = 0;
  for (const auto& p : net.parameters()) total += static_cast<long>(p.tensor->size());
  return total;
}

Tensor feature_to_tensor(const FeatureMap& fm) {
  Tensor t = Tensor::zeros({1, fm.frames, fm.coeffs});
  std::copy(fm.values.begin(), fm.values.end(), t.values.begin());
  return t;
}

// --- Checkpoints ------------------------------------------------------------

namespace {

constexpr char kCheckpointMagic[4] = {'S', 'K', 'C', 'P'};
constexpr std::uint32_t kCheckpointVersion = 1;

template <typename T>
void write_raw(std::ofstream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_raw(std::ifstream& in, const char* what) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(T)))
    throw FormatError(std::string("checkpoint truncated reading ") + what);
  return v;
}

void write_blob_section(std::ofstream& out, const std::vector<NamedParam>& blobs) {
  write_raw(out, static_cast<std::uint32_t>(blobs.size()));
  for (const auto& b : blobs) {
    write_raw(out, static_cast<std::uint16_t>(b.name.size()));
    out.write(b.name.data(), static_cast<std::streamsize>(b.name.size()));
    write_raw(out, static_cast<std::uint32_t>(b.tensor->size()));
    for (const double v : b.tensor->values) write_raw(out, static_cast<float>(v));
  }
}

void read_blob_section(std::ifstream& in, std::vector<NamedParam>& blobs, const char* section) {
  const auto count = read_raw<std::uint32_t>(in, section);
  if (count != blobs.size())
    throw ConfigError("checkpoint mismatch: " + std::string(section) + " has " +
                      std::to_string(count) + " blobs, network expects " +
                      std::to_string(blobs.size()));
  for (auto& b : blobs) {
    const auto name_len = read_raw<std::uint16_t>(in, "blob name length");
    std::string name(name_len, '\0');
    if (!in.read(name.data(), name_len)) throw FormatError("checkpoint truncated reading name");
    if (name != b.name)
      throw ConfigError("checkpoint mismatch: blob '" + name + "' where '" + b.name +
                        "' was expected");
    const auto n = read_raw<std::uint32_t>(in, "blob size");
    if (n != b.tensor->size())
      throw ConfigError("checkpoint mismatch: blob '" + name + "' has " + std::to_string(n) +
                        " values, expected " + std::to_string(b.tensor->size()));
    for (auto& v : b.tensor->values) v = read_raw<float>(in, "blob data");
  }
}

}  // namespace

void save_checkpoint(Network& net, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path.string());

  out.write(kCheckpointMagic, 4);
  write_raw(out, kCheckpointVersion);
  write_raw(out, static_cast<std::uint8_t>(net.architecture));
  write_raw(out, static_cast<std::uint8_t>(net.feature_kind == FeatureKind::LMS ? 0 : 1));
  write_raw(out, static_cast<std::uint32_t>(net.input_coeffs));
  write_raw(out, static_cast<std::uint32_t>(net.trained_max_frames));
  const std::string cfg = net.config.to_json();
  write_raw(out, static_cast<std::uint32_t>(cfg.size()));
  out.write(cfg.data(), static_cast<std::streamsize>(cfg.size()));

  const auto params = net.parameters();
  const auto buffers = net.buffers();
  write_blob_section(out, params);
  write_blob_section(out, buffers);
  if (!out) throw IoError("write failed: " + path.string());
}

Network load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint: " + path.string());
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kCheckpointMagic, 4) != 0)
    throw FormatError("bad checkpoint magic: " + path.string());
  const auto version = read_raw<std::uint32_t>(in, "version");
  if (version != kCheckpointVersion)
    throw UnsupportedError("unsupported checkpoint version: " + std::to_string(version));

  const auto arch = static_cast<Architecture>(read_raw<std::uint8_t>(in, "architecture"));
  const auto kind = read_raw<std::uint8_t>(in, "feature kind") == 0 ? FeatureKind::LMS
                                                                    : FeatureKind::MFCC;
  const auto coeffs = static_cast<int>(read_raw<std::uint32_t>(in, "input coeffs"));
  const auto max_frames = static_cast<int>(read_raw<std::uint32_t>(in, "max frames"));
  const auto cfg_len = read_raw<std::uint32_t>(in, "config length");
  std::string cfg_text(cfg_len, '\0');
  if (!in.read(cfg_text.data(), cfg_len)) throw FormatError("checkpoint truncated reading config");

  Network net = build_network(arch, kind, ModelConfig::from_json(cfg_text), coeffs);
  net.trained_max_frames = max_frames;
  auto params = net.parameters();
  auto buffers = net.buffers();
  read_blob_section(in, params, "parameters");
  read_blob_section(in, buffers, "buffers");
  return net;
}

}  // namespace stresskit
