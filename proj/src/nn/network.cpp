#include "nab/nn/network.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "nab/container.hpp"
#include "nab/errors.hpp"

namespace nab::nn {

std::string to_string(Architecture arch) {
  switch (arch) {
    case Architecture::kSmallCnn: return "small-cnn";
    case Architecture::kResNet18: return "resnet-18";
    case Architecture::kResNet50: return "resnet-50";
  }
  return "unknown";
}

Architecture parse_architecture(const std::string& tag) {
  if (tag == "small-cnn") return Architecture::kSmallCnn;
  if (tag == "resnet-18") return Architecture::kResNet18;
  if (tag == "resnet-50") return Architecture::kResNet50;
  throw ArgumentError("unknown architecture '" + tag + "'");
}

namespace {

Sequential conv_bn(int in, int out, int k, int stride, Rng& rng, bool relu) {
  Sequential s;
  s.add<Conv2d>(in, out, k, stride, k / 2, false, rng);
  s.add<BatchNorm2d>(out);
  if (relu) s.add<ReLU>();
  return s;
}

std::unique_ptr<Layer> basic_block(int in, int out, int stride, Rng& rng) {
  Sequential main;
  main.add(std::make_unique<Sequential>(conv_bn(in, out, 3, stride, rng, true)));
  main.add(std::make_unique<Sequential>(conv_bn(out, out, 3, 1, rng, false)));
  Sequential shortcut;
  if (stride != 1 || in != out) shortcut = conv_bn(in, out, 1, stride, rng, false);
  return std::make_unique<Residual>(std::move(main), std::move(shortcut));
}

std::unique_ptr<Layer> bottleneck_block(int in, int planes, int stride, Rng& rng) {
  const int out = planes * 4;
  Sequential main;
  main.add(std::make_unique<Sequential>(conv_bn(in, planes, 1, 1, rng, true)));
  main.add(std::make_unique<Sequential>(conv_bn(planes, planes, 3, stride, rng, true)));
  main.add(std::make_unique<Sequential>(conv_bn(planes, out, 1, 1, rng, false)));
  Sequential shortcut;
  if (stride != 1 || in != out) shortcut = conv_bn(in, out, 1, stride, rng, false);
  return std::make_unique<Residual>(std::move(main), std::move(shortcut));
}

Sequential build_body(Architecture arch, ImageShape in, int width, Rng& rng, int& feature_dim) {
  Sequential body;
  switch (arch) {
    case Architecture::kSmallCnn: {
      if (in.height < 8 || in.width < 8) throw ArgumentError("small-cnn needs images of at least 8x8");
      int c = in.channels;
      for (int out : {16, 32, 64}) {
        body.add<Conv2d>(c, out, 3, 1, 1, false, rng);
        body.add<BatchNorm2d>(out);
        body.add<ReLU>();
        body.add<MaxPool2d>();
        c = out;
      }
      // Position-aware head: corner patterns (trigger, stamp) stay separable.
      body.add<Linear>(c * (in.height / 8) * (in.width / 8), 128, rng);
      body.add<BatchNorm2d>(128);
      body.add<ReLU>();
      feature_dim = 128;
      break;
    }
    case Architecture::kResNet18:
    case Architecture::kResNet50: {
      const int w = width > 0 ? width : 64;
      const bool deep = arch == Architecture::kResNet50;
      body.add(std::make_unique<Sequential>(conv_bn(in.channels, w, 3, 1, rng, true)));
      const int blocks18[] = {2, 2, 2, 2};
      const int blocks50[] = {3, 4, 6, 3};
      int c = w;
      for (int stage = 0; stage < 4; ++stage) {
        const int planes = w << stage;
        const int count = deep ? blocks50[stage] : blocks18[stage];
        for (int b = 0; b < count; ++b) {
          const int stride = (stage > 0 && b == 0) ? 2 : 1;
          if (deep) {
            body.add(bottleneck_block(c, planes, stride, rng));
            c = planes * 4;
          } else {
            body.add(basic_block(c, planes, stride, rng));
            c = planes;
          }
        }
      }
      body.add<GlobalAvgPool>();
      feature_dim = c;
      break;
    }
  }
  return body;
}

constexpr char kCheckpointMagic[8] = {'N', 'A', 'B', 'C', 'K', 'P', 'T', '1'};
constexpr std::uint32_t kCheckpointVersion = 1;

}  // namespace

Network::Network(Architecture arch, ImageShape input, int classes, std::uint64_t seed, int width)
    : Network(Init{}, arch, input, classes, width, Rng(derive_seed(seed, 0x6e6574776f726bULL))) {}

Network::Network(Init, Architecture arch, ImageShape input, int classes, int width, Rng rng)
    : arch_(arch),
      input_(input),
      classes_(classes > 0 ? classes : throw ArgumentError("network needs at least one class")),
      width_(width),
      body_(build_body(arch, input, width, rng, feature_dim_)),
      head_(feature_dim_, classes, rng) {}

Tensor Network::forward(const Tensor& x, Mode mode) { return head_.forward(body_.forward(x, mode), mode); }

Tensor Network::backward(const Tensor& grad_logits) { return body_.backward(head_.backward(grad_logits)); }

Tensor Network::forward_features(const Tensor& x, Mode mode) { return body_.forward(x, mode); }

Tensor Network::backward_features(const Tensor& grad_features) { return body_.backward(grad_features); }

Tensor Network::logits(const Tensor& x) const { return head_.infer(body_.infer(x)); }

Tensor Network::features(const Tensor& x) const { return body_.infer(x); }

std::vector<Parameter*> Network::parameters() {
  std::vector<Parameter*> out;
  body_.collect_parameters(out);
  head_.collect_parameters(out);
  return out;
}

std::vector<FloatBuffer*> Network::buffers() {
  std::vector<FloatBuffer*> out;
  body_.collect_buffers(out);
  return out;
}

void Network::zero_grad() {
  for (auto* p : parameters()) std::fill(p->grad.begin(), p->grad.end(), 0.0f);
}

std::size_t Network::parameter_count() {
  std::size_t n = 0;
  for (auto* p : parameters()) n += p->value.size();
  return n;
}

std::vector<int> Network::predict(std::span<const ImageTensor> images) const {
  std::vector<int> out;
  out.reserve(images.size());
  for (std::size_t start = 0; start < images.size(); start += kInferenceBatch) {
    const auto count = std::min(kInferenceBatch, images.size() - start);
    const Tensor lg = logits(to_batch(images.subspan(start, count)));
    for (int i = 0; i < lg.n; ++i) {
      const float* row = lg.data.data() + static_cast<std::size_t>(i) * lg.c;
      out.push_back(static_cast<int>(std::max_element(row, row + lg.c) - row));
    }
  }
  return out;
}

double Network::loss_and_input_gradient(const ImageTensor& image, int label, ImageTensor& gradient) {
  const Tensor x = to_batch(std::span(&image, 1));
  const Tensor lg = forward(x, Mode::kEvalGrad);
  std::vector<double> probs;
  const int labels[] = {label};
  const double loss = cross_entropy(lg, labels, &probs).front();
  Tensor g(1, classes_, 1, 1);
  for (int k = 0; k < classes_; ++k) g.data[k] = static_cast<float>(probs[k] - (k == label ? 1.0 : 0.0));
  const Tensor dx = backward(g);
  zero_grad();
  gradient = sample_to_image(dx, 0);
  return loss;
}

std::vector<double> softmax(const Tensor& logits) {
  const int k = static_cast<int>(logits.sample_size());
  std::vector<double> out(logits.size());
  for (int i = 0; i < logits.n; ++i) {
    const float* row = logits.sample(i);
    const double mx = *std::max_element(row, row + k);
    double sum = 0.0;
    for (int j = 0; j < k; ++j) {
      out[static_cast<std::size_t>(i) * k + j] = std::exp(row[j] - mx);
      sum += out[static_cast<std::size_t>(i) * k + j];
    }
    for (int j = 0; j < k; ++j) out[static_cast<std::size_t>(i) * k + j] /= sum;
  }
  return out;
}

std::vector<double> cross_entropy(const Tensor& logits, std::span<const int> labels,
                                  std::vector<double>* probabilities) {
  const int k = static_cast<int>(logits.sample_size());
  if (static_cast<int>(labels.size()) != logits.n) throw ArgumentError("cross_entropy: label count mismatch");
  std::vector<double> losses(labels.size());
  for (int i = 0; i < logits.n; ++i) {
    const float* row = logits.sample(i);
    const double mx = *std::max_element(row, row + k);
    double sum = 0.0;
    for (int j = 0; j < k; ++j) sum += std::exp(row[j] - mx);
    losses[i] = std::log(sum) + mx - row[labels[i]];
  }
  if (probabilities != nullptr) *probabilities = softmax(logits);
  return losses;
}

void Network::save(const std::filesystem::path& path, const std::string& config_hash) {
  ByteWriter w;
  w.raw(kCheckpointMagic, sizeof kCheckpointMagic);
  w.u32(kCheckpointVersion);
  w.str(to_string(arch_));
  w.u32(static_cast<std::uint32_t>(input_.height));
  w.u32(static_cast<std::uint32_t>(input_.width));
  w.u32(static_cast<std::uint32_t>(input_.channels));
  w.u32(static_cast<std::uint32_t>(classes_));
  w.u32(static_cast<std::uint32_t>(width_));
  w.str(config_hash);
  w.u8(trained_ ? 1 : 0);
  const auto params = parameters();
  w.u64(params.size());
  for (auto* p : params) {
    w.u64(p->value.size());
    for (float v : p->value) w.f32(v);
  }
  const auto bufs = buffers();
  w.u64(bufs.size());
  for (auto* b : bufs) {
    w.u64(b->size());
    for (float v : *b) w.f32(v);
  }
  const auto sum = fnv1a64(w.bytes().data(), w.bytes().size());
  w.u64(sum);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(w.bytes().data()), static_cast<std::streamsize>(w.bytes().size()));
}

Network Network::load(const std::filesystem::path& path, std::string* config_hash) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), {});
  if (bytes.size() < 20) throw FormatError("checkpoint too short");
  ByteReader r(bytes.data(), bytes.size() - 8);
  char magic[8];
  r.raw(magic, sizeof magic);
  if (std::string_view(magic, 8) != std::string_view(kCheckpointMagic, 8)) throw FormatError("not a checkpoint");
  if (const auto v = r.u32(); v != kCheckpointVersion) {
    throw FormatError("unsupported checkpoint version " + std::to_string(v));
  }
  ByteReader tail(bytes.data() + bytes.size() - 8, 8);
  if (tail.u64() != fnv1a64(bytes.data(), bytes.size() - 8)) throw FormatError("checkpoint checksum mismatch");
  const auto arch = parse_architecture(r.str());
  ImageShape shape{static_cast<int>(r.u32()), static_cast<int>(r.u32()), static_cast<int>(r.u32())};
  const int classes = static_cast<int>(r.u32());
  const int width = static_cast<int>(r.u32());
  std::string hash = r.str();
  if (config_hash != nullptr) *config_hash = hash;
  Network net(arch, shape, classes, 0, width);
  net.trained_ = r.u8() != 0;
  auto params = net.parameters();
  if (r.u64() != params.size()) throw FormatError("checkpoint parameter count mismatch");
  for (auto* p : params) {
    if (r.u64() != p->value.size()) throw FormatError("checkpoint tensor size mismatch");
    for (auto& v : p->value) v = r.f32();
  }
  auto bufs = net.buffers();
  if (r.u64() != bufs.size()) throw FormatError("checkpoint buffer count mismatch");
  for (auto* b : bufs) {
    if (r.u64() != b->size()) throw FormatError("checkpoint buffer size mismatch");
    for (auto& v : *b) v = r.f32();
  }
  return net;
}

}  // namespace nab::nn
