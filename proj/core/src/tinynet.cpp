#include "trapper/tinynet.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "trapper/rng.hpp"

namespace trapper {

namespace {

thread_local std::uint64_t t_forward_passes = 0;

int shape_numel(const std::vector<int>& s) {
  int n = 1;
  for (int d : s) {
    if (d <= 0) throw std::invalid_argument("tensor: non-positive dimension");
    n *= d;
  }
  return n;
}

int conv_out_len(int in_len, int kernel, int stride) {
  const int pad = (kernel - 1) / 2;
  return (in_len + 2 * pad - kernel) / stride + 1;
}

}  // namespace

std::uint64_t forward_pass_count() { return t_forward_passes; }

Tensor::Tensor(std::vector<int> s, std::vector<double> v)
    : shape(std::move(s)), values(std::move(v)) {
  if (shape_numel(shape) != static_cast<int>(values.size())) {
    throw std::invalid_argument("tensor: shape/value size mismatch");
  }
}

Tensor Tensor::zeros(std::vector<int> s) {
  const int n = shape_numel(s);
  return Tensor(std::move(s), std::vector<double>(static_cast<std::size_t>(n), 0.0));
}

int Tensor::numel() const { return static_cast<int>(values.size()); }

LayerSpec LayerSpec::dense(int in, int out, double scale) {
  LayerSpec s;
  s.kind = LayerKind::Dense;
  s.in_features = in;
  s.out_features = out;
  s.init_scale = scale;
  return s;
}

LayerSpec LayerSpec::conv1d(int in_ch, int out_ch, int kernel, int stride,
                            double scale) {
  LayerSpec s;
  s.kind = LayerKind::Conv1d;
  s.in_channels = in_ch;
  s.out_channels = out_ch;
  s.kernel = kernel;
  s.stride = stride;
  s.init_scale = scale;
  return s;
}

LayerSpec LayerSpec::relu() { return LayerSpec{}; }

LayerSpec LayerSpec::flatten() {
  LayerSpec s;
  s.kind = LayerKind::Flatten;
  return s;
}

Network::Network(std::vector<LayerSpec> specs, std::uint64_t seed)
    : specs_(std::move(specs)) {
  Rng rng(seed);
  for (const LayerSpec& spec : specs_) {
    Layer layer;
    layer.spec = spec;
    switch (spec.kind) {
      case LayerKind::Dense: {
        if (spec.in_features < 1 || spec.out_features < 1) {
          throw std::invalid_argument("dense layer: in/out must be >= 1");
        }
        const double scale =
            spec.init_scale > 0.0 ? spec.init_scale
                                  : 1.0 / std::sqrt(double(spec.in_features));
        layer.w.resize(std::size_t(spec.out_features) * std::size_t(spec.in_features));
        layer.b.assign(std::size_t(spec.out_features), 0.0);
        for (double& v : layer.w) v = rng.uniform(-scale, scale);
        break;
      }
      case LayerKind::Conv1d: {
        if (spec.kernel < 1 || spec.stride < 1 || spec.in_channels < 1 ||
            spec.out_channels < 1) {
          throw std::invalid_argument("conv1d layer: bad dimensions");
        }
        if (spec.kernel % 2 == 0) {
          throw std::invalid_argument("conv1d layer: kernel must be odd");
        }
        const int fan_in = spec.in_channels * spec.kernel;
        const double scale = spec.init_scale > 0.0
                                 ? spec.init_scale
                                 : 1.0 / std::sqrt(double(fan_in));
        layer.w.resize(std::size_t(spec.out_channels) * std::size_t(fan_in));
        layer.b.assign(std::size_t(spec.out_channels), 0.0);
        for (double& v : layer.w) v = rng.uniform(-scale, scale);
        break;
      }
      case LayerKind::ReLU:
      case LayerKind::Flatten:
        break;
    }
    layers_.push_back(std::move(layer));
  }
}

std::vector<int> Network::output_shape(const std::vector<int>& input_shape) const {
  std::vector<int> s = input_shape;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const LayerSpec& spec = layers_[i].spec;
    switch (spec.kind) {
      case LayerKind::Dense:
        if (s.size() != 1 || s[0] != spec.in_features) {
          std::ostringstream msg;
          msg << "layer " << i << " (dense): expected [" << spec.in_features
              << "], got rank " << s.size();
          throw std::invalid_argument(msg.str());
        }
        s = {spec.out_features};
        break;
      case LayerKind::Conv1d:
        if (s.size() != 2 || s[0] != spec.in_channels) {
          std::ostringstream msg;
          msg << "layer " << i << " (conv1d): expected [" << spec.in_channels
              << ", L]";
          throw std::invalid_argument(msg.str());
        }
        s = {spec.out_channels, conv_out_len(s[1], spec.kernel, spec.stride)};
        break;
      case LayerKind::ReLU:
        break;
      case LayerKind::Flatten:
        s = {shape_numel(s)};
        break;
    }
  }
  return s;
}

int Network::parameter_count() const {
  int n = 0;
  for (const Layer& l : layers_) {
    n += static_cast<int>(l.w.size() + l.b.size());
  }
  return n;
}

bool Network::operator==(const Network& o) const {
  if (layers_.size() != o.layers_.size()) return false;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    if (layers_[i].w != o.layers_[i].w || layers_[i].b != o.layers_[i].b) {
      return false;
    }
  }
  return true;
}

namespace {

void dense_forward(const std::vector<double>& w, const std::vector<double>& b,
                   const double* x, int in, int out, double* y) {
  for (int o = 0; o < out; ++o) {
    const double* row = w.data() + std::size_t(o) * std::size_t(in);
    double acc = b[std::size_t(o)];
    for (int i = 0; i < in; ++i) acc += row[i] * x[i];
    y[o] = acc;
  }
}

void conv1d_forward(const LayerSpec& s, const std::vector<double>& w,
                    const std::vector<double>& b, const double* x, int in_len,
                    int out_len, double* y) {
  const int pad = (s.kernel - 1) / 2;
  for (int oc = 0; oc < s.out_channels; ++oc) {
    const double* woc = w.data() + std::size_t(oc) * std::size_t(s.in_channels) *
                                       std::size_t(s.kernel);
    for (int t = 0; t < out_len; ++t) {
      double acc = b[std::size_t(oc)];
      const int origin = t * s.stride - pad;
      for (int ic = 0; ic < s.in_channels; ++ic) {
        const double* xc = x + std::size_t(ic) * std::size_t(in_len);
        const double* wk = woc + std::size_t(ic) * std::size_t(s.kernel);
        const int k_lo = std::max(0, -origin);
        const int k_hi = std::min(s.kernel, in_len - origin);
        for (int k = k_lo; k < k_hi; ++k) acc += wk[k] * xc[origin + k];
      }
      y[std::size_t(oc) * std::size_t(out_len) + std::size_t(t)] = acc;
    }
  }
}

}  // namespace

Tensor Network::forward_cached(const Tensor& input, ForwardCache& cache) const {
  ++t_forward_passes;
  cache.acts.clear();
  cache.acts.push_back(input);
  std::vector<int> shape = input.shape;
  for (const Layer& layer : layers_) {
    const Tensor& x = cache.acts.back();
    const LayerSpec& s = layer.spec;
    Tensor y;
    switch (s.kind) {
      case LayerKind::Dense: {
        if (x.shape.size() != 1 || x.shape[0] != s.in_features) {
          throw std::invalid_argument("forward: dense shape mismatch");
        }
        y = Tensor::zeros({s.out_features});
        dense_forward(layer.w, layer.b, x.values.data(), s.in_features,
                      s.out_features, y.values.data());
        break;
      }
      case LayerKind::Conv1d: {
        if (x.shape.size() != 2 || x.shape[0] != s.in_channels) {
          throw std::invalid_argument("forward: conv1d shape mismatch");
        }
        const int in_len = x.shape[1];
        const int out_len = conv_out_len(in_len, s.kernel, s.stride);
        y = Tensor::zeros({s.out_channels, out_len});
        conv1d_forward(s, layer.w, layer.b, x.values.data(), in_len, out_len,
                       y.values.data());
        break;
      }
      case LayerKind::ReLU: {
        y = x;
        for (double& v : y.values) v = v > 0.0 ? v : 0.0;
        break;
      }
      case LayerKind::Flatten: {
        y = Tensor({x.numel()}, x.values);
        break;
      }
    }
    cache.acts.push_back(std::move(y));
  }
  cache.valid = true;
  return cache.acts.back();
}

Tensor Network::forward(const Tensor& input) const {
  ForwardCache scratch;
  return forward_cached(input, scratch);
}

Gradients Network::zero_gradients() const {
  Gradients g;
  g.w.reserve(layers_.size());
  g.b.reserve(layers_.size());
  for (const Layer& l : layers_) {
    g.w.emplace_back(l.w.size(), 0.0);
    g.b.emplace_back(l.b.size(), 0.0);
  }
  return g;
}

void Network::accumulate(Gradients& into, const Gradients& g) const {
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    for (std::size_t j = 0; j < g.w[i].size(); ++j) into.w[i][j] += g.w[i][j];
    for (std::size_t j = 0; j < g.b[i].size(); ++j) into.b[i][j] += g.b[i][j];
  }
}

void Network::apply_sgd(const Gradients& g, double learning_rate, double scale) {
  const double step = learning_rate * scale;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    Layer& l = layers_[i];
    for (std::size_t j = 0; j < l.w.size(); ++j) l.w[j] -= step * g.w[i][j];
    for (std::size_t j = 0; j < l.b.size(); ++j) l.b[j] -= step * g.b[i][j];
  }
}

Gradients Network::backward(const ForwardCache& cache, const Tensor& loss_grad) const {
  if (!cache.valid || cache.acts.size() != layers_.size() + 1) {
    throw std::logic_error("backward: no cached forward pass");
  }
  if (!loss_grad.same_shape(cache.acts.back())) {
    throw std::invalid_argument("backward: loss gradient shape mismatch");
  }

  Gradients grads = zero_gradients();
  Tensor up = loss_grad;  // gradient flowing upstream (w.r.t. layer output)
  for (int li = static_cast<int>(layers_.size()) - 1; li >= 0; --li) {
    const Layer& layer = layers_[static_cast<std::size_t>(li)];
    const LayerSpec& s = layer.spec;
    const Tensor& x = cache.acts[static_cast<std::size_t>(li)];
    Tensor down;
    switch (s.kind) {
      case LayerKind::Dense: {
        auto& gw = grads.w[static_cast<std::size_t>(li)];
        auto& gb = grads.b[static_cast<std::size_t>(li)];
        down = Tensor::zeros(x.shape);
        for (int o = 0; o < s.out_features; ++o) {
          const double g = up.values[std::size_t(o)];
          gb[std::size_t(o)] += g;
          const std::size_t row = std::size_t(o) * std::size_t(s.in_features);
          for (int i = 0; i < s.in_features; ++i) {
            gw[row + std::size_t(i)] += g * x.values[std::size_t(i)];
            down.values[std::size_t(i)] += g * layer.w[row + std::size_t(i)];
          }
        }
        break;
      }
      case LayerKind::Conv1d: {
        auto& gw = grads.w[static_cast<std::size_t>(li)];
        auto& gb = grads.b[static_cast<std::size_t>(li)];
        const int in_len = x.shape[1];
        const int out_len = up.shape[1];
        const int pad = (s.kernel - 1) / 2;
        down = Tensor::zeros(x.shape);
        for (int oc = 0; oc < s.out_channels; ++oc) {
          const std::size_t w_oc = std::size_t(oc) * std::size_t(s.in_channels) *
                                   std::size_t(s.kernel);
          for (int t = 0; t < out_len; ++t) {
            const double g =
                up.values[std::size_t(oc) * std::size_t(out_len) + std::size_t(t)];
            gb[std::size_t(oc)] += g;
            const int origin = t * s.stride - pad;
            for (int ic = 0; ic < s.in_channels; ++ic) {
              const std::size_t w_base = w_oc + std::size_t(ic) * std::size_t(s.kernel);
              const std::size_t x_base = std::size_t(ic) * std::size_t(in_len);
              const int k_lo = std::max(0, -origin);
              const int k_hi = std::min(s.kernel, in_len - origin);
              for (int k = k_lo; k < k_hi; ++k) {
                const std::size_t xi = x_base + std::size_t(origin + k);
                gw[w_base + std::size_t(k)] += g * x.values[xi];
                down.values[xi] += g * layer.w[w_base + std::size_t(k)];
              }
            }
          }
        }
        break;
      }
      case LayerKind::ReLU: {
        down = up;
        for (std::size_t i = 0; i < down.values.size(); ++i) {
          if (x.values[i] <= 0.0) down.values[i] = 0.0;
        }
        break;
      }
      case LayerKind::Flatten: {
        down = Tensor(x.shape, up.values);
        break;
      }
    }
    up = std::move(down);
  }
  return grads;
}

std::vector<double> softmax(const std::vector<double>& logits) {
  const double mx = *std::max_element(logits.begin(), logits.end());
  std::vector<double> p(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(logits[i] - mx);
    sum += p[i];
  }
  for (double& v : p) v /= sum;
  return p;
}

LossResult softmax_cross_entropy(const Tensor& logits, int label) {
  if (logits.shape.size() != 1) {
    throw std::invalid_argument("softmax_cross_entropy: logits must be 1-D");
  }
  if (label < 0 || label >= logits.shape[0]) {
    throw std::invalid_argument("softmax_cross_entropy: label out of range");
  }
  const double mx = *std::max_element(logits.values.begin(), logits.values.end());
  double sum = 0.0;
  for (double v : logits.values) sum += std::exp(v - mx);
  const double log_z = mx + std::log(sum);

  LossResult r;
  r.loss = log_z - logits.values[std::size_t(label)];
  r.grad = Tensor::zeros(logits.shape);
  for (std::size_t i = 0; i < logits.values.size(); ++i) {
    r.grad.values[i] = std::exp(logits.values[i] - log_z);
  }
  r.grad.values[std::size_t(label)] -= 1.0;
  return r;
}

LossResult mean_squared_error(const Tensor& pred, const Tensor& target) {
  if (!pred.same_shape(target)) {
    throw std::invalid_argument("mean_squared_error: shape mismatch");
  }
  LossResult r;
  r.grad = Tensor::zeros(pred.shape);
  const double n = double(pred.numel());
  for (std::size_t i = 0; i < pred.values.size(); ++i) {
    const double d = pred.values[i] - target.values[i];
    r.loss += d * d;
    r.grad.values[i] = 2.0 * d / n;
  }
  r.loss /= n;
  return r;
}

TrainReport train(Network& net, const std::vector<TrainSample>& data,
                  const TrainConfig& cfg) {
  if (data.empty()) throw std::invalid_argument("train: empty dataset");
  if (cfg.learning_rate <= 0.0 && cfg.epochs > 0) {
    // learning_rate == 0 is allowed and leaves parameters untouched; negative
    // rates are rejected.
    if (cfg.learning_rate < 0.0) {
      throw std::invalid_argument("train: negative learning rate");
    }
  }

  auto sample_loss = [&](const TrainSample& s, ForwardCache& cache) {
    const Tensor out = net.forward_cached(s.input, cache);
    if (cfg.loss == LossKind::SoftmaxCrossEntropy) {
      return softmax_cross_entropy(out, s.label);
    }
    return mean_squared_error(out, s.target);
  };

  TrainReport report;
  Rng shuffle_rng(cfg.seed);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  {
    ForwardCache cache;
    double total = 0.0;
    for (const TrainSample& s : data) total += sample_loss(s, cache).loss;
    report.initial_loss = total / double(data.size());
  }

  const int batch = std::max(1, cfg.batch_size);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    // Fisher-Yates with the shared stream keeps epochs reproducible.
    for (std::size_t i = order.size(); i > 1; --i) {
      const std::size_t j = shuffle_rng.next_below(i);
      std::swap(order[i - 1], order[j]);
    }

    double epoch_total = 0.0;
    ForwardCache cache;
    for (std::size_t start = 0; start < order.size();
         start += std::size_t(batch)) {
      const std::size_t stop = std::min(order.size(), start + std::size_t(batch));
      Gradients acc = net.zero_gradients();
      for (std::size_t i = start; i < stop; ++i) {
        const TrainSample& s = data[order[i]];
        const LossResult lr = sample_loss(s, cache);
        if (!std::isfinite(lr.loss)) {
          std::ostringstream msg;
          msg << "train: loss became non-finite at epoch " << epoch
              << " (learning rate too high?)";
          throw std::runtime_error(msg.str());
        }
        epoch_total += lr.loss;
        net.accumulate(acc, net.backward(cache, lr.grad));
      }
      net.apply_sgd(acc, cfg.learning_rate, 1.0 / double(stop - start));
    }
    report.epoch_loss.push_back(epoch_total / double(data.size()));
  }

  {
    ForwardCache cache;
    double total = 0.0;
    for (const TrainSample& s : data) total += sample_loss(s, cache).loss;
    report.final_loss = total / double(data.size());
  }
  return report;
}

namespace {

void put_u32(std::ostream& out, std::uint32_t v) {
  unsigned char buf[4];
  for (int i = 0; i < 4; ++i) buf[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(buf), 4);
}

void put_u64(std::ostream& out, std::uint64_t v) {
  unsigned char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(buf), 8);
}

void put_f64(std::ostream& out, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  put_u64(out, bits);
}

std::uint32_t get_u32(std::istream& in) {
  unsigned char buf[4];
  in.read(reinterpret_cast<char*>(buf), 4);
  if (!in) throw std::runtime_error("network load: truncated stream");
  std::uint32_t v = 0;
  for (int i = 3; i >= 0; --i) v = (v << 8) | buf[i];
  return v;
}

std::uint64_t get_u64(std::istream& in) {
  unsigned char buf[8];
  in.read(reinterpret_cast<char*>(buf), 8);
  if (!in) throw std::runtime_error("network load: truncated stream");
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | buf[i];
  return v;
}

double get_f64(std::istream& in) {
  const std::uint64_t bits = get_u64(in);
  double v;
  std::memcpy(&v, &bits, 8);
  return v;
}

constexpr char kMagic[8] = {'T', 'N', 'E', 'T', 'v', '0', '0', '1'};

}  // namespace

void Network::save(std::ostream& out) const {
  out.write(kMagic, sizeof(kMagic));
  put_u32(out, static_cast<std::uint32_t>(layers_.size()));
  for (const Layer& l : layers_) {
    put_u32(out, static_cast<std::uint32_t>(l.spec.kind));
    put_u32(out, static_cast<std::uint32_t>(l.spec.in_features));
    put_u32(out, static_cast<std::uint32_t>(l.spec.out_features));
    put_u32(out, static_cast<std::uint32_t>(l.spec.in_channels));
    put_u32(out, static_cast<std::uint32_t>(l.spec.out_channels));
    put_u32(out, static_cast<std::uint32_t>(l.spec.kernel));
    put_u32(out, static_cast<std::uint32_t>(l.spec.stride));
    put_f64(out, l.spec.init_scale);
    put_u64(out, l.w.size());
    for (double v : l.w) put_f64(out, v);
    put_u64(out, l.b.size());
    for (double v : l.b) put_f64(out, v);
  }
  if (!out) throw std::runtime_error("network save: write failed");
}

Network Network::load(std::istream& in) {
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(magic)) != 0) {
    throw std::runtime_error("network load: bad magic");
  }
  Network net;
  const std::uint32_t n_layers = get_u32(in);
  for (std::uint32_t i = 0; i < n_layers; ++i) {
    Layer l;
    l.spec.kind = static_cast<LayerKind>(get_u32(in));
    l.spec.in_features = static_cast<int>(get_u32(in));
    l.spec.out_features = static_cast<int>(get_u32(in));
    l.spec.in_channels = static_cast<int>(get_u32(in));
    l.spec.out_channels = static_cast<int>(get_u32(in));
    l.spec.kernel = static_cast<int>(get_u32(in));
    l.spec.stride = static_cast<int>(get_u32(in));
    l.spec.init_scale = get_f64(in);
    l.w.resize(get_u64(in));
    for (double& v : l.w) v = get_f64(in);
    l.b.resize(get_u64(in));
    for (double& v : l.b) v = get_f64(in);
    net.specs_.push_back(l.spec);
    net.layers_.push_back(std::move(l));
  }
  return net;
}

}  // namespace trapper
