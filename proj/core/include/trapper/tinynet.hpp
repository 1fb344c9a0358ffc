#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

namespace trapper {

struct Tensor {
  std::vector<int> shape;
  std::vector<double> values;  // row-major

  Tensor() = default;
  Tensor(std::vector<int> s, std::vector<double> v);
  static Tensor zeros(std::vector<int> s);

  int numel() const;
  bool same_shape(const Tensor& o) const { return shape == o.shape; }
};

enum class LayerKind : std::uint32_t { Dense = 0, Conv1d = 1, ReLU = 2, Flatten = 3 };

struct LayerSpec {
  LayerKind kind = LayerKind::ReLU;
  int in_features = 0;   // Dense
  int out_features = 0;  // Dense
  int in_channels = 0;   // Conv1d
  int out_channels = 0;  // Conv1d
  int kernel = 0;        // Conv1d; odd, zero padding (kernel-1)/2
  int stride = 1;        // Conv1d
  double init_scale = 0.0;  // 0 selects 1/sqrt(fan_in)

  static LayerSpec dense(int in, int out, double scale = 0.0);
  static LayerSpec conv1d(int in_ch, int out_ch, int kernel, int stride = 1,
                          double scale = 0.0);
  static LayerSpec relu();
  static LayerSpec flatten();
};

enum class LossKind : std::uint32_t { SoftmaxCrossEntropy = 0, MeanSquaredError = 1 };

struct TrainConfig {
  double learning_rate = 0.01;
  int epochs = 10;
  int batch_size = 32;
  std::uint64_t seed = 1;
  LossKind loss = LossKind::MeanSquaredError;
};

// Parameter gradients, one entry per layer (empty for parameterless layers).
struct Gradients {
  std::vector<std::vector<double>> w;
  std::vector<std::vector<double>> b;
};

// Activations captured by a training forward pass; backward consumes them.
struct ForwardCache {
  std::vector<Tensor> acts;  // acts[0] == input, acts[n] == output
  bool valid = false;
};

class Network {
 public:
  Network() = default;
  // Builds the layer stack and initializes weights uniform in
  // [-scale, scale] with scale = init_scale or 1/sqrt(fan_in), seeded.
  Network(std::vector<LayerSpec> specs, std::uint64_t seed);

  // Pure inference; thread-safe for concurrent readers.
  Tensor forward(const Tensor& input) const;

  Tensor forward_cached(const Tensor& input, ForwardCache& cache) const;
  // Exact reverse-mode gradients for every weight and bias. Throws if the
  // cache was not produced by forward_cached on this network.
  Gradients backward(const ForwardCache& cache, const Tensor& loss_grad) const;

  Gradients zero_gradients() const;
  void accumulate(Gradients& into, const Gradients& g) const;
  void apply_sgd(const Gradients& g, double learning_rate, double scale);

  const std::vector<LayerSpec>& specs() const { return specs_; }
  std::vector<int> output_shape(const std::vector<int>& input_shape) const;
  int parameter_count() const;

  bool operator==(const Network& o) const;

  void save(std::ostream& out) const;
  static Network load(std::istream& in);

 private:
  struct Layer {
    LayerSpec spec;
    std::vector<double> w;
    std::vector<double> b;
  };
  std::vector<Layer> layers_;
  std::vector<LayerSpec> specs_;

  friend struct NetworkTestPeek;
};

// Thread-local count of Network::forward* invocations. The re-planner and
// the single-shot forecast contract are audited against this.
std::uint64_t forward_pass_count();

struct LossResult {
  double loss = 0.0;
  Tensor grad;  // d loss / d prediction
};

// loss = -log softmax(logits)[label]; grad = softmax - one_hot. Stabilized
// with log-sum-exp.
LossResult softmax_cross_entropy(const Tensor& logits, int label);
std::vector<double> softmax(const std::vector<double>& logits);

// Mean over elements of squared error.
LossResult mean_squared_error(const Tensor& pred, const Tensor& target);

struct TrainSample {
  Tensor input;
  Tensor target;  // MSE
  int label = -1;  // cross-entropy
};

struct TrainReport {
  std::vector<double> epoch_loss;  // mean per-sample loss per epoch
  double initial_loss = 0.0;
  double final_loss = 0.0;
};

// Mini-batch SGD with seeded shuffling; deterministic given the seed.
// Aborts with a diagnostic if the loss goes non-finite.
TrainReport train(Network& net, const std::vector<TrainSample>& data,
                  const TrainConfig& cfg);

}  // namespace trapper
