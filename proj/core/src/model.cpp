#include "geoprior/model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "geoprior/error.hpp"
#include "geoprior/rng.hpp"

namespace geoprior {

namespace {

// out = in W^T + b
Matrix dense_forward(const DenseLayer& layer, const Matrix& in) {
  Matrix out(in.rows(), layer.out);
  for (std::size_t r = 0; r < in.rows(); ++r) {
    const auto x = in.row(r);
    auto y = out.row(r);
    for (std::size_t o = 0; o < layer.out; ++o) {
      double sum = layer.bias[o];
      const double* w = layer.weight.data() + o * layer.in;
      for (std::size_t i = 0; i < layer.in; ++i) sum += w[i] * x[i];
      y[o] = sum;
    }
  }
  return out;
}

// Accumulates dW = d_out^T in, db = colsum(d_out); returns d_in = d_out W.
Matrix dense_backward(const DenseLayer& layer, const Matrix& in, const Matrix& d_out, DenseLayer& grad,
                      bool need_input_grad) {
  for (std::size_t r = 0; r < in.rows(); ++r) {
    const auto x = in.row(r);
    const auto g = d_out.row(r);
    for (std::size_t o = 0; o < layer.out; ++o) {
      const double go = g[o];
      if (go == 0.0) continue;
      grad.bias[o] += go;
      double* gw = grad.weight.data() + o * layer.in;
      for (std::size_t i = 0; i < layer.in; ++i) gw[i] += go * x[i];
    }
  }
  if (!need_input_grad) return {};
  Matrix d_in(in.rows(), layer.in);
  for (std::size_t r = 0; r < in.rows(); ++r) {
    const auto g = d_out.row(r);
    auto d = d_in.row(r);
    for (std::size_t o = 0; o < layer.out; ++o) {
      const double go = g[o];
      if (go == 0.0) continue;
      const double* w = layer.weight.data() + o * layer.in;
      for (std::size_t i = 0; i < layer.in; ++i) d[i] += go * w[i];
    }
  }
  return d_in;
}

void relu_inplace(Matrix& m) {
  for (double& v : m.data()) v = v > 0.0 ? v : 0.0;
}

DenseLayer zeros_like(const DenseLayer& layer) { return DenseLayer(layer.in, layer.out); }

void check_labels(std::span<const int> labels, std::size_t rows, std::size_t classes) {
  if (labels.size() != rows) {
    throw Error(ErrorCode::ShapeMismatch, "batch has " + std::to_string(rows) + " rows but " +
                                              std::to_string(labels.size()) + " labels");
  }
  for (int y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= classes) {
      throw Error(ErrorCode::ShapeMismatch, "label " + std::to_string(y) + " outside [0, " + std::to_string(classes) + ")");
    }
  }
}

// Mean cross-entropy and its gradient w.r.t. the logits.
double cross_entropy(const Matrix& logits, std::span<const int> labels, Matrix* d_logits) {
  const std::size_t n = logits.rows();
  const std::size_t c = logits.cols();
  double total = 0.0;
  if (d_logits) *d_logits = Matrix(n, c);
  for (std::size_t r = 0; r < n; ++r) {
    const auto z = logits.row(r);
    const double mx = *std::max_element(z.begin(), z.end());
    double sum = 0.0;
    for (double v : z) sum += std::exp(v - mx);
    const double log_sum = mx + std::log(sum);
    total += log_sum - z[labels[r]];
    if (d_logits) {
      auto d = d_logits->row(r);
      for (std::size_t k = 0; k < c; ++k) d[k] = std::exp(z[k] - log_sum) / static_cast<double>(n);
      d[labels[r]] -= 1.0 / static_cast<double>(n);
    }
  }
  return total / static_cast<double>(n);
}

void check_loss(double loss, const Matrix& logits) {
  if (std::isfinite(loss)) return;
  double max_abs = 0.0;
  for (double v : logits.data()) max_abs = std::max(max_abs, std::abs(v));
  std::ostringstream msg;
  msg << "loss is " << loss << " on a batch of " << logits.rows() << " rows (max |logit| = " << max_abs << ")";
  throw Error(ErrorCode::NonFiniteLoss, msg.str());
}

template <typename T>
void put_le(std::string& out, T value) {
  auto u = static_cast<std::make_unsigned_t<T>>(value);
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    out.push_back(static_cast<char>(u & 0xFF));
    u = static_cast<std::make_unsigned_t<T>>(u >> 8);
  }
}

template <typename T>
T get_le(std::string_view bytes, std::size_t& pos) {
  if (bytes.size() - pos < sizeof(T)) {
    throw Error(ErrorCode::ParseError, "checkpoint truncated at byte offset " + std::to_string(pos));
  }
  std::make_unsigned_t<T> u = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    u |= static_cast<std::make_unsigned_t<T>>(static_cast<unsigned char>(bytes[pos + i])) << (8 * i);
  }
  pos += sizeof(T);
  return static_cast<T>(u);
}

}  // namespace

struct Model::Trace {
  std::vector<Matrix> inputs;       // input to each feature layer
  std::vector<Matrix> activations;  // output of each feature layer (after ReLU where applied)
  Matrix logits;
};

Model::Model(const ModelConfig& config) {
  if (config.input_dim == 0 || config.embedding_dim == 0 || config.num_classes < 2) {
    throw Error(ErrorCode::InvalidConfig, "model needs input_dim, embedding_dim >= 1 and num_classes >= 2");
  }
  Rng rng(config.seed);
  auto init = [&rng](std::size_t in, std::size_t out) {
    DenseLayer layer(in, out);
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    for (double& w : layer.weight) w = (2.0 * rng.uniform() - 1.0) * bound;
    for (double& b : layer.bias) b = (2.0 * rng.uniform() - 1.0) * bound;
    return layer;
  };
  std::size_t prev = config.input_dim;
  for (std::size_t h : config.hidden) {
    if (h == 0) throw Error(ErrorCode::InvalidConfig, "hidden layer width must be >= 1");
    feature_.push_back(init(prev, h));
    prev = h;
  }
  feature_.push_back(init(prev, config.embedding_dim));
  classifier_ = init(config.embedding_dim, config.num_classes);
}

Model::Model(std::vector<DenseLayer> feature_layers, DenseLayer classifier)
    : feature_(std::move(feature_layers)), classifier_(std::move(classifier)) {
  if (feature_.empty()) throw Error(ErrorCode::InvalidConfig, "model needs at least one feature layer");
  for (std::size_t l = 0; l < feature_.size(); ++l) {
    const auto& layer = feature_[l];
    if (layer.weight.size() != layer.in * layer.out || layer.bias.size() != layer.out) {
      throw Error(ErrorCode::ShapeMismatch, "feature layer " + std::to_string(l) + " has inconsistent sizes");
    }
    if (l > 0 && feature_[l - 1].out != layer.in) {
      throw Error(ErrorCode::ShapeMismatch, "feature layer " + std::to_string(l) + " input does not match previous output");
    }
  }
  if (classifier_.in != feature_.back().out || classifier_.weight.size() != classifier_.in * classifier_.out ||
      classifier_.bias.size() != classifier_.out) {
    throw Error(ErrorCode::ShapeMismatch, "classifier does not match the embedding layer");
  }
}

std::size_t Model::input_dim() const { return feature_.empty() ? 0 : feature_.front().in; }
std::size_t Model::embedding_dim() const { return feature_.empty() ? 0 : feature_.back().out; }

Model::Trace Model::run(const Matrix& x) const {
  if (x.cols() != input_dim()) {
    throw Error(ErrorCode::ShapeMismatch, "input has " + std::to_string(x.cols()) + " columns, model expects " +
                                              std::to_string(input_dim()));
  }
  Trace trace;
  Matrix current = x;
  for (std::size_t l = 0; l < feature_.size(); ++l) {
    trace.inputs.push_back(current);
    Matrix out = dense_forward(feature_[l], current);
    if (l + 1 < feature_.size()) relu_inplace(out);
    trace.activations.push_back(out);
    current = std::move(out);
  }
  trace.logits = dense_forward(classifier_, current);
  return trace;
}

Matrix Model::embed(const Matrix& x) const { return run(x).activations.back(); }

Matrix Model::logits(const Matrix& z) const {
  if (z.cols() != embedding_dim()) {
    throw Error(ErrorCode::ShapeMismatch, "features have " + std::to_string(z.cols()) + " columns, classifier expects " +
                                              std::to_string(embedding_dim()));
  }
  return dense_forward(classifier_, z);
}

ForwardResult Model::forward(const Matrix& x) const {
  Trace trace = run(x);
  ForwardResult out;
  out.features = std::move(trace.activations.back());
  out.scores = softmax_rows(trace.logits);
  out.logits = std::move(trace.logits);
  return out;
}

std::vector<int> Model::predict(const Matrix& x) const {
  const Matrix l = run(x).logits;
  std::vector<int> out(l.rows());
  for (std::size_t r = 0; r < l.rows(); ++r) {
    const auto row = l.row(r);
    out[r] = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
  }
  return out;
}

double Model::loss(const Matrix& x, std::span<const int> labels) const {
  check_labels(labels, x.rows(), num_classes());
  return cross_entropy(run(x).logits, labels, nullptr);
}

LossAndGradient Model::loss_and_gradient(const Matrix& x, std::span<const int> labels) const {
  check_labels(labels, x.rows(), num_classes());
  if (x.rows() == 0) throw Error(ErrorCode::EmptyInput, "empty batch");
  const Trace trace = run(x);
  Matrix d_logits;
  LossAndGradient out;
  out.loss = cross_entropy(trace.logits, labels, &d_logits);

  out.grad.classifier = zeros_like(classifier_);
  Matrix d = dense_backward(classifier_, trace.activations.back(), d_logits, out.grad.classifier, true);

  out.grad.feature.resize(feature_.size());
  for (std::size_t l = feature_.size(); l-- > 0;) {
    out.grad.feature[l] = zeros_like(feature_[l]);
    if (l + 1 < feature_.size()) {
      // ReLU layer: gate by the activation.
      const auto act = trace.activations[l].data();
      auto dd = d.data();
      for (std::size_t i = 0; i < dd.size(); ++i)
        if (act[i] <= 0.0) dd[i] = 0.0;
    }
    d = dense_backward(feature_[l], trace.inputs[l], d, out.grad.feature[l], l > 0);
  }
  return out;
}

void Model::ensure_velocity() {
  if (feature_velocity_.size() != feature_.size()) {
    feature_velocity_.clear();
    for (const auto& layer : feature_) feature_velocity_.push_back(zeros_like(layer));
  }
  if (classifier_velocity_.weight.size() != classifier_.weight.size()) classifier_velocity_ = zeros_like(classifier_);
}

void Model::reset_optimizer() {
  feature_velocity_.clear();
  classifier_velocity_ = DenseLayer();
}

void Model::apply_update(DenseLayer& layer, DenseLayer& velocity, const DenseLayer& grad, double lr) {
  for (std::size_t i = 0; i < layer.weight.size(); ++i) {
    velocity.weight[i] = momentum_ * velocity.weight[i] + grad.weight[i];
    layer.weight[i] -= lr * velocity.weight[i];
  }
  for (std::size_t i = 0; i < layer.bias.size(); ++i) {
    velocity.bias[i] = momentum_ * velocity.bias[i] + grad.bias[i];
    layer.bias[i] -= lr * velocity.bias[i];
  }
}

double Model::train_step(const Matrix& x, std::span<const int> labels, double lr, FrozenGroups frozen) {
  if (!(lr > 0.0)) throw Error(ErrorCode::InvalidArgument, "learning rate must be > 0");
  if (frozen.feature && frozen.classifier) {
    const Matrix l = run(x).logits;
    check_labels(labels, x.rows(), num_classes());
    const double value = cross_entropy(l, labels, nullptr);
    check_loss(value, l);
    return value;
  }
  LossAndGradient lg = loss_and_gradient(x, labels);
  if (!std::isfinite(lg.loss)) check_loss(lg.loss, run(x).logits);
  ensure_velocity();
  if (!frozen.feature) {
    for (std::size_t l = 0; l < feature_.size(); ++l) apply_update(feature_[l], feature_velocity_[l], lg.grad.feature[l], lr);
  }
  if (!frozen.classifier) apply_update(classifier_, classifier_velocity_, lg.grad.classifier, lr);
  return lg.loss;
}

double Model::train_classifier_step(const Matrix& z, std::span<const int> labels, double lr) {
  if (!(lr > 0.0)) throw Error(ErrorCode::InvalidArgument, "learning rate must be > 0");
  check_labels(labels, z.rows(), num_classes());
  if (z.rows() == 0) throw Error(ErrorCode::EmptyInput, "empty batch");
  const Matrix l = logits(z);
  Matrix d_logits;
  const double value = cross_entropy(l, labels, &d_logits);
  check_loss(value, l);
  DenseLayer grad = zeros_like(classifier_);
  dense_backward(classifier_, z, d_logits, grad, false);
  ensure_velocity();
  apply_update(classifier_, classifier_velocity_, grad, lr);
  return value;
}

std::vector<double> Model::parameters(ParamGroup group) const {
  std::vector<double> out;
  auto append = [&out](const DenseLayer& layer) {
    out.insert(out.end(), layer.weight.begin(), layer.weight.end());
    out.insert(out.end(), layer.bias.begin(), layer.bias.end());
  };
  if (group == ParamGroup::feature) {
    for (const auto& layer : feature_) append(layer);
  } else {
    append(classifier_);
  }
  return out;
}

void Model::set_parameters(ParamGroup group, std::span<const double> values) {
  std::size_t pos = 0;
  auto assign = [&](DenseLayer& layer) {
    const std::size_t need = layer.weight.size() + layer.bias.size();
    if (values.size() - pos < need) throw Error(ErrorCode::ShapeMismatch, "set_parameters: too few values");
    std::copy_n(values.begin() + static_cast<std::ptrdiff_t>(pos), layer.weight.size(), layer.weight.begin());
    pos += layer.weight.size();
    std::copy_n(values.begin() + static_cast<std::ptrdiff_t>(pos), layer.bias.size(), layer.bias.begin());
    pos += layer.bias.size();
  };
  if (group == ParamGroup::feature) {
    for (auto& layer : feature_) assign(layer);
  } else {
    assign(classifier_);
  }
  if (pos != values.size()) throw Error(ErrorCode::ShapeMismatch, "set_parameters: too many values");
}

std::string Model::serialize() const {
  std::string out("GPMD");
  put_le<std::uint32_t>(out, 1);
  const std::size_t count = feature_.size() + 1;
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(count));
  auto layer_at = [&](std::size_t i) -> const DenseLayer& { return i < feature_.size() ? feature_[i] : classifier_; };
  for (std::size_t i = 0; i < count; ++i) {
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(layer_at(i).in));
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(layer_at(i).out));
  }
  for (std::size_t i = 0; i < count; ++i) {
    for (double w : layer_at(i).weight) put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(w));
    for (double b : layer_at(i).bias) put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(b));
  }
  return out;
}

Model Model::deserialize(std::string_view bytes) {
  if (bytes.substr(0, 4) != "GPMD") throw Error(ErrorCode::ParseError, "checkpoint: bad magic, expected GPMD");
  std::size_t pos = 4;
  const auto version = get_le<std::uint32_t>(bytes, pos);
  if (version != 1) throw Error(ErrorCode::ParseError, "checkpoint: unsupported version " + std::to_string(version));
  const auto count = get_le<std::uint32_t>(bytes, pos);
  if (count < 2) throw Error(ErrorCode::ParseError, "checkpoint: need at least two layers");
  std::vector<DenseLayer> layers;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto in = get_le<std::uint32_t>(bytes, pos);
    const auto out = get_le<std::uint32_t>(bytes, pos);
    layers.emplace_back(in, out);
  }
  for (auto& layer : layers) {
    for (double& w : layer.weight) w = std::bit_cast<double>(get_le<std::uint64_t>(bytes, pos));
    for (double& b : layer.bias) b = std::bit_cast<double>(get_le<std::uint64_t>(bytes, pos));
  }
  if (pos != bytes.size()) throw Error(ErrorCode::ParseError, "checkpoint: trailing bytes at offset " + std::to_string(pos));
  DenseLayer classifier = std::move(layers.back());
  layers.pop_back();
  return Model(std::move(layers), std::move(classifier));
}

void Model::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot open '" + path.string() + "' for writing");
  const std::string bytes = serialize();
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::IoError, "write failed for '" + path.string() + "'");
}

Model Model::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open '" + path.string() + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return deserialize(ss.str());
}

Matrix softmax_rows(const Matrix& logits) {
  Matrix out(logits.rows(), logits.cols());
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    const auto z = logits.row(r);
    auto p = out.row(r);
    const double mx = *std::max_element(z.begin(), z.end());
    double sum = 0.0;
    for (std::size_t k = 0; k < z.size(); ++k) {
      p[k] = std::exp(z[k] - mx);
      sum += p[k];
    }
    for (double& v : p) v /= sum;
  }
  return out;
}

void TrainConfig::validate() const {
  for (const auto* phase : {&phase1, &phase2, &phase3}) {
    if (!(phase->lr > 0.0)) throw Error(ErrorCode::InvalidConfig, "learning rates must be > 0");
  }
  if (!(momentum >= 0.0 && momentum < 1.0)) throw Error(ErrorCode::InvalidConfig, "momentum must be in [0, 1)");
  if (batch_size == 0) throw Error(ErrorCode::InvalidConfig, "batch_size must be >= 1");
}

double scheduled_lr(double base, LrDecay decay, std::size_t step, std::size_t total_steps) {
  if (total_steps == 0) return base;
  const double t = static_cast<double>(step) / static_cast<double>(total_steps);
  switch (decay) {
    case LrDecay::cosine: return base * 0.5 * (1.0 + std::cos(std::numbers::pi * t));
    case LrDecay::linear: return base * (1.0 - t);
    case LrDecay::none: return base;
  }
  return base;
}

std::vector<ClassGroup> assign_groups(std::span<const std::size_t> train_counts, const GroupThresholds& thresholds) {
  std::vector<ClassGroup> groups;
  groups.reserve(train_counts.size());
  const double head = thresholds.head_above * thresholds.factor;
  const double tail = thresholds.tail_below * thresholds.factor;
  for (std::size_t n : train_counts) {
    const double v = static_cast<double>(n);
    groups.push_back(v > head ? ClassGroup::head : (v < tail ? ClassGroup::tail : ClassGroup::middle));
  }
  return groups;
}

AccuracyReport accuracy_report(std::span<const int> predictions, std::span<const int> labels,
                               std::span<const ClassGroup> groups) {
  if (predictions.size() != labels.size()) {
    throw Error(ErrorCode::ShapeMismatch, "accuracy_report: predictions and labels differ in length");
  }
  if (labels.empty()) throw Error(ErrorCode::EmptyInput, "accuracy_report: empty evaluation set");
  const std::size_t classes = groups.size();
  std::vector<std::size_t> hit(classes, 0);
  std::vector<std::size_t> seen(classes, 0);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int y = labels[i];
    if (y < 0 || static_cast<std::size_t>(y) >= classes) {
      throw Error(ErrorCode::ShapeMismatch, "label " + std::to_string(y) + " has no group assignment");
    }
    ++seen[y];
    if (predictions[i] == y) {
      ++hit[y];
      ++correct;
    }
  }
  AccuracyReport report;
  report.samples = labels.size();
  report.overall = static_cast<double>(correct) / static_cast<double>(labels.size());
  report.per_class_recall.resize(classes);
  std::size_t group_hit[3] = {0, 0, 0};
  std::size_t group_seen[3] = {0, 0, 0};
  for (std::size_t c = 0; c < classes; ++c) {
    if (seen[c] > 0) report.per_class_recall[c] = static_cast<double>(hit[c]) / static_cast<double>(seen[c]);
    const auto g = static_cast<std::size_t>(groups[c]);
    group_hit[g] += hit[c];
    group_seen[g] += seen[c];
  }
  auto ratio = [&](ClassGroup g) -> std::optional<double> {
    const auto i = static_cast<std::size_t>(g);
    if (group_seen[i] == 0) return std::nullopt;
    return static_cast<double>(group_hit[i]) / static_cast<double>(group_seen[i]);
  };
  report.head = ratio(ClassGroup::head);
  report.middle = ratio(ClassGroup::middle);
  report.tail = ratio(ClassGroup::tail);
  return report;
}

AccuracyReport evaluate(const Model& model, const FeatureSet& data, std::span<const ClassGroup> groups) {
  if (data.size() == 0) throw Error(ErrorCode::EmptyInput, "evaluate: empty evaluation set");
  const auto predictions = model.predict(data.features);
  return accuracy_report(predictions, data.labels, groups);
}

std::optional<double> mean_recall(const AccuracyReport& report, std::span<const int> classes) {
  double sum = 0.0;
  std::size_t n = 0;
  for (int c : classes) {
    if (c < 0 || static_cast<std::size_t>(c) >= report.per_class_recall.size()) continue;
    if (const auto& r = report.per_class_recall[static_cast<std::size_t>(c)]) {
      sum += *r;
      ++n;
    }
  }
  if (n == 0) return std::nullopt;
  return sum / static_cast<double>(n);
}

}  // namespace geoprior
