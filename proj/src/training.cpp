#include "ulcnn/training.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>

#include "ulcnn/rng.hpp"

namespace ulcnn {

void TrainConfig::validate() const {
  if (!(initial_lr > 0.0)) fail_config("train config: initial lr must be positive");
  if (epochs < 1) fail_config("train config: epochs must be >= 1");
  if (batch_size < 1) fail_config("train config: batch size must be >= 1");
  if (!(alr.factor > 0.0 && alr.factor < 1.0)) {
    fail_config("train config: decay factor must be in (0, 1)");
  }
  if (alr.patience < 1) fail_config("train config: patience must be >= 1");
  if (!(alr.min_lr >= 0.0)) fail_config("train config: min lr must be >= 0");
}

double cross_entropy(const RealTensor& probs, const std::vector<int>& labels) {
  const int batch = probs.dim(0), n = probs.dim(1);
  if (static_cast<int>(labels.size()) != batch) {
    fail_config("cross_entropy: batch " + std::to_string(batch) + " vs " +
                std::to_string(labels.size()) + " labels");
  }
  double loss = 0.0;
  for (int b = 0; b < batch; ++b) {
    const int y = labels[static_cast<size_t>(b)];
    if (y < 0 || y >= n) {
      fail_data("cross_entropy: label " + std::to_string(y) + " out of range [0, " +
                std::to_string(n) + ")");
    }
    loss -= std::log(std::max(probs(b, y), 1e-12));
  }
  return loss / static_cast<double>(batch);
}

RealTensor cross_entropy_grad_logits(const RealTensor& probs, const std::vector<int>& labels) {
  const int batch = probs.dim(0), n = probs.dim(1);
  RealTensor grad = probs;
  for (int b = 0; b < batch; ++b) {
    const int y = labels[static_cast<size_t>(b)];
    if (y < 0 || y >= n) {
      fail_data("cross_entropy: label " + std::to_string(y) + " out of range [0, " +
                std::to_string(n) + ")");
    }
    grad(b, y) -= 1.0;
  }
  for (int64_t i = 0; i < grad.size(); ++i) grad[i] /= static_cast<double>(batch);
  return grad;
}

Adam::Adam(const std::vector<ParamRef>& params, AdamConfig config) : config_(config) {
  m_.reserve(params.size());
  v_.reserve(params.size());
  for (const ParamRef& p : params) {
    m_.emplace_back(p.value->shape());
    v_.emplace_back(p.value->shape());
  }
}

void Adam::step(const std::vector<ParamRef>& params, double lr) {
  if (params.size() != m_.size()) fail_config("adam: parameter list changed size");
  ++t_;
  const double b1 = config_.beta1, b2 = config_.beta2;
  const double bc1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  for (size_t p = 0; p < params.size(); ++p) {
    RealTensor& w = *params[p].value;
    const RealTensor& g = *params[p].grad;
    if (!g.all_finite()) {
      fail_numeric("adam: non-finite gradient in " + params[p].name + " at step " +
                   std::to_string(t_));
    }
    RealTensor& m = m_[p];
    RealTensor& v = v_[p];
    for (int64_t i = 0; i < w.size(); ++i) {
      m[i] = b1 * m[i] + (1.0 - b1) * g[i];
      v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      w[i] -= lr * mhat / (std::sqrt(vhat) + config_.eps);
    }
  }
}

double alr_update(const std::vector<double>& val_loss_history, double current_lr,
                  const AlrConfig& config) {
  if (val_loss_history.empty()) fail_config("alr_update: empty history");
  double best = std::numeric_limits<double>::infinity();
  int wait = 0;
  bool decay_now = false;
  for (double loss : val_loss_history) {
    decay_now = false;
    if (loss < best) {
      best = loss;
      wait = 0;
    } else {
      ++wait;
      if (wait >= config.patience) {
        decay_now = true;
        wait = 0;
      }
    }
  }
  if (!decay_now) return current_lr;
  return std::max(current_lr * config.factor, config.min_lr);
}

namespace {

struct EvalPass {
  double loss = 0.0;
  double accuracy = 0.0;
  std::vector<int> predictions;
};

EvalPass eval_pass(Model& model, const std::vector<Frame>& frames, int batch_size) {
  EvalPass out;
  if (frames.empty()) fail_config("evaluate: empty frame set");
  out.predictions.reserve(frames.size());
  double loss_sum = 0.0;
  int64_t correct = 0;
  for (size_t begin = 0; begin < frames.size(); begin += static_cast<size_t>(batch_size)) {
    const size_t end = std::min(frames.size(), begin + static_cast<size_t>(batch_size));
    RealTensor x = frames_to_tensor(frames, begin, end);
    const std::vector<int> labels = frame_labels(frames, begin, end);
    RealTensor probs = model.score(x);
    loss_sum += cross_entropy(probs, labels) * static_cast<double>(end - begin);
    const int n = probs.dim(1);
    for (size_t f = begin; f < end; ++f) {
      const int pred = argmax_row(&probs(static_cast<int>(f - begin), 0), n);
      out.predictions.push_back(pred);
      if (pred == labels[f - begin]) ++correct;
    }
  }
  out.loss = loss_sum / static_cast<double>(frames.size());
  out.accuracy = static_cast<double>(correct) / static_cast<double>(frames.size());
  return out;
}

}  // namespace

MetricsReport fit(Model& model, const std::vector<Frame>& train, const std::vector<Frame>& val,
                  const TrainConfig& config) {
  config.validate();
  if (train.empty()) fail_config("fit: empty training set");
  if (val.empty()) fail_config("fit: empty validation set");

  // Augmentation is materialized once; val stays untouched.
  std::vector<Frame> augmented;
  if (config.use_da) augmented = rotate_augment(train);
  const std::vector<Frame>& train_set = config.use_da ? augmented : train;

  std::vector<ParamRef> params = model.parameters();
  Adam opt(params, config.adam);
  Rng shuffle_rng(Rng::mix(config.seed, 0xdau, 7));

  std::vector<size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), size_t{0});

  MetricsReport report;
  report.n_classes = model.config().n_classes;

  double lr = config.initial_lr;
  double best_val = std::numeric_limits<double>::infinity();
  std::vector<RealTensor> best_weights = model.snapshot_weights();
  int best_epoch = 0;
  std::vector<double> val_history;

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    shuffle_rng.shuffle(order);

    double train_loss_sum = 0.0;
    int64_t seen = 0;
    std::vector<Frame> batch_frames;
    for (size_t begin = 0; begin < order.size(); begin += static_cast<size_t>(config.batch_size)) {
      const size_t end = std::min(order.size(), begin + static_cast<size_t>(config.batch_size));
      batch_frames.clear();
      for (size_t idx = begin; idx < end; ++idx) batch_frames.push_back(train_set[order[idx]]);

      RealTensor x = frames_to_tensor(batch_frames, 0, batch_frames.size());
      const std::vector<int> labels = frame_labels(batch_frames, 0, batch_frames.size());

      RealTensor probs = model.forward(x, Mode::Train);
      const double loss = cross_entropy(probs, labels);
      if (!std::isfinite(loss)) {
        model.restore_weights(best_weights);
        fail_numeric("fit: non-finite training loss at epoch " + std::to_string(epoch) +
                     "; best checkpoint restored");
      }
      train_loss_sum += loss * static_cast<double>(end - begin);
      seen += static_cast<int64_t>(end - begin);

      model.zero_grads();
      model.backward_from_logits(cross_entropy_grad_logits(probs, labels));
      opt.step(params, lr);
      model.quantize_storage();
    }

    EvalPass vp = eval_pass(model, val, config.batch_size);
    if (!std::isfinite(vp.loss)) {
      model.restore_weights(best_weights);
      fail_numeric("fit: non-finite validation loss at epoch " + std::to_string(epoch) +
                   "; best checkpoint restored");
    }
    val_history.push_back(vp.loss);

    EpochRow row;
    row.epoch = epoch;
    row.lr = lr;
    row.train_loss = train_loss_sum / static_cast<double>(seen);
    row.val_loss = vp.loss;
    row.val_acc = vp.accuracy;
    report.history.push_back(row);

    if (vp.loss < best_val) {
      best_val = vp.loss;
      best_weights = model.snapshot_weights();
      best_epoch = epoch;
    }
    if (config.use_alr) lr = alr_update(val_history, lr, config.alr);
  }

  model.restore_weights(best_weights);
  report.best_epoch = best_epoch;
  return report;
}

MetricsReport evaluate(Model& model, const std::vector<Frame>& test) {
  if (test.empty()) fail_config("evaluate: empty test set");
  const int n = model.config().n_classes;

  MetricsReport report;
  report.n_classes = n;
  report.confusion.assign(static_cast<size_t>(n) * n, 0);

  EvalPass pass = eval_pass(model, test, 256);
  report.overall_accuracy = pass.accuracy;

  std::map<int, std::pair<int64_t, int64_t>> per_snr;  // snr -> (correct, total)
  for (size_t f = 0; f < test.size(); ++f) {
    const int truth = test[f].label;
    const int pred = pass.predictions[f];
    if (truth >= n) {
      fail_data("evaluate: frame label " + std::to_string(truth) + " outside the model's " +
                std::to_string(n) + " classes");
    }
    report.confusion[static_cast<size_t>(truth) * n + pred] += 1;
    auto& cell = per_snr[test[f].snr_db];
    if (pred == truth) ++cell.first;
    ++cell.second;
  }

  double acc_sum = 0.0;
  for (const auto& [snr, cell] : per_snr) {
    const double acc = static_cast<double>(cell.first) / static_cast<double>(cell.second);
    report.per_snr.emplace_back(snr, acc);
    acc_sum += acc;
  }
  report.average_accuracy = acc_sum / static_cast<double>(per_snr.size());
  return report;
}

namespace {

std::ofstream open_csv(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) fail_io("cannot open for writing: " + path.string());
  return out;
}

}  // namespace

void write_history_csv(const MetricsReport& report, const std::filesystem::path& path) {
  std::ofstream out = open_csv(path);
  out << "epoch,lr,train_loss,val_loss,val_acc\n";
  out.precision(10);
  for (const EpochRow& row : report.history) {
    out << row.epoch << ',' << row.lr << ',' << row.train_loss << ',' << row.val_loss << ','
        << row.val_acc << '\n';
  }
  if (!out) fail_io("write failed: " + path.string());
}

void write_per_snr_csv(const MetricsReport& report, const std::filesystem::path& path) {
  std::ofstream out = open_csv(path);
  out << "snr_db,accuracy\n";
  out.precision(10);
  for (const auto& [snr, acc] : report.per_snr) out << snr << ',' << acc << '\n';
  if (!out) fail_io("write failed: " + path.string());
}

void write_confusion_csv(const MetricsReport& report, const LabelMap* labels,
                         const std::filesystem::path& path) {
  std::ofstream out = open_csv(path);
  const int n = report.n_classes;
  out << "truth\\pred";
  for (int j = 0; j < n; ++j) {
    if (labels && j < labels->size()) {
      out << ',' << labels->names[static_cast<size_t>(j)];
    } else {
      out << ",class" << j;
    }
  }
  out << '\n';
  for (int i = 0; i < n; ++i) {
    if (labels && i < labels->size()) {
      out << labels->names[static_cast<size_t>(i)];
    } else {
      out << "class" << i;
    }
    for (int j = 0; j < n; ++j) out << ',' << report.confusion[static_cast<size_t>(i) * n + j];
    out << '\n';
  }
  if (!out) fail_io("write failed: " + path.string());
}

}  // namespace ulcnn
