// SPDX-License-Identifier: Apache-2.0
#include "rrd/train.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>

#include "rrd/errors.hpp"
#include "rrd/eval.hpp"
#include "rrd/io_util.hpp"
#include "rrd/losses.hpp"
#include "rrd/rng.hpp"

namespace rrd {

namespace {

// Named init substreams: the teacher, student, and teacher's auxiliary head
// draw from independent generators so adding or removing one never shifts the
// others' weights.
constexpr uint64_t kTeacherInitStream = 1;
constexpr uint64_t kStudentInitStream = 2;
constexpr uint64_t kTeacherAuxStream = 3;

}  // namespace

double lr_at_epoch(const TrainConfig& train, int64_t epoch) {
  double lr = train.learning_rate;
  for (double fraction : train.lr_decay_fractions) {
    if (epoch >= static_cast<int64_t>(std::floor(fraction * static_cast<double>(train.epochs)))) {
      lr *= train.lr_decay_multiplier;
    }
  }
  return lr;
}

void sgd_update(const std::vector<Tensor>& params,
                const std::vector<std::span<const double>>& grads, double lr, double momentum,
                double weight_decay, std::vector<std::vector<double>>& velocity) {
  if (params.size() != grads.size()) {
    throw std::invalid_argument("sgd_update: " + std::to_string(params.size()) +
                                " params but " + std::to_string(grads.size()) + " gradients");
  }
  if (velocity.empty()) {
    velocity.resize(params.size());
    for (size_t i = 0; i < params.size(); ++i) {
      velocity[i].assign(params[i].size(), 0.0);
    }
  }
  if (velocity.size() != params.size()) {
    throw std::invalid_argument("sgd_update: velocity holds " + std::to_string(velocity.size()) +
                                " buffers for " + std::to_string(params.size()) + " params");
  }
  for (size_t i = 0; i < params.size(); ++i) {
    Tensor p = params[i];
    auto& pd = p.data();
    const std::span<const double>& g = grads[i];
    std::vector<double>& v = velocity[i];
    if (g.empty()) continue;
    if (g.size() != pd.size() || v.size() != pd.size()) {
      throw std::invalid_argument("sgd_update: buffer sizes misaligned at parameter " +
                                  std::to_string(i) + " (param " + std::to_string(pd.size()) +
                                  ", grad " + std::to_string(g.size()) + ", velocity " +
                                  std::to_string(v.size()) + ")");
    }
    for (size_t j = 0; j < pd.size(); ++j) {
      v[j] = momentum * v[j] + g[j] + weight_decay * pd[j];
      pd[j] -= lr * v[j];
    }
  }
}

void sgd_update(const std::vector<Tensor>& params, double lr, double momentum,
                double weight_decay, std::vector<std::vector<double>>& velocity) {
  std::vector<std::span<const double>> grads;
  grads.reserve(params.size());
  for (const Tensor& p : params) {
    if (p.has_grad()) {
      grads.emplace_back(p.grad().data(), p.grad().size());
    } else {
      grads.emplace_back();
    }
  }
  sgd_update(params, grads, lr, momentum, weight_decay, velocity);
}

void write_metrics_csv(const std::vector<EpochMetrics>& metrics, const std::string& path) {
  std::string csv = "epoch,split,loss_total,loss_sup,loss_kd,loss_rrd,top1\n";
  for (const EpochMetrics& m : metrics) {
    csv += std::to_string(m.epoch) + "," + m.split + "," + format_double(m.loss_total) + "," +
           format_double(m.loss_sup) + "," + format_double(m.loss_kd) + "," +
           format_double(m.loss_rrd) + "," + format_double(m.top1) + "\n";
  }
  write_file_atomic(path, csv);
}

namespace {

constexpr char kCheckpointMagic[8] = {'R', 'R', 'D', 'C', 'K', 'P', 'T', '\0'};
constexpr uint32_t kCheckpointVersion = 1;

void append_u32(std::string& s, uint32_t v) {
  for (int i = 0; i < 4; ++i) s.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void append_u64(std::string& s, uint64_t v) {
  for (int i = 0; i < 8; ++i) s.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void append_i64(std::string& s, int64_t v) { append_u64(s, static_cast<uint64_t>(v)); }

void append_f64(std::string& s, double v) {
  uint64_t bits;
  std::memcpy(&bits, &v, sizeof(bits));
  append_u64(s, bits);
}

void append_str(std::string& s, const std::string& v) {
  append_u32(s, static_cast<uint32_t>(v.size()));
  s.append(v);
}

struct ByteReader {
  const std::string& buf;
  size_t pos{0};
  std::string origin;

  void require(size_t n, const char* what) {
    if (pos + n > buf.size()) {
      throw ConfigError(origin + ": checkpoint truncated while reading " + what);
    }
  }
  uint8_t u8(const char* what) {
    require(1, what);
    return static_cast<uint8_t>(buf[pos++]);
  }
  uint32_t u32(const char* what) {
    require(4, what);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(static_cast<uint8_t>(buf[pos++])) << (8 * i);
    return v;
  }
  uint64_t u64(const char* what) {
    require(8, what);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(static_cast<uint8_t>(buf[pos++])) << (8 * i);
    return v;
  }
  int64_t i64(const char* what) { return static_cast<int64_t>(u64(what)); }
  double f64(const char* what) {
    const uint64_t bits = u64(what);
    double v;
    std::memcpy(&v, &bits, sizeof(v));
    return v;
  }
  std::string str(const char* what) {
    const uint32_t n = u32(what);
    require(n, what);
    std::string v = buf.substr(pos, n);
    pos += n;
    return v;
  }
  bool done() const { return pos == buf.size(); }
};

std::string encode_arch(const ModelSpec& arch) {
  std::string p;
  append_u32(p, static_cast<uint32_t>(arch.layer_sizes.size()));
  for (int64_t v : arch.layer_sizes) append_i64(p, v);
  append_i64(p, arch.num_classes);
  append_i64(p, arch.proj_dim);
  return p;
}

ModelSpec decode_arch(ByteReader& r) {
  ModelSpec arch;
  const uint32_t n = r.u32("arch layer count");
  for (uint32_t i = 0; i < n; ++i) arch.layer_sizes.push_back(r.i64("arch layer size"));
  arch.num_classes = r.i64("arch num_classes");
  arch.proj_dim = r.i64("arch proj_dim");
  return arch;
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  std::string out(kCheckpointMagic, sizeof(kCheckpointMagic));
  append_u32(out, kCheckpointVersion);

  auto section = [&out](const std::string& name, const std::string& payload) {
    append_str(out, name);
    append_u64(out, payload.size());
    out.append(payload);
  };

  section("arch", encode_arch(ckpt.arch));

  {
    std::string p;
    append_u32(p, static_cast<uint32_t>(ckpt.params.size()));
    for (const CheckpointParam& param : ckpt.params) {
      append_str(p, param.name);
      append_i64(p, param.rows);
      append_i64(p, param.cols);
      for (double v : param.data) append_f64(p, v);
    }
    section("params", p);
  }

  if (!ckpt.velocity.empty()) {
    std::string p;
    append_u32(p, static_cast<uint32_t>(ckpt.velocity.size()));
    for (const auto& v : ckpt.velocity) {
      append_u64(p, v.size());
      for (double x : v) append_f64(p, x);
    }
    section("velocity", p);
  }

  if (ckpt.bank) {
    const BankState& b = *ckpt.bank;
    std::string p;
    append_i64(p, b.capacity);
    append_i64(p, b.dim);
    p.push_back(b.strategy == BankStrategy::kFifo ? 0 : 1);
    append_f64(p, b.momentum_alpha);
    append_i64(p, b.cursor);
    for (double v : b.storage) append_f64(p, v);
    section("bank", p);
  }

  {
    std::string p;
    append_str(p, ckpt.config_json);
    section("config", p);
  }

  {
    std::string p;
    append_i64(p, ckpt.epoch);
    section("epoch", p);
  }

  {
    std::string p;
    append_u64(p, ckpt.seeds.init);
    append_u64(p, ckpt.seeds.shuffle);
    append_u64(p, ckpt.seeds.bank);
    append_u64(p, ckpt.sample_counter);
    section("rng", p);
  }

  write_file_atomic(path, out);
}

Checkpoint load_checkpoint(const std::string& path) {
  const std::string buf = read_file(path);
  ByteReader top{buf, 0, path};
  top.require(sizeof(kCheckpointMagic), "magic");
  if (std::memcmp(buf.data(), kCheckpointMagic, sizeof(kCheckpointMagic)) != 0) {
    throw ConfigError(path + ": not a checkpoint file (bad magic)");
  }
  top.pos = sizeof(kCheckpointMagic);
  const uint32_t version = top.u32("version");
  if (version != kCheckpointVersion) {
    throw ConfigError(path + ": unsupported checkpoint version " + std::to_string(version));
  }

  Checkpoint ckpt;
  bool have_arch = false, have_params = false, have_config = false, have_epoch = false,
       have_rng = false;

  while (!top.done()) {
    const std::string name = top.str("section name");
    const uint64_t len = top.u64("section length");
    top.require(len, ("section '" + name + "'").c_str());
    const std::string payload = buf.substr(top.pos, len);
    top.pos += len;
    ByteReader r{payload, 0, path};

    if (name == "arch") {
      ckpt.arch = decode_arch(r);
      have_arch = true;
    } else if (name == "params") {
      const uint32_t count = r.u32("param count");
      for (uint32_t i = 0; i < count; ++i) {
        CheckpointParam param;
        param.name = r.str("param name");
        param.rows = r.i64("param rows");
        param.cols = r.i64("param cols");
        if (param.rows < 1 || param.cols < 1) {
          throw ConfigError(path + ": parameter " + param.name + " has invalid shape " +
                            std::to_string(param.rows) + "x" + std::to_string(param.cols));
        }
        const int64_t n = param.rows * param.cols;
        param.data.reserve(n);
        for (int64_t j = 0; j < n; ++j) param.data.push_back(r.f64("param data"));
        ckpt.params.push_back(std::move(param));
      }
      have_params = true;
    } else if (name == "velocity") {
      const uint32_t count = r.u32("velocity count");
      for (uint32_t i = 0; i < count; ++i) {
        const uint64_t n = r.u64("velocity length");
        std::vector<double> v;
        v.reserve(n);
        for (uint64_t j = 0; j < n; ++j) v.push_back(r.f64("velocity data"));
        ckpt.velocity.push_back(std::move(v));
      }
    } else if (name == "bank") {
      BankState b;
      b.capacity = r.i64("bank capacity");
      b.dim = r.i64("bank dim");
      const uint8_t strategy = r.u8("bank strategy");
      if (strategy > 1) {
        throw ConfigError(path + ": unknown bank strategy tag " + std::to_string(strategy));
      }
      b.strategy = strategy == 0 ? BankStrategy::kFifo : BankStrategy::kMomentum;
      b.momentum_alpha = r.f64("bank momentum_alpha");
      b.cursor = r.i64("bank cursor");
      if (b.capacity < 1 || b.dim < 1) {
        throw ConfigError(path + ": bank has invalid dimensions " + std::to_string(b.capacity) +
                          "x" + std::to_string(b.dim));
      }
      const int64_t n = b.capacity * b.dim;
      b.storage.reserve(n);
      for (int64_t j = 0; j < n; ++j) b.storage.push_back(r.f64("bank storage"));
      ckpt.bank = std::move(b);
    } else if (name == "config") {
      ckpt.config_json = r.str("config json");
      have_config = true;
    } else if (name == "epoch") {
      ckpt.epoch = r.i64("epoch");
      have_epoch = true;
    } else if (name == "rng") {
      ckpt.seeds.init = r.u64("rng init seed");
      ckpt.seeds.shuffle = r.u64("rng shuffle seed");
      ckpt.seeds.bank = r.u64("rng bank seed");
      ckpt.sample_counter = r.u64("rng sample counter");
      have_rng = true;
    } else {
      throw ConfigError(path + ": unknown checkpoint section '" + name + "'");
    }
    if (!r.done()) {
      throw ConfigError(path + ": trailing bytes in checkpoint section '" + name + "'");
    }
  }

  if (!have_arch || !have_params || !have_config || !have_epoch || !have_rng) {
    throw ConfigError(path + ": checkpoint is missing required sections");
  }
  return ckpt;
}

Model model_from_checkpoint(const Checkpoint& ckpt) {
  Model model = Model::init(ckpt.arch, 0);
  auto params = model.parameters();
  if (params.size() != ckpt.params.size()) {
    throw ConfigError("checkpoint holds " + std::to_string(ckpt.params.size()) +
                      " parameters, architecture " + ckpt.arch.str() + " expects " +
                      std::to_string(params.size()));
  }
  for (size_t i = 0; i < params.size(); ++i) {
    const CheckpointParam& stored = ckpt.params[i];
    Tensor& live = params[i].second;
    if (stored.name != params[i].first) {
      throw ConfigError("checkpoint parameter '" + stored.name + "' where '" + params[i].first +
                        "' was expected");
    }
    if (live.rows() != stored.rows || live.cols() != stored.cols) {
      throw ConfigError("checkpoint parameter '" + stored.name + "' has shape " +
                        std::to_string(stored.rows) + "x" + std::to_string(stored.cols) +
                        ", model expects " + live.shape().str());
    }
    live.data() = stored.data;
  }
  return model;
}

Checkpoint make_checkpoint(const Model& model, const std::vector<std::vector<double>>& velocity,
                           const ExperimentConfig& config, int64_t epoch,
                           uint64_t sample_counter) {
  Checkpoint ckpt;
  ckpt.arch = model.spec();
  for (const auto& [name, tensor] : model.parameters()) {
    ckpt.params.push_back({name, tensor.rows(), tensor.cols(), tensor.data()});
  }
  ckpt.velocity = velocity;
  ckpt.config_json = config_to_json(config);
  ckpt.epoch = epoch;
  ckpt.seeds = config.seeds;
  ckpt.sample_counter = sample_counter;
  return ckpt;
}

namespace {

void check_finite_loss(double value, int64_t epoch) {
  if (!std::isfinite(value)) {
    throw NumericalError("training diverged: non-finite loss at epoch " + std::to_string(epoch));
  }
}

struct LossAccumulator {
  double total{0.0}, sup{0.0}, kd{0.0}, rrd{0.0}, top1{0.0};
  int64_t count{0};

  void add(double total_v, double sup_v, double kd_v, double rrd_v, double top1_v, int64_t n) {
    const double w = static_cast<double>(n);
    total += total_v * w;
    sup += sup_v * w;
    kd += kd_v * w;
    rrd += rrd_v * w;
    top1 += top1_v * w;
    count += n;
  }

  EpochMetrics row(int64_t epoch, const std::string& split) const {
    const double w = static_cast<double>(count);
    return {epoch, split, total / w, sup / w, kd / w, rrd / w, top1 / w};
  }
};

void apply_bank_update(MemoryBank& bank, const Batch& batch, const Tensor& teacher_embedding) {
  if (bank.strategy() == BankStrategy::kFifo) {
    bank.enqueue_batch(teacher_embedding);
  } else {
    std::vector<int64_t> slots;
    slots.reserve(batch.indices.size());
    for (int64_t idx : batch.indices) slots.push_back(idx % bank.capacity());
    bank.momentum_update(slots, teacher_embedding);
  }
}

// One student training loop covers both the supervised baseline and
// distillation; with both loss weights at zero the teacher is never consulted
// and the arithmetic is identical to the plain supervised path.
TrainResult run_student_training(const ExperimentConfig& config, const Checkpoint* teacher_ckpt,
                                 const Dataset& dataset) {
  const bool use_kd = teacher_ckpt != nullptr && config.loss.lambda_kd > 0.0;
  const bool use_rrd = teacher_ckpt != nullptr && config.loss.beta_rrd > 0.0;
  const bool need_teacher = use_kd || use_rrd;

  Model teacher;
  if (teacher_ckpt != nullptr) {
    if (teacher_ckpt->arch != config.model_teacher) {
      throw ConfigError("teacher checkpoint architecture " + teacher_ckpt->arch.str() +
                        " does not match configured model_teacher " + config.model_teacher.str());
    }
    if (need_teacher) {
      teacher = model_from_checkpoint(*teacher_ckpt);
      teacher.set_frozen(true);
    }
  }
  if (use_rrd && config.model_teacher.proj_dim != config.model_student.proj_dim) {
    throw ConfigError("relational distillation needs matching projection dimensions, teacher has " +
                      std::to_string(config.model_teacher.proj_dim) + ", student has " +
                      std::to_string(config.model_student.proj_dim));
  }

  Model student = Model::init(config.model_student, mix_seed(config.seeds.init, kStudentInitStream));
  std::vector<Tensor> params = student.parameter_tensors();
  std::vector<std::vector<double>> velocity;

  std::optional<MemoryBank> bank;
  if (use_rrd) {
    bank.emplace(config.bank.capacity, config.model_student.proj_dim, config.bank.strategy,
                 config.seeds.bank, config.bank.momentum_alpha);
  }

  const LossWeights& lw = config.loss;
  std::vector<EpochMetrics> metrics;
  uint64_t sample_counter = 0;

  for (int64_t epoch = 0; epoch < config.train.epochs; ++epoch) {
    const double lr = lr_at_epoch(config.train, epoch);
    LossAccumulator train_acc;

    for (const Batch& batch : batch_iterator(dataset, Split::kTrain, config.train.batch_size,
                                             config.seeds.shuffle, epoch)) {
      const int64_t n = batch.features.rows();

      Tensor t_logits, t_embedding;
      if (need_teacher) {
        NoGradGuard guard;
        ForwardResult t = teacher.forward(batch.features);
        t_logits = t.logits;
        t_embedding = t.embedding;
      }
      if (use_rrd && config.bank.mode == RrdMode::kEnqueueFirst) {
        apply_bank_update(*bank, batch, t_embedding);
      }

      ForwardResult s = student.forward(batch.features);
      Tensor sup = cross_entropy_loss(s.logits, batch.labels);

      Tensor total;
      double kd_value = 0.0, rrd_value = 0.0;
      if (!use_kd && !use_rrd) {
        total = sup;
      } else {
        Tensor kd = use_kd ? kd_kl_loss(s.logits, t_logits, lw.tau_kd) : Tensor::scalar(0.0);
        Tensor rrd = use_rrd ? rrd_loss(s.embedding, t_embedding, *bank, lw.tau_student,
                                        lw.tau_teacher, config.bank.mode)
                             : Tensor::scalar(0.0);
        kd_value = kd.value();
        rrd_value = rrd.value();
        total = combined_objective(sup, kd, rrd, lw.lambda_kd, lw.beta_rrd);
      }
      check_finite_loss(total.value(), epoch);

      for (Tensor& p : params) p.zero_grad();
      total.backward();
      sgd_update(params, lr, config.train.momentum, config.train.weight_decay, velocity);

      if (use_rrd && config.bank.mode == RrdMode::kAppend) {
        apply_bank_update(*bank, batch, t_embedding);
      }

      train_acc.add(total.value(), sup.value(), kd_value, rrd_value,
                    top1_accuracy(s.logits, batch.labels), n);
      sample_counter += static_cast<uint64_t>(n);
    }
    metrics.push_back(train_acc.row(epoch, "train"));

    if (!dataset.test_indices.empty()) {
      NoGradGuard guard;
      auto [test_x, test_y] = dataset.gather(dataset.test_indices);
      Tensor t_logits, t_embedding;
      if (need_teacher) {
        ForwardResult t = teacher.forward(test_x);
        t_logits = t.logits;
        t_embedding = t.embedding;
      }
      ForwardResult s = student.forward(test_x);
      const double sup_v = cross_entropy_loss(s.logits, test_y).value();
      const double kd_v = use_kd ? kd_kl_loss(s.logits, t_logits, lw.tau_kd).value() : 0.0;
      const double rrd_v = use_rrd ? rrd_loss(s.embedding, t_embedding, *bank, lw.tau_student,
                                              lw.tau_teacher, config.bank.mode)
                                         .value()
                                   : 0.0;
      const double total_v = sup_v + lw.lambda_kd * kd_v + lw.beta_rrd * rrd_v;
      check_finite_loss(total_v, epoch);
      metrics.push_back({epoch, "test", total_v, sup_v, kd_v, rrd_v,
                         top1_accuracy(s.logits, test_y)});
    }

    log_info("epoch " + std::to_string(epoch) + " train loss " +
             format_double(metrics[metrics.size() - (dataset.test_indices.empty() ? 1 : 2)]
                               .loss_total) +
             (dataset.test_indices.empty()
                  ? ""
                  : " test top1 " + format_double(metrics.back().top1)));
  }

  TrainResult result;
  result.checkpoint =
      make_checkpoint(student, velocity, config, config.train.epochs, sample_counter);
  if (use_rrd) {
    result.checkpoint.bank = BankState{bank->capacity(),       bank->dim(), bank->strategy(),
                                       bank->momentum_alpha(), bank->cursor(),
                                       bank->storage()};
  }
  result.metrics = std::move(metrics);
  return result;
}

}  // namespace

TrainResult train_teacher(const ExperimentConfig& config, const Dataset& dataset) {
  Model model = Model::init(config.model_teacher, mix_seed(config.seeds.init, kTeacherInitStream));

  Rng aux_rng(mix_seed(config.seeds.init, kTeacherAuxStream));
  LinearLayer aux = LinearLayer::init(config.model_teacher.proj_dim,
                                      config.model_teacher.num_classes, aux_rng);

  std::vector<Tensor> params = model.parameter_tensors();
  const size_t model_param_count = params.size();
  params.push_back(aux.weight);
  params.push_back(aux.bias);
  std::vector<std::vector<double>> velocity;

  std::vector<EpochMetrics> metrics;
  uint64_t sample_counter = 0;

  for (int64_t epoch = 0; epoch < config.train.epochs; ++epoch) {
    const double lr = lr_at_epoch(config.train, epoch);
    LossAccumulator train_acc;

    for (const Batch& batch : batch_iterator(dataset, Split::kTrain, config.train.batch_size,
                                             config.seeds.shuffle, epoch)) {
      const int64_t n = batch.features.rows();
      ForwardResult f = model.forward(batch.features);
      Tensor sup = cross_entropy_loss(f.logits, batch.labels);
      Tensor aux_loss = cross_entropy_loss(aux.apply(f.embedding), batch.labels);
      Tensor total = add(sup, aux_loss);
      check_finite_loss(total.value(), epoch);

      for (Tensor& p : params) p.zero_grad();
      total.backward();
      sgd_update(params, lr, config.train.momentum, config.train.weight_decay, velocity);

      train_acc.add(total.value(), sup.value(), 0.0, 0.0, top1_accuracy(f.logits, batch.labels),
                    n);
      sample_counter += static_cast<uint64_t>(n);
    }
    metrics.push_back(train_acc.row(epoch, "train"));

    if (!dataset.test_indices.empty()) {
      NoGradGuard guard;
      auto [test_x, test_y] = dataset.gather(dataset.test_indices);
      ForwardResult f = model.forward(test_x);
      const double sup_v = cross_entropy_loss(f.logits, test_y).value();
      const double aux_v = cross_entropy_loss(aux.apply(f.embedding), test_y).value();
      check_finite_loss(sup_v + aux_v, epoch);
      metrics.push_back({epoch, "test", sup_v + aux_v, sup_v, 0.0, 0.0,
                         top1_accuracy(f.logits, test_y)});
    }

    log_info("teacher epoch " + std::to_string(epoch) +
             (dataset.test_indices.empty()
                  ? ""
                  : " test top1 " + format_double(metrics.back().top1)));
  }

  // The auxiliary head stays behind; the checkpoint describes the model alone.
  std::vector<std::vector<double>> model_velocity(
      velocity.begin(), velocity.begin() + static_cast<int64_t>(model_param_count));
  TrainResult result;
  result.checkpoint =
      make_checkpoint(model, model_velocity, config, config.train.epochs, sample_counter);
  result.metrics = std::move(metrics);
  return result;
}

TrainResult train_student_supervised(const ExperimentConfig& config, const Dataset& dataset) {
  return run_student_training(config, nullptr, dataset);
}

TrainResult distill(const ExperimentConfig& config, const Checkpoint& teacher_ckpt,
                    const Dataset& dataset) {
  return run_student_training(config, &teacher_ckpt, dataset);
}

}  // namespace rrd
