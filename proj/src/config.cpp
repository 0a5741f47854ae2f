// SPDX-License-Identifier: Apache-2.0
#include "rrd/config.hpp"

#include <json.hpp>

#include "rrd/errors.hpp"
#include "rrd/io_util.hpp"
#include "rrd/rng.hpp"

namespace rrd {

namespace {

using nlohmann::json;

// Substream tag separating dataset generation from every other use of the
// shuffle seed (epoch mixes use small integers).
constexpr uint64_t kDataSeedStream = 0xDA7A5EEDull;

json parse_text(const std::string& text, const std::string& origin) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(origin + ": " + e.what());
  }
}

void check_object(const json& node, const std::string& path) {
  if (!node.is_object()) {
    throw ConfigError("config section " + path + " must be an object");
  }
}

void check_keys(const json& obj, const std::string& path,
                std::initializer_list<const char*> allowed) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool known = false;
    for (const char* k : allowed) {
      if (it.key() == k) {
        known = true;
        break;
      }
    }
    if (!known) throw ConfigError("unknown config key: " + path + "." + it.key());
  }
}

double get_number(const json& obj, const std::string& path, const char* key, double def) {
  if (!obj.contains(key)) return def;
  const json& v = obj.at(key);
  if (!v.is_number()) {
    throw ConfigError("config field " + path + "." + key + " must be a number");
  }
  return v.get<double>();
}

int64_t get_integer(const json& obj, const std::string& path, const char* key, int64_t def) {
  if (!obj.contains(key)) return def;
  const json& v = obj.at(key);
  if (!v.is_number_integer()) {
    throw ConfigError("config field " + path + "." + key + " must be an integer");
  }
  return v.get<int64_t>();
}

uint64_t get_seed(const json& obj, const std::string& path, const char* key, uint64_t def) {
  if (!obj.contains(key)) return def;
  const json& v = obj.at(key);
  if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() &&
                                 v.get<int64_t>() < 0)) {
    throw ConfigError("config field " + path + "." + key + " must be a non-negative integer");
  }
  return v.get<uint64_t>();
}

bool get_bool(const json& obj, const std::string& path, const char* key, bool def) {
  if (!obj.contains(key)) return def;
  const json& v = obj.at(key);
  if (!v.is_boolean()) {
    throw ConfigError("config field " + path + "." + key + " must be a boolean");
  }
  return v.get<bool>();
}

std::string get_string(const json& obj, const std::string& path, const char* key,
                       const std::string& def) {
  if (!obj.contains(key)) return def;
  const json& v = obj.at(key);
  if (!v.is_string()) {
    throw ConfigError("config field " + path + "." + key + " must be a string");
  }
  return v.get<std::string>();
}

std::vector<int64_t> get_int_array(const json& obj, const std::string& path, const char* key,
                                   std::vector<int64_t> def) {
  if (!obj.contains(key)) return def;
  const json& v = obj.at(key);
  if (!v.is_array()) {
    throw ConfigError("config field " + path + "." + key + " must be an array of integers");
  }
  std::vector<int64_t> out;
  for (const json& e : v) {
    if (!e.is_number_integer()) {
      throw ConfigError("config field " + path + "." + key + " must be an array of integers");
    }
    out.push_back(e.get<int64_t>());
  }
  return out;
}

std::vector<double> get_number_array(const json& obj, const std::string& path, const char* key,
                                     std::vector<double> def) {
  if (!obj.contains(key)) return def;
  const json& v = obj.at(key);
  if (!v.is_array()) {
    throw ConfigError("config field " + path + "." + key + " must be an array of numbers");
  }
  std::vector<double> out;
  for (const json& e : v) {
    if (!e.is_number()) {
      throw ConfigError("config field " + path + "." + key + " must be an array of numbers");
    }
    out.push_back(e.get<double>());
  }
  return out;
}

ModelSpec parse_model(const json& obj, const std::string& path, const ModelSpec& def) {
  check_object(obj, path);
  check_keys(obj, path, {"layer_sizes", "num_classes", "proj_dim"});
  ModelSpec spec;
  spec.layer_sizes = get_int_array(obj, path, "layer_sizes", def.layer_sizes);
  spec.num_classes = get_integer(obj, path, "num_classes", def.num_classes);
  spec.proj_dim = get_integer(obj, path, "proj_dim", def.proj_dim);
  return spec;
}

DataConfig parse_data(const json& obj, const std::string& path) {
  check_object(obj, path);
  check_keys(obj, path,
             {"kind", "num_classes", "samples_per_class", "dim", "cluster_std",
              "label_noise_fraction", "noise", "csv_path", "label_column", "test_fraction"});
  DataConfig d;
  d.kind = get_string(obj, path, "kind", d.kind);
  d.num_classes = static_cast<int>(get_integer(obj, path, "num_classes", d.num_classes));
  d.samples_per_class =
      static_cast<int>(get_integer(obj, path, "samples_per_class", d.samples_per_class));
  d.dim = static_cast<int>(get_integer(obj, path, "dim", d.dim));
  d.cluster_std = get_number(obj, path, "cluster_std", d.cluster_std);
  d.label_noise_fraction = get_number(obj, path, "label_noise_fraction", d.label_noise_fraction);
  d.noise = get_number(obj, path, "noise", d.noise);
  d.csv_path = get_string(obj, path, "csv_path", d.csv_path);
  d.label_column = get_string(obj, path, "label_column", d.label_column);
  d.test_fraction = get_number(obj, path, "test_fraction", d.test_fraction);
  return d;
}

}  // namespace

void DataConfig::validate() const {
  if (kind != "blobs" && kind != "spirals" && kind != "csv") {
    throw ConfigError("config field data.kind must be one of blobs, spirals, csv; got '" + kind +
                      "'");
  }
  if (kind == "csv") {
    if (csv_path.empty()) throw ConfigError("config field data.csv_path is required for csv data");
    if (label_column.empty()) throw ConfigError("config field data.label_column must not be empty");
  } else {
    if (num_classes < 2) {
      throw ConfigError("config field data.num_classes must be at least 2, got " +
                        std::to_string(num_classes));
    }
    if (samples_per_class < 1) {
      throw ConfigError("config field data.samples_per_class must be positive");
    }
  }
  if (kind == "blobs") {
    if (dim < 1) throw ConfigError("config field data.dim must be positive");
    if (cluster_std < 0.0) throw ConfigError("config field data.cluster_std must be non-negative");
    if (!(label_noise_fraction >= 0.0 && label_noise_fraction <= 1.0)) {
      throw ConfigError("config field data.label_noise_fraction must be in [0, 1]");
    }
  }
  if (kind == "spirals" && noise < 0.0) {
    throw ConfigError("config field data.noise must be non-negative");
  }
  if (!(test_fraction >= 0.0 && test_fraction < 1.0)) {
    throw ConfigError("config field data.test_fraction must be in [0, 1)");
  }
}

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("config field train.epochs must be positive");
  if (batch_size < 1) throw ConfigError("config field train.batch_size must be positive");
  if (!(learning_rate > 0.0)) throw ConfigError("config field train.learning_rate must be positive");
  if (!(momentum >= 0.0 && momentum < 1.0)) {
    throw ConfigError("config field train.momentum must be in [0, 1)");
  }
  if (weight_decay < 0.0) throw ConfigError("config field train.weight_decay must be non-negative");
  for (double f : lr_decay_fractions) {
    if (!(f > 0.0 && f < 1.0)) {
      throw ConfigError("config field train.lr_decay_fractions entries must be in (0, 1)");
    }
  }
  if (!(lr_decay_multiplier > 0.0)) {
    throw ConfigError("config field train.lr_decay_multiplier must be positive");
  }
}

void BankConfig::validate() const {
  if (capacity < 1) throw ConfigError("config field bank.capacity must be positive");
  if (!(momentum_alpha > 0.0 && momentum_alpha < 1.0)) {
    throw ConfigError("config field bank.momentum_alpha must be in (0, 1)");
  }
}

void ExperimentConfig::validate() const {
  try {
    model_teacher.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config section model_teacher: ") + e.what());
  }
  try {
    model_student.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config section model_student: ") + e.what());
  }
  data.validate();
  train.validate();
  try {
    loss.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config section loss: ") + e.what());
  }
  bank.validate();
  if (eval.probe.steps < 1) throw ConfigError("config field eval.probe_steps must be positive");
  if (!(eval.probe.learning_rate > 0.0)) {
    throw ConfigError("config field eval.probe_learning_rate must be positive");
  }
  if (eval.transfer) eval.transfer->validate();

  if (data.kind != "csv") {
    const int64_t want_dim = data.kind == "spirals" ? 2 : data.dim;
    for (const auto& [name, spec] :
         {std::pair<const char*, const ModelSpec&>{"model_teacher", model_teacher},
          {"model_student", model_student}}) {
      if (spec.input_dim() != want_dim) {
        throw ConfigError(std::string("config: ") + name + " input dimension " +
                          std::to_string(spec.input_dim()) + " does not match data dimension " +
                          std::to_string(want_dim));
      }
      if (spec.num_classes != data.num_classes) {
        throw ConfigError(std::string("config: ") + name + " num_classes " +
                          std::to_string(spec.num_classes) + " does not match data.num_classes " +
                          std::to_string(data.num_classes));
      }
    }
  }
}

ExperimentConfig parse_config_json(const std::string& json_text, const std::string& origin) {
  const json root = parse_text(json_text, origin);
  if (!root.is_object()) throw ConfigError(origin + ": top level must be an object");
  check_keys(root, "config",
             {"model_teacher", "model_student", "data", "train", "loss", "bank", "eval", "seeds"});

  ExperimentConfig cfg;
  cfg.model_teacher =
      ModelSpec{{2, 64, 64}, 10, 16};
  cfg.model_student = ModelSpec{{2, 16}, 10, 16};

  if (root.contains("model_teacher")) {
    cfg.model_teacher = parse_model(root.at("model_teacher"), "model_teacher", cfg.model_teacher);
  }
  if (root.contains("model_student")) {
    cfg.model_student = parse_model(root.at("model_student"), "model_student", cfg.model_student);
  }
  if (root.contains("data")) cfg.data = parse_data(root.at("data"), "data");

  if (root.contains("train")) {
    const json& t = root.at("train");
    check_object(t, "train");
    check_keys(t, "train",
               {"epochs", "batch_size", "learning_rate", "momentum", "weight_decay",
                "lr_decay_fractions", "lr_decay_multiplier"});
    cfg.train.epochs = get_integer(t, "train", "epochs", cfg.train.epochs);
    cfg.train.batch_size = get_integer(t, "train", "batch_size", cfg.train.batch_size);
    cfg.train.learning_rate = get_number(t, "train", "learning_rate", cfg.train.learning_rate);
    cfg.train.momentum = get_number(t, "train", "momentum", cfg.train.momentum);
    cfg.train.weight_decay = get_number(t, "train", "weight_decay", cfg.train.weight_decay);
    cfg.train.lr_decay_fractions =
        get_number_array(t, "train", "lr_decay_fractions", cfg.train.lr_decay_fractions);
    cfg.train.lr_decay_multiplier =
        get_number(t, "train", "lr_decay_multiplier", cfg.train.lr_decay_multiplier);
  }

  if (root.contains("loss")) {
    const json& l = root.at("loss");
    check_object(l, "loss");
    check_keys(l, "loss", {"lambda_kd", "beta_rrd", "tau_kd", "tau_student", "tau_teacher"});
    cfg.loss.lambda_kd = get_number(l, "loss", "lambda_kd", cfg.loss.lambda_kd);
    cfg.loss.beta_rrd = get_number(l, "loss", "beta_rrd", cfg.loss.beta_rrd);
    cfg.loss.tau_kd = get_number(l, "loss", "tau_kd", cfg.loss.tau_kd);
    cfg.loss.tau_student = get_number(l, "loss", "tau_student", cfg.loss.tau_student);
    cfg.loss.tau_teacher = get_number(l, "loss", "tau_teacher", cfg.loss.tau_teacher);
  }

  if (root.contains("bank")) {
    const json& b = root.at("bank");
    check_object(b, "bank");
    check_keys(b, "bank", {"capacity", "strategy", "momentum_alpha", "mode"});
    cfg.bank.capacity = get_integer(b, "bank", "capacity", cfg.bank.capacity);
    const std::string strategy =
        get_string(b, "bank", "strategy", bank_strategy_name(cfg.bank.strategy));
    if (strategy == "fifo") {
      cfg.bank.strategy = BankStrategy::kFifo;
    } else if (strategy == "momentum") {
      cfg.bank.strategy = BankStrategy::kMomentum;
    } else {
      throw ConfigError("config field bank.strategy must be fifo or momentum, got '" + strategy +
                        "'");
    }
    cfg.bank.momentum_alpha = get_number(b, "bank", "momentum_alpha", cfg.bank.momentum_alpha);
    const std::string mode = get_string(b, "bank", "mode", rrd_mode_name(cfg.bank.mode));
    if (mode == "enqueue_first") {
      cfg.bank.mode = RrdMode::kEnqueueFirst;
    } else if (mode == "append") {
      cfg.bank.mode = RrdMode::kAppend;
    } else {
      throw ConfigError("config field bank.mode must be enqueue_first or append, got '" + mode +
                        "'");
    }
  }

  if (root.contains("eval")) {
    const json& e = root.at("eval");
    check_object(e, "eval");
    check_keys(e, "eval",
               {"linear_probe", "probe_steps", "probe_learning_rate", "probe_seed", "transfer"});
    cfg.eval.linear_probe = get_bool(e, "eval", "linear_probe", cfg.eval.linear_probe);
    cfg.eval.probe.steps = get_integer(e, "eval", "probe_steps", cfg.eval.probe.steps);
    cfg.eval.probe.learning_rate =
        get_number(e, "eval", "probe_learning_rate", cfg.eval.probe.learning_rate);
    cfg.eval.probe.seed = get_seed(e, "eval", "probe_seed", cfg.eval.probe.seed);
    if (e.contains("transfer") && !e.at("transfer").is_null()) {
      cfg.eval.transfer = parse_data(e.at("transfer"), "eval.transfer");
    }
  }

  if (root.contains("seeds")) {
    const json& s = root.at("seeds");
    check_object(s, "seeds");
    check_keys(s, "seeds", {"init", "shuffle", "bank"});
    cfg.seeds.init = get_seed(s, "seeds", "init", cfg.seeds.init);
    cfg.seeds.shuffle = get_seed(s, "seeds", "shuffle", cfg.seeds.shuffle);
    cfg.seeds.bank = get_seed(s, "seeds", "bank", cfg.seeds.bank);
  }

  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  return parse_config_json(read_file(path), path);
}

std::string config_to_json(const ExperimentConfig& c) {
  json root;
  root["model_teacher"] = {{"layer_sizes", c.model_teacher.layer_sizes},
                           {"num_classes", c.model_teacher.num_classes},
                           {"proj_dim", c.model_teacher.proj_dim}};
  root["model_student"] = {{"layer_sizes", c.model_student.layer_sizes},
                           {"num_classes", c.model_student.num_classes},
                           {"proj_dim", c.model_student.proj_dim}};
  root["data"] = {{"kind", c.data.kind},
                  {"num_classes", c.data.num_classes},
                  {"samples_per_class", c.data.samples_per_class},
                  {"dim", c.data.dim},
                  {"cluster_std", c.data.cluster_std},
                  {"label_noise_fraction", c.data.label_noise_fraction},
                  {"noise", c.data.noise},
                  {"csv_path", c.data.csv_path},
                  {"label_column", c.data.label_column},
                  {"test_fraction", c.data.test_fraction}};
  root["train"] = {{"epochs", c.train.epochs},
                   {"batch_size", c.train.batch_size},
                   {"learning_rate", c.train.learning_rate},
                   {"momentum", c.train.momentum},
                   {"weight_decay", c.train.weight_decay},
                   {"lr_decay_fractions", c.train.lr_decay_fractions},
                   {"lr_decay_multiplier", c.train.lr_decay_multiplier}};
  root["loss"] = {{"lambda_kd", c.loss.lambda_kd},
                  {"beta_rrd", c.loss.beta_rrd},
                  {"tau_kd", c.loss.tau_kd},
                  {"tau_student", c.loss.tau_student},
                  {"tau_teacher", c.loss.tau_teacher}};
  root["bank"] = {{"capacity", c.bank.capacity},
                  {"strategy", bank_strategy_name(c.bank.strategy)},
                  {"momentum_alpha", c.bank.momentum_alpha},
                  {"mode", rrd_mode_name(c.bank.mode)}};
  root["eval"] = {{"linear_probe", c.eval.linear_probe},
                  {"probe_steps", c.eval.probe.steps},
                  {"probe_learning_rate", c.eval.probe.learning_rate},
                  {"probe_seed", c.eval.probe.seed}};
  if (c.eval.transfer) {
    const DataConfig& t = *c.eval.transfer;
    root["eval"]["transfer"] = {{"kind", t.kind},
                                {"num_classes", t.num_classes},
                                {"samples_per_class", t.samples_per_class},
                                {"dim", t.dim},
                                {"cluster_std", t.cluster_std},
                                {"label_noise_fraction", t.label_noise_fraction},
                                {"noise", t.noise},
                                {"csv_path", t.csv_path},
                                {"label_column", t.label_column},
                                {"test_fraction", t.test_fraction}};
  }
  root["seeds"] = {{"init", c.seeds.init}, {"shuffle", c.seeds.shuffle}, {"bank", c.seeds.bank}};
  return root.dump(2) + "\n";
}

Dataset build_dataset(const DataConfig& data, const Seeds& seeds, uint64_t stream) {
  data.validate();
  const uint64_t seed = mix_seed(seeds.shuffle, kDataSeedStream + stream);
  if (data.kind == "blobs") {
    return generate_blobs(data.num_classes, data.samples_per_class, data.dim, data.cluster_std,
                          data.label_noise_fraction, seed, data.test_fraction);
  }
  if (data.kind == "spirals") {
    return generate_spirals(data.num_classes, data.samples_per_class, data.noise, seed,
                            data.test_fraction);
  }
  return load_csv_dataset(data.csv_path, data.label_column, data.test_fraction);
}

std::string bank_strategy_name(BankStrategy s) {
  return s == BankStrategy::kFifo ? "fifo" : "momentum";
}

std::string rrd_mode_name(RrdMode m) {
  return m == RrdMode::kEnqueueFirst ? "enqueue_first" : "append";
}

}  // namespace rrd
