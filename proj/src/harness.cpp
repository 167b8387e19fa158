#include "tpa/harness.hpp"

#include <cmath>
#include <fstream>

namespace tpa {

HeadParams make_head(Index d, Index num_classes, std::uint64_t seed) {
  if (num_classes < 2) throw ConfigError("head needs at least 2 classes");
  Rng rng(seed);
  return HeadParams{make_linear(d, num_classes, rng)};
}

void visit_params(HeadParams& p, const std::string& prefix, const ParamVisitor& v) {
  visit_params(p.projection, prefix + "/projection", v);
}

Model make_model(const ConformerConfig& cfg, Index num_classes, std::uint64_t head_seed) {
  Model m;
  m.config = cfg;
  m.blocks = make_encoder(cfg);
  m.head = make_head(cfg.d_model, num_classes, head_seed);
  return m;
}

Var model_forward(const Model& m, Var x, ActivationProbe* probe) {
  Var features = encoder_forward(m.blocks, x, m.adapters ? &*m.adapters : nullptr, probe);
  return linear_forward(m.head.projection, features);
}

void visit_params(Model& m, const ParamVisitor& v) {
  visit_params(m.blocks, "encoder", v);
  if (m.adapters) visit_params(*m.adapters, "adapter", v);
  visit_params(m.head, "head", v);
}

std::map<std::string, Tensor*> named_params(Model& m) {
  std::map<std::string, Tensor*> out;
  visit_params(m, [&out](const std::string& name, Tensor& t) {
    if (name.empty()) throw IntegrityError("parameter with empty name");
    if (!out.emplace(name, &t).second) throw IntegrityError("duplicate parameter name: " + name);
  });
  return out;
}

long long model_param_count(Model& m) {
  long long n = 0;
  visit_params(m, [&n](const std::string&, Tensor& t) { n += t.size(); });
  return n;
}

std::string to_string(TrainMode mode) {
  switch (mode) {
    case TrainMode::FullFinetune: return "full";
    case TrainMode::Adapter: return "adapter";
    case TrainMode::HeadOnly: return "head-only";
  }
  throw ConfigError("unknown train mode");
}

TrainMode parse_train_mode(const std::string& name) {
  if (name == "full") return TrainMode::FullFinetune;
  if (name == "adapter") return TrainMode::Adapter;
  if (name == "head-only") return TrainMode::HeadOnly;
  throw ConfigError("unknown train mode: " + name);
}

ParamPartition make_partition(Model& m, TrainMode mode) {
  ParamPartition p;
  for (const auto& [name, tensor] : named_params(m)) {
    (void)tensor;
    bool trainable = true;
    switch (mode) {
      case TrainMode::FullFinetune: trainable = true; break;
      case TrainMode::Adapter: trainable = name.rfind("encoder/", 0) != 0; break;
      case TrainMode::HeadOnly: trainable = name.rfind("head/", 0) == 0; break;
    }
    (trainable ? p.trainable : p.frozen).insert(name);
  }
  return p;
}

void apply_partition(Model& m, const ParamPartition& partition) {
  auto params = named_params(m);
  for (const auto& [name, tensor] : params) {
    const bool trainable = partition.trainable.count(name) > 0;
    const bool frozen = partition.frozen.count(name) > 0;
    if (trainable == frozen) {
      throw IntegrityError("parameter " + name + " must appear in exactly one partition set");
    }
    tensor->set_requires_grad(trainable);
    tensor->drop_grad();
  }
  for (const auto& name : partition.trainable) {
    if (!params.count(name)) throw IntegrityError("trainable name not in model: " + name);
  }
  for (const auto& name : partition.frozen) {
    if (!params.count(name)) throw IntegrityError("frozen name not in model: " + name);
  }
}

void TrainConfig::validate() const {
  if (steps < 0) throw ConfigError("steps must be >= 0");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (!(lr >= 0.0)) throw ConfigError("lr must be >= 0");
  if (!(beta1 > 0.0 && beta1 < 1.0)) throw ConfigError("beta1 must be in (0,1)");
  if (!(beta2 > 0.0 && beta2 < 1.0)) throw ConfigError("beta2 must be in (0,1)");
  if (!(epsilon > 0.0)) throw ConfigError("epsilon must be > 0");
}

void adam_update(Tensor& param, const ArrayXd& grad, AdamState::Moments& slot, long long t,
                 const TrainConfig& cfg) {
  if (slot.m.size() == 0) {
    slot.m = ArrayXd::Zero(param.size());
    slot.v = ArrayXd::Zero(param.size());
  }
  slot.m = cfg.beta1 * slot.m + (1.0 - cfg.beta1) * grad;
  slot.v = cfg.beta2 * slot.v + (1.0 - cfg.beta2) * grad.square();
  const double mhat_scale = 1.0 / (1.0 - std::pow(cfg.beta1, static_cast<double>(t)));
  const double vhat_scale = 1.0 / (1.0 - std::pow(cfg.beta2, static_cast<double>(t)));
  param.flat() -= cfg.lr * (slot.m * mhat_scale) / ((slot.v * vhat_scale).sqrt() + cfg.epsilon);
}

SyntheticTask::SyntheticTask(SyntheticTaskConfig cfg) : cfg_(std::move(cfg)) {
  if (cfg_.num_classes < 2) throw ConfigError("task needs at least 2 classes");
  if (cfg_.seq_len < 1 || cfg_.width < 1) throw ConfigError("task sequence shape must be positive");

  ConformerConfig teacher_cfg;
  teacher_cfg.num_blocks = 1;
  teacher_cfg.d_model = cfg_.width;
  teacher_cfg.heads = cfg_.width % 4 == 0 ? 4 : (cfg_.width % 2 == 0 ? 2 : 1);
  teacher_cfg.conv_kernel = 3;
  teacher_cfg.ffn_expansion = 2;
  teacher_cfg.seed = mix_seed(cfg_.seed, 0x7e4c8e5ULL);
  teacher_ = make_model(teacher_cfg, cfg_.num_classes, mix_seed(cfg_.seed, 0x6ea0ULL));

  auto generate = [&](Split split, int count) {
    std::vector<Sample> out;
    out.reserve(static_cast<std::size_t>(count));
    const std::uint64_t split_tag = split == Split::Train ? 2 : 3;
    for (int i = 0; i < count; ++i) {
      Rng rng(mix_seed(cfg_.seed, split_tag, static_cast<std::uint64_t>(i)));
      Sample s;
      s.input = Tensor({cfg_.seq_len, cfg_.width});
      for (Index j = 0; j < s.input.size(); ++j) s.input(j) = rng.uniform(-1.0, 1.0);
      Tape tape;
      s.labels = argmax_rows(model_forward(teacher_, tape.constant(s.input)).value());
      out.push_back(std::move(s));
    }
    return out;
  };
  train_ = generate(Split::Train, cfg_.train_size);
  eval_ = generate(Split::Eval, cfg_.eval_size);
}

StepMetrics train_step(Model& m, const ParamPartition& partition,
                       const std::vector<const Sample*>& batch, AdamState& state,
                       const TrainConfig& cfg, int step_index) {
  if (batch.empty()) throw ConfigError("train_step: empty batch");

  auto params = named_params(m);
  for (const auto& name : partition.trainable) params.at(name)->zero_grad();

  Tape tape;
  Var total;
  long long frames = 0, correct = 0;
  for (const Sample* s : batch) {
    Var logits = model_forward(m, tape.constant(s->input));
    Var loss = cross_entropy_mean(logits, s->labels);
    total = total.valid() ? add(total, loss) : loss;
    const std::vector<int> pred = argmax_rows(logits.value());
    for (std::size_t i = 0; i < pred.size(); ++i) correct += pred[i] == s->labels[i];
    frames += static_cast<long long>(pred.size());
  }
  total = scale(total, 1.0 / static_cast<double>(batch.size()));

  const double loss_value = total.value()(0);
  if (!std::isfinite(loss_value)) {
    throw NumericError("non-finite loss at step " + std::to_string(step_index));
  }
  tape.backward(total);

  state.t += 1;
  for (const auto& name : partition.trainable) {
    Tensor* p = params.at(name);
    adam_update(*p, p->grad(), state.slots[name], state.t, cfg);
  }
  return {loss_value, static_cast<double>(correct) / static_cast<double>(frames)};
}

EvalMetrics evaluate(const Model& m, const SyntheticTask& task, Split split) {
  const auto& samples = task.samples(split);
  if (samples.empty()) throw ConfigError("evaluate: empty split");
  double total_loss = 0.0;
  long long frames = 0, correct = 0;
  for (const Sample& s : samples) {
    Tape tape;
    Var logits = model_forward(m, tape.constant(s.input));
    total_loss += cross_entropy_mean(logits, s.labels).value()(0);
    const std::vector<int> pred = argmax_rows(logits.value());
    for (std::size_t i = 0; i < pred.size(); ++i) correct += pred[i] == s.labels[i];
    frames += static_cast<long long>(pred.size());
  }
  // same mean form as train_step so a zero-lr step reproduces eval exactly
  return {total_loss * (1.0 / static_cast<double>(samples.size())),
          static_cast<double>(correct) / static_cast<double>(frames)};
}

TrainResult train_loop(Model& m, const SyntheticTask& task, const TrainConfig& cfg,
                       const std::string& curve_csv) {
  cfg.validate();
  ParamPartition partition = make_partition(m, cfg.mode);
  apply_partition(m, partition);

  const auto& train = task.samples(Split::Train);
  if (train.empty()) throw ConfigError("train_loop: task has no training samples");
  Rng batch_rng(mix_seed(cfg.seed, 0xba7c8ULL));
  AdamState state;

  std::ofstream csv;
  if (!curve_csv.empty()) {
    csv.open(curve_csv);
    if (!csv) throw IoError("cannot write curve csv: " + curve_csv);
    csv << "step,loss,accuracy,mode\n";
  }

  TrainResult result;
  result.curve.reserve(static_cast<std::size_t>(cfg.steps));
  for (int step = 0; step < cfg.steps; ++step) {
    std::vector<const Sample*> batch;
    batch.reserve(static_cast<std::size_t>(cfg.batch_size));
    for (int b = 0; b < cfg.batch_size; ++b) {
      batch.push_back(&train[static_cast<std::size_t>(batch_rng.uniform_int(static_cast<int>(train.size())))]);
    }
    StepMetrics metrics = train_step(m, partition, batch, state, cfg, step);
    if (csv.is_open()) {
      csv << step << "," << metrics.loss << "," << metrics.accuracy << "," << to_string(cfg.mode)
          << "\n";
    }
    result.curve.push_back(metrics);
  }
  result.final_eval = evaluate(m, task, Split::Eval);
  return result;
}

ParadigmConfig default_paradigm_config() {
  ParadigmConfig cfg;
  cfg.task_a.seed = 101;
  cfg.task_b.seed = 202;
  cfg.pretrain.mode = TrainMode::FullFinetune;
  cfg.pretrain.steps = 400;
  cfg.pretrain.lr = 2e-3;
  cfg.pretrain.seed = 1001;
  cfg.adapt.mode = TrainMode::Adapter;
  cfg.adapt.steps = 300;
  cfg.adapt.lr = 2e-3;
  cfg.adapt.seed = 2002;
  cfg.adapter = AdapterSpec{Placement::Tpa, 8, false, BiasInit::Xavier};
  return cfg;
}

ParadigmReport pretrain_then_adapt(const ParadigmConfig& cfg) {
  SyntheticTask task_a(cfg.task_a);
  SyntheticTask task_b(cfg.task_b);

  Model pretrained = make_model(cfg.encoder, cfg.task_a.num_classes, cfg.head_seed_a);
  TrainConfig pre = cfg.pretrain;
  pre.mode = TrainMode::FullFinetune;
  ParadigmReport report;
  report.pretrain_a = train_loop(pretrained, task_a, pre).final_eval;
  const HeadParams head_a = pretrained.head;

  auto fresh_b_model = [&]() {
    Model m;
    m.config = pretrained.config;
    m.blocks = pretrained.blocks;  // copy of the pretrained encoder
    m.head = make_head(cfg.encoder.d_model, cfg.task_b.num_classes, cfg.head_seed_b);
    return m;
  };

  TrainConfig adapt = cfg.adapt;

  Model adapter_model = fresh_b_model();
  adapter_model.adapters = build_adapter_set(cfg.adapter, cfg.encoder, cfg.adapter_seed);
  adapt.mode = TrainMode::Adapter;
  report.adapter_b = train_loop(adapter_model, task_b, adapt).final_eval;

  Model head_only_model = fresh_b_model();
  adapt.mode = TrainMode::HeadOnly;
  report.head_only_b = train_loop(head_only_model, task_b, adapt).final_eval;

  Model full_model = fresh_b_model();
  adapt.mode = TrainMode::FullFinetune;
  report.full_finetune_b = train_loop(full_model, task_b, adapt).final_eval;

  // The adapter run never wrote the encoder, so detaching the adapters and
  // restoring the task-A head must reproduce the task-A pipeline exactly.
  Model probe;
  probe.config = adapter_model.config;
  probe.blocks = adapter_model.blocks;
  probe.head = head_a;
  report.forgetting_probe_a = evaluate(probe, task_a, Split::Eval);
  return report;
}

}  // namespace tpa
