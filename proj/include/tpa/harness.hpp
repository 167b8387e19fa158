#pragma once

#include <map>
#include <set>

#include "tpa/conformer.hpp"

namespace tpa {

// Stand-in for the trainable decoder: a linear per-frame classification head.
struct HeadParams {
  LinearParams projection;  // [d x num_classes]
  Index num_classes() const { return projection.out(); }
};

HeadParams make_head(Index d, Index num_classes, std::uint64_t seed);

void visit_params(HeadParams& p, const std::string& prefix, const ParamVisitor& v);

struct Model {
  ConformerConfig config;
  std::vector<BlockParams> blocks;
  std::optional<AdapterSet> adapters;
  HeadParams head;
};

Model make_model(const ConformerConfig& cfg, Index num_classes, std::uint64_t head_seed);

// Encoder (with any attached adapters) followed by the head; returns frame
// logits [T x num_classes].
Var model_forward(const Model& m, Var x, ActivationProbe* probe = nullptr);

// Canonical names: encoder/..., adapter/..., head/...
void visit_params(Model& m, const ParamVisitor& v);

std::map<std::string, Tensor*> named_params(Model& m);
long long model_param_count(Model& m);

enum class TrainMode { FullFinetune, Adapter, HeadOnly };

std::string to_string(TrainMode mode);
TrainMode parse_train_mode(const std::string& name);

// Disjoint split of all model parameters into frozen and trainable names.
struct ParamPartition {
  std::set<std::string> frozen;
  std::set<std::string> trainable;
};

ParamPartition make_partition(Model& m, TrainMode mode);

// Marks requires_grad per the partition and clears stale gradients.
void apply_partition(Model& m, const ParamPartition& partition);

struct TrainConfig {
  int steps = 300;
  int batch_size = 8;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  TrainMode mode = TrainMode::Adapter;
  std::uint64_t seed = 123;

  void validate() const;
};

struct AdamState {
  struct Moments {
    ArrayXd m;
    ArrayXd v;
  };
  std::map<std::string, Moments> slots;
  long long t = 0;
};

// One Adam update of a single tensor from its gradient; exposed so tests can
// pin the closed-form single-step behaviour.
void adam_update(Tensor& param, const ArrayXd& grad, AdamState::Moments& slot, long long t,
                 const TrainConfig& cfg);

struct Sample {
  Tensor input;  // [T x d]
  std::vector<int> labels;
};

enum class Split { Train, Eval };

struct SyntheticTaskConfig {
  std::uint64_t seed = 7;
  Index num_classes = 8;
  Index seq_len = 12;
  Index width = 32;
  int train_size = 256;
  int eval_size = 200;
};

// Frame-labelled sequences from a fixed random one-block conformer teacher.
// Fully deterministic under the seed; train and eval streams are disjoint.
class SyntheticTask {
 public:
  explicit SyntheticTask(SyntheticTaskConfig cfg);

  const SyntheticTaskConfig& config() const { return cfg_; }
  const std::vector<Sample>& samples(Split split) const {
    return split == Split::Train ? train_ : eval_;
  }
  const Model& teacher() const { return teacher_; }

 private:
  SyntheticTaskConfig cfg_;
  Model teacher_;
  std::vector<Sample> train_;
  std::vector<Sample> eval_;
};

struct StepMetrics {
  double loss = 0.0;
  double accuracy = 0.0;
};

// One optimizer step over the batch: cross-entropy forward, backward, Adam on
// the trainable set only. Frozen parameters are never written.
StepMetrics train_step(Model& m, const ParamPartition& partition,
                       const std::vector<const Sample*>& batch, AdamState& state,
                       const TrainConfig& cfg, int step_index = 0);

struct EvalMetrics {
  double loss = 0.0;
  double accuracy = 0.0;
};

EvalMetrics evaluate(const Model& m, const SyntheticTask& task, Split split);

struct TrainResult {
  std::vector<StepMetrics> curve;
  EvalMetrics final_eval;
};

// Runs cfg.steps steps with deterministic batch sampling; optionally appends
// step,loss,accuracy,mode rows to a CSV.
TrainResult train_loop(Model& m, const SyntheticTask& task, const TrainConfig& cfg,
                       const std::string& curve_csv = "");

struct ParadigmConfig {
  ConformerConfig encoder;
  SyntheticTaskConfig task_a;
  SyntheticTaskConfig task_b;
  TrainConfig pretrain;
  TrainConfig adapt;
  AdapterSpec adapter;
  std::uint64_t adapter_seed = 51;
  std::uint64_t head_seed_a = 61;
  std::uint64_t head_seed_b = 62;
};

ParadigmConfig default_paradigm_config();

struct ParadigmReport {
  EvalMetrics pretrain_a;
  EvalMetrics adapter_b;
  EvalMetrics head_only_b;
  EvalMetrics full_finetune_b;
  // Eval on task A after adapter training, with adapters detached and the
  // original head restored; the frozen encoder makes this exact.
  EvalMetrics forgetting_probe_a;
};

// Pretrains on task A, then runs the three task-B configurations (adapters,
// head-only, full finetune) from the same pretrained encoder.
ParadigmReport pretrain_then_adapt(const ParadigmConfig& cfg);

}  // namespace tpa
