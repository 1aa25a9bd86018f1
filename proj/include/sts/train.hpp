#ifndef STS_TRAIN_HPP
#define STS_TRAIN_HPP

#include <deque>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "sts/data.hpp"
#include "sts/net/model.hpp"

namespace sts::train {

/// Equilibrium controller: k is clamped to [0, 1] after every update; gamma
/// and lambda stay fixed for a run.
struct BEGANState {
  double k = 0.0;
  double gamma = 0.0;
  double lambda = 0.01;
  long long step = 0;
};

/// L_real - k * L_fake. Reconstruction losses must be nonnegative.
double loss_discriminator(double l_real, double l_fake, double k);

/// L_fake + beta * mean|y - y_hat| when a target is given; L_fake alone
/// otherwise (the unpaired case).
double loss_generator(double l_fake, const MatF* y, const MatF& y_hat, double beta);

/// k' = clamp(k + lambda * (gamma * L_real - L_fake), 0, 1); increments step.
BEGANState update_k(const BEGANState& state, double l_real, double l_fake);

/// Running-mean ratio E[L_fake] / E[L_real], for monitoring only.
class LossHistory {
 public:
  void push(double l_real, double l_fake);
  double diversity_ratio() const;
  std::size_t size() const { return n_; }

 private:
  double sum_real_ = 0.0, sum_fake_ = 0.0;
  std::size_t n_ = 0;
};

struct TrainConfig {
  long long steps = 20000;
  int batch_size = 32;
  double lr = 0.001;
  double lr_decay = 0.99;
  int decay_interval = 100;
  double lambda = 0.01;
  double k0 = 0.0;
  double gamma = 0.0;
  double beta = 0.5;
  int segment_frames = 256;
  std::uint64_t seed = 0;
  long long checkpoint_interval = 1000;
  int unpaired_every = 2;  // run an unpaired step every Nth step; 0 disables

  void validate() const;
  std::map<std::string, std::string> fields() const;
};

struct StepMetrics {
  long long step = 0;
  double l_d = 0.0, l_g = 0.0, l_real = 0.0, l_fake = 0.0, k = 0.0, lr = 0.0;

  std::string csv_row() const;
  static const char* csv_header();  // "step,L_D,L_G,L_real,L_fake,k,lr"
};

struct BatchItem {
  MatF x;        // generator input (log-mel)
  MatF contour;  // 128 x frames one-hot
  MatF y;        // target / real sample for the discriminator
  std::string id;
};

struct Batch {
  bool paired = true;
  std::vector<BatchItem> items;
};

/// Owns the generator/discriminator pair, their Adam states, and the
/// equilibrium controller. step() runs one discriminator update, one
/// generator update (gradients never cross between the two parameter sets),
/// then the k update.
class Trainer {
 public:
  Trainer(const net::ModelConfig& model_cfg, const TrainConfig& train_cfg);

  StepMetrics step(const Batch& batch);

  net::GeneratorF& generator() { return gen_; }
  net::DiscriminatorF& discriminator() { return disc_; }
  const BEGANState& state() const { return state_; }
  const LossHistory& history() const { return history_; }
  double lr_for_step(long long step) const;

  /// Serializes parameters, optimizer moments, and controller state.
  void save(const std::string& path, const std::string& loop_rng_state) const;
  /// Restores a checkpoint; the model/train configs must match the ones this
  /// trainer was built with (differing keys are named in the error).
  /// Returns the saved loop RNG state string.
  std::string restore(const std::string& path);

  nlohmann::json meta() const;

 private:
  struct Adam {
    double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    long long t = 0;
    std::vector<MatF> m, v;

    void init(std::vector<net::ParamRef<float>> params);
    void step(std::vector<net::ParamRef<float>> params, double lr);
  };

  net::ModelConfig model_cfg_;
  TrainConfig cfg_;
  net::GeneratorF gen_;
  net::DiscriminatorF disc_;
  Adam adam_g_, adam_d_;
  BEGANState state_;
  LossHistory history_;
  mutable std::vector<MatF> scratch_fakes_;
};

struct TrainResult {
  std::string final_checkpoint;
  std::string metrics_csv;
  long long last_step = 0;
  StepMetrics last_metrics;
};

/// Runs the alternating paired/unpaired schedule, appends one CSV row per
/// step to <run_dir>/metrics.csv, checkpoints periodically, and resumes
/// bit-exactly from a checkpoint (parameters, optimizer, controller, and the
/// batch-sampling RNG are all restored). `should_stop` is polled every step;
/// when it returns true the loop writes a final checkpoint and returns early.
TrainResult train_loop(const net::ModelConfig& model_cfg, const TrainConfig& cfg,
                       const std::vector<data::PairedExample>& paired,
                       const std::vector<data::PairedExample>& unpaired,
                       const std::string& run_dir, const std::string& resume_checkpoint = "",
                       const std::function<bool()>& should_stop = {},
                       const std::function<void(const StepMetrics&)>& on_step = {});

}  // namespace sts::train

#endif  // STS_TRAIN_HPP
