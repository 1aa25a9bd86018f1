#include "sts/train.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "sts/checkpoint.hpp"

namespace sts::train {

double loss_discriminator(double l_real, double l_fake, double k) {
  if (l_real < 0.0 || l_fake < 0.0) {
    throw ValidationError("loss_discriminator: reconstruction losses must be >= 0");
  }
  if (!(k >= 0.0 && k <= 1.0)) {
    throw ValidationError("loss_discriminator: k must lie in [0, 1]");
  }
  return l_real - k * l_fake;
}

double loss_generator(double l_fake, const MatF* y, const MatF& y_hat, double beta) {
  if (l_fake < 0.0) throw ValidationError("loss_generator: L_fake must be >= 0");
  if (y == nullptr) return l_fake;
  if (y->rows() != y_hat.rows() || y->cols() != y_hat.cols()) {
    throw ValidationError("loss_generator: target and output shapes differ");
  }
  return l_fake + beta * static_cast<double>(net::mean_abs_diff<float>(*y, y_hat));
}

BEGANState update_k(const BEGANState& state, double l_real, double l_fake) {
  if (l_real < 0.0 || l_fake < 0.0) {
    throw ValidationError("update_k: reconstruction losses must be >= 0");
  }
  BEGANState next = state;
  next.k = std::clamp(state.k + state.lambda * (state.gamma * l_real - l_fake), 0.0, 1.0);
  next.step = state.step + 1;
  return next;
}

void LossHistory::push(double l_real, double l_fake) {
  sum_real_ += l_real;
  sum_fake_ += l_fake;
  ++n_;
}

double LossHistory::diversity_ratio() const {
  if (n_ == 0) throw ValidationError("diversity ratio: empty history");
  if (sum_real_ <= 0.0) throw ValidationError("diversity ratio: mean real loss is zero");
  return sum_fake_ / sum_real_;
}

void TrainConfig::validate() const {
  if (steps <= 0) throw ConfigError("steps must be > 0");
  if (batch_size <= 0) throw ConfigError("batch_size must be > 0");
  if (lr <= 0.0) throw ConfigError("lr must be > 0");
  if (!(lr_decay > 0.0 && lr_decay <= 1.0)) throw ConfigError("lr_decay must be in (0, 1]");
  if (decay_interval <= 0) throw ConfigError("decay_interval must be > 0");
  if (lambda <= 0.0) throw ConfigError("lambda must be > 0");
  if (!(k0 >= 0.0 && k0 <= 1.0)) throw ConfigError("k0 must be in [0, 1]");
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw ConfigError("gamma must be in [0, 1]");
  if (beta < 0.0) throw ConfigError("beta must be >= 0");
  if (segment_frames <= 0 || segment_frames % 8 != 0) {
    throw ConfigError("segment_frames must be a positive multiple of 8");
  }
  if (checkpoint_interval <= 0) throw ConfigError("checkpoint_interval must be > 0");
  if (unpaired_every < 0) throw ConfigError("unpaired_every must be >= 0");
}

std::map<std::string, std::string> TrainConfig::fields() const {
  char buf[64];
  auto fmt = [&buf](double v) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return std::string(buf);
  };
  return {
      {"steps", std::to_string(steps)},
      {"batch_size", std::to_string(batch_size)},
      {"lr", fmt(lr)},
      {"lr_decay", fmt(lr_decay)},
      {"decay_interval", std::to_string(decay_interval)},
      {"lambda", fmt(lambda)},
      {"k0", fmt(k0)},
      {"gamma", fmt(gamma)},
      {"beta", fmt(beta)},
      {"segment_frames", std::to_string(segment_frames)},
      {"seed", std::to_string(seed)},
      {"checkpoint_interval", std::to_string(checkpoint_interval)},
      {"unpaired_every", std::to_string(unpaired_every)},
  };
}

const char* StepMetrics::csv_header() { return "step,L_D,L_G,L_real,L_fake,k,lr"; }

std::string StepMetrics::csv_row() const {
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%lld,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g", step, l_d, l_g,
                l_real, l_fake, k, lr);
  return buf;
}

void Trainer::Adam::init(std::vector<net::ParamRef<float>> params) {
  t = 0;
  m.clear();
  v.clear();
  for (const auto& p : params) {
    m.push_back(MatF::Zero(p.value->rows(), p.value->cols()));
    v.push_back(MatF::Zero(p.value->rows(), p.value->cols()));
  }
}

void Trainer::Adam::step(std::vector<net::ParamRef<float>> params, double lr) {
  ++t;
  const float b1 = static_cast<float>(beta1);
  const float b2 = static_cast<float>(beta2);
  const float corr1 = 1.0f - std::pow(b1, static_cast<float>(t));
  const float corr2 = 1.0f - std::pow(b2, static_cast<float>(t));
  const float rate = static_cast<float>(lr);
  const float e = static_cast<float>(eps);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const MatF& g = *params[i].grad;
    m[i] = b1 * m[i] + (1.0f - b1) * g;
    v[i] = (b2 * v[i]).array() + (1.0f - b2) * g.array().square();
    const auto m_hat = m[i].array() / corr1;
    const auto v_hat = v[i].array() / corr2;
    params[i].value->array() -= rate * m_hat / (v_hat.sqrt() + e);
  }
}

Trainer::Trainer(const net::ModelConfig& model_cfg, const TrainConfig& train_cfg)
    : model_cfg_(model_cfg),
      cfg_(train_cfg),
      gen_(model_cfg, train_cfg.seed),
      disc_(model_cfg, train_cfg.seed ^ 0x9e3779b97f4a7c15ull) {
  cfg_.validate();
  state_.k = cfg_.k0;
  state_.gamma = cfg_.gamma;
  state_.lambda = cfg_.lambda;
  adam_g_.init(gen_.params());
  adam_d_.init(disc_.params());
}

double Trainer::lr_for_step(long long step) const {
  const long long intervals = (step - 1) / cfg_.decay_interval;
  return cfg_.lr * std::pow(cfg_.lr_decay, static_cast<double>(intervals));
}

StepMetrics Trainer::step(const Batch& batch) {
  if (batch.items.empty()) throw ValidationError("train step: empty batch");
  const long long step_no = state_.step + 1;
  const double lr = lr_for_step(step_no);
  const double inv_b = 1.0 / batch.items.size();
  const float k = static_cast<float>(state_.k);

  for (const auto& item : batch.items) {
    if (!item.x.allFinite() || !item.y.allFinite()) {
      throw ValidationError("train step " + std::to_string(step_no) +
                            ": non-finite batch tensors (" + item.id + ")");
    }
  }

  // discriminator update: minimize L_real - k * L_fake
  disc_.zero_grads();
  double l_real = 0.0, l_fake_d = 0.0;
  scratch_fakes_.clear();
  for (const auto& item : batch.items) {
    scratch_fakes_.push_back(gen_.generate(item.x, item.contour));
    auto real = disc_.discriminate(item.y);
    l_real += real.loss * inv_b;
    disc_.loss_backward(static_cast<float>(inv_b), true);
    auto fake = disc_.discriminate(scratch_fakes_.back());
    l_fake_d += fake.loss * inv_b;
    disc_.loss_backward(static_cast<float>(-k * inv_b), true);
  }
  adam_d_.step(disc_.params(), lr);

  // generator update against the refreshed discriminator
  gen_.zero_grads();
  double l_fake = 0.0, l1 = 0.0;
  for (const auto& item : batch.items) {
    const MatF y_hat = gen_.generate(item.x, item.contour);
    auto fake = disc_.discriminate(y_hat);
    l_fake += fake.loss * inv_b;
    MatF grad = disc_.loss_backward(static_cast<float>(inv_b), false);
    if (batch.paired) {
      l1 += static_cast<double>(net::mean_abs_diff<float>(y_hat, item.y)) * inv_b;
      grad += static_cast<float>(cfg_.beta * inv_b) * net::mean_abs_diff_grad<float>(y_hat, item.y);
    }
    gen_.backward(grad, true);
  }
  adam_g_.step(gen_.params(), lr);

  StepMetrics metrics;
  metrics.step = step_no;
  metrics.l_real = l_real;
  metrics.l_fake = l_fake;
  metrics.l_d = loss_discriminator(l_real, l_fake_d, state_.k);
  metrics.l_g = batch.paired ? l_fake + cfg_.beta * l1 : l_fake;
  metrics.lr = lr;
  if (!std::isfinite(metrics.l_d) || !std::isfinite(metrics.l_g)) {
    std::string ids;
    for (const auto& item : batch.items) ids += (ids.empty() ? "" : " ") + item.id;
    throw ValidationError("train step " + std::to_string(step_no) +
                          ": non-finite loss (batch: " + ids + ")");
  }

  state_ = update_k(state_, l_real, l_fake);
  history_.push(l_real, l_fake);
  metrics.k = state_.k;
  return metrics;
}

nlohmann::json Trainer::meta() const {
  nlohmann::json j;
  j["step"] = state_.step;
  j["k"] = state_.k;
  j["adam_g_t"] = adam_g_.t;
  j["adam_d_t"] = adam_d_.t;
  j["model"] = model_cfg_.fields();
  j["train"] = cfg_.fields();
  std::string canon;
  for (const auto& [key, value] : model_cfg_.fields()) canon += key + "=" + value + "\n";
  for (const auto& [key, value] : cfg_.fields()) canon += key + "=" + value + "\n";
  char hex[32];
  std::snprintf(hex, sizeof(hex), "%016llx",
                static_cast<unsigned long long>(fnv1a64(canon)));
  j["config_hash"] = hex;
  return j;
}

void Trainer::save(const std::string& path, const std::string& loop_rng_state) const {
  nlohmann::json j = meta();
  j["loop_rng"] = loop_rng_state;

  std::vector<NamedTensorView> tensors;
  auto add_net = [&tensors](const std::string& prefix, auto params) {
    for (const auto& p : params) tensors.push_back({prefix + "/" + p.name, p.value});
  };
  auto add_adam = [&tensors](const std::string& prefix, const Adam& adam, auto params) {
    for (std::size_t i = 0; i < params.size(); ++i) {
      tensors.push_back({prefix + "/m/" + params[i].name, &adam.m[i]});
      tensors.push_back({prefix + "/v/" + params[i].name, &adam.v[i]});
    }
  };
  auto& self = const_cast<Trainer&>(*this);  // params() is logically const
  add_net("g", self.gen_.params());
  add_net("d", self.disc_.params());
  add_adam("opt_g", adam_g_, self.gen_.params());
  add_adam("opt_d", adam_d_, self.disc_.params());
  save_checkpoint(path, j, tensors);
}

namespace {

void require_matching_config(const nlohmann::json& saved, const std::string& section,
                             const std::map<std::string, std::string>& current) {
  if (!saved.contains(section)) throw ValidationError("checkpoint missing '" + section + "' config");
  std::vector<std::string> diffs;
  for (const auto& [key, value] : current) {
    const std::string stored =
        saved[section].contains(key) ? saved[section][key].get<std::string>() : "<absent>";
    if (stored != value) diffs.push_back(key + " (checkpoint " + stored + ", current " + value + ")");
  }
  if (!diffs.empty()) {
    std::string msg = "checkpoint/" + section + " config mismatch:";
    for (const auto& d : diffs) msg += " " + d;
    throw ValidationError(msg);
  }
}

}  // namespace

std::string Trainer::restore(const std::string& path) {
  Checkpoint ckpt = load_checkpoint(path);
  require_matching_config(ckpt.meta, "model", model_cfg_.fields());
  // resuming must not silently change the schedule; seed/steps may differ
  auto train_now = cfg_.fields();
  train_now.erase("steps");
  train_now.erase("seed");
  require_matching_config(ckpt.meta, "train", train_now);

  auto load_net = [&ckpt](const std::string& prefix, auto params) {
    for (auto& p : params) {
      const MatF& t = ckpt.tensor(prefix + "/" + p.name);
      if (t.rows() != p.value->rows() || t.cols() != p.value->cols()) {
        throw ValidationError("checkpoint tensor shape mismatch for " + p.name);
      }
      *p.value = t;
    }
  };
  auto load_adam = [&ckpt](const std::string& prefix, Adam& adam, auto params) {
    for (std::size_t i = 0; i < params.size(); ++i) {
      adam.m[i] = ckpt.tensor(prefix + "/m/" + params[i].name);
      adam.v[i] = ckpt.tensor(prefix + "/v/" + params[i].name);
    }
  };
  load_net("g", gen_.params());
  load_net("d", disc_.params());
  load_adam("opt_g", adam_g_, gen_.params());
  load_adam("opt_d", adam_d_, disc_.params());
  adam_g_.t = ckpt.meta.at("adam_g_t").get<long long>();
  adam_d_.t = ckpt.meta.at("adam_d_t").get<long long>();
  state_.step = ckpt.meta.at("step").get<long long>();
  state_.k = ckpt.meta.at("k").get<double>();
  return ckpt.meta.value("loop_rng", std::string());
}

namespace {

MatF pad_cols(const MatF& m, int target, float fill) {
  if (m.cols() >= target) return m;
  MatF out = MatF::Constant(m.rows(), target, fill);
  out.leftCols(m.cols()) = m;
  return out;
}

MatF pad_contour(const MatF& c, int target) {
  if (c.cols() >= target) return c;
  MatF out = MatF::Zero(c.rows(), target);
  out.leftCols(c.cols()) = c;
  for (int t = static_cast<int>(c.cols()); t < target; ++t) out(melody::kRestRow, t) = 1.0f;
  return out;
}

Batch make_batch(const std::vector<data::PairedExample>& pool, bool paired, int batch_size,
                 int segment, Rng& rng) {
  std::vector<std::size_t> picks;
  if (static_cast<std::size_t>(batch_size) <= pool.size()) {
    std::vector<std::size_t> order(pool.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    for (int i = 0; i < batch_size; ++i) {
      const std::size_t j =
          static_cast<std::size_t>(uniform_int(rng, i, static_cast<std::int64_t>(order.size()) - 1));
      std::swap(order[i], order[j]);
      picks.push_back(order[i]);
    }
  } else {
    for (int i = 0; i < batch_size; ++i) {
      picks.push_back(static_cast<std::size_t>(
          uniform_int(rng, 0, static_cast<std::int64_t>(pool.size()) - 1)));
    }
  }

  Batch batch;
  batch.paired = paired;
  for (std::size_t idx : picks) {
    const data::PairedExample& ex = pool[idx];
    const int frames = ex.singing.frames();
    int start = 0;
    if (frames > segment) start = static_cast<int>(uniform_int(rng, 0, frames - segment));
    BatchItem item;
    const float fill = ex.speech.floor_value();
    if (frames >= segment) {
      item.x = ex.speech.values.middleCols(start, segment);
      item.y = ex.singing.values.middleCols(start, segment);
      item.contour = ex.contour.onehot.middleCols(start, segment);
    } else {
      item.x = pad_cols(ex.speech.values, segment, fill);
      item.y = pad_cols(ex.singing.values, segment, fill);
      item.contour = pad_contour(ex.contour.onehot, segment);
    }
    item.id = ex.id + "@" + std::to_string(start);
    batch.items.push_back(std::move(item));
  }
  return batch;
}

std::string rng_to_string(const Rng& rng) {
  std::ostringstream ss;
  ss << rng;
  return ss.str();
}

void rng_from_string(Rng& rng, const std::string& text) {
  std::istringstream ss(text);
  ss >> rng;
  if (ss.fail()) throw ValidationError("cannot restore RNG state from checkpoint");
}

}  // namespace

TrainResult train_loop(const net::ModelConfig& model_cfg, const TrainConfig& cfg,
                       const std::vector<data::PairedExample>& paired,
                       const std::vector<data::PairedExample>& unpaired,
                       const std::string& run_dir, const std::string& resume_checkpoint,
                       const std::function<bool()>& should_stop,
                       const std::function<void(const StepMetrics&)>& on_step) {
  cfg.validate();
  if (paired.empty()) throw ConfigError("training requires at least one paired example");
  std::filesystem::create_directories(run_dir);

  Trainer trainer(model_cfg, cfg);
  Rng loop_rng(cfg.seed ^ 0xa5a5a5a55a5a5a5aull);
  if (!resume_checkpoint.empty()) {
    const std::string rng_state = trainer.restore(resume_checkpoint);
    if (!rng_state.empty()) rng_from_string(loop_rng, rng_state);
  }

  const std::string csv_path = run_dir + "/metrics.csv";
  const bool fresh_csv = !std::filesystem::exists(csv_path) ||
                         std::filesystem::file_size(csv_path) == 0;
  std::ofstream csv(csv_path, std::ios::app);
  if (!csv) throw ValidationError("cannot open metrics log: " + csv_path);
  if (fresh_csv) csv << StepMetrics::csv_header() << "\n";

  auto checkpoint_path = [&run_dir](long long step) {
    char name[64];
    std::snprintf(name, sizeof(name), "/ckpt_%08lld.stsc", step);
    return run_dir + name;
  };

  TrainResult result;
  result.metrics_csv = csv_path;
  long long step = trainer.state().step;
  result.last_step = step;
  while (step < cfg.steps) {
    const bool use_unpaired = !unpaired.empty() && cfg.unpaired_every > 0 &&
                              (step + 1) % cfg.unpaired_every == 0;
    Batch batch = make_batch(use_unpaired ? unpaired : paired, !use_unpaired, cfg.batch_size,
                             cfg.segment_frames, loop_rng);
    const StepMetrics metrics = trainer.step(batch);
    step = metrics.step;
    csv << metrics.csv_row() << "\n";
    csv.flush();
    result.last_step = step;
    result.last_metrics = metrics;
    if (on_step) on_step(metrics);

    const bool stop = should_stop && should_stop();
    if (step % cfg.checkpoint_interval == 0 || step == cfg.steps || stop) {
      result.final_checkpoint = checkpoint_path(step);
      trainer.save(result.final_checkpoint, rng_to_string(loop_rng));
    }
    if (stop) break;
  }
  if (result.final_checkpoint.empty()) {
    result.final_checkpoint = checkpoint_path(step);
    trainer.save(result.final_checkpoint, rng_to_string(loop_rng));
  }
  return result;
}

}  // namespace sts::train
