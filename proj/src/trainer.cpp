#include "glora/trainer.hpp"

#include <chrono>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "glora/metrics.hpp"
#include "glora/rng.hpp"

namespace glora {

void TrainConfig::validate() const {
  if (lr <= 0) throw std::invalid_argument("learning rate must be positive");
  if (steps < 0) throw std::invalid_argument("steps must be >= 0");
  if (batch_size < 1) throw std::invalid_argument("batch size must be >= 1");
  if (beta1 < 0 || beta1 >= 1 || beta2 < 0 || beta2 >= 1)
    throw std::invalid_argument("Adam betas must lie in [0,1)");
  if (eps <= 0) throw std::invalid_argument("Adam epsilon must be positive");
  if (log_every < 1) throw std::invalid_argument("log_every must be >= 1");
}

std::string TrainReport::to_text() const {
  std::ostringstream os;
  os.precision(12);
  for (const TrainLogRow& r : log)
    os << "step " << r.step << "\tloss " << r.loss << "\telapsed_ms " << r.elapsed_ms << "\n";
  os << "final\tloss " << final_loss << "\ttrainable " << trainable_params << "\tseed " << seed
     << "\twall_s " << wall_seconds << "\n";
  return os.str();
}

void adam_step(std::map<std::string, Tensor>& params, const GradTable& grads, AdamState& state,
               const TrainConfig& cfg) {
  double sq_norm = 0.0;
  for (const auto& [name, g] : grads.entries()) {
    auto it = params.find(name);
    if (it == params.end()) throw std::invalid_argument("gradient for unknown parameter " + name);
    if (it->second.shape() != g.shape())
      throw std::invalid_argument("gradient shape mismatch for " + name + ": " +
                                  shape_str(g.shape()) + " vs " + shape_str(it->second.shape()));
    for (double x : g.values()) sq_norm += x * x;
  }
  double factor = 1.0;
  double norm = std::sqrt(sq_norm);
  if (cfg.clip_norm > 0 && norm > cfg.clip_norm) factor = cfg.clip_norm / norm;

  state.t += 1;
  double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.t));
  double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.t));

  for (const auto& [name, g] : grads.entries()) {
    Tensor& p = params.at(name);
    size_t n = static_cast<size_t>(p.size());
    AdamState::Slot& slot = state.slots[name];
    if (slot.m.empty()) {
      slot.m.assign(n, 0.0);
      slot.v.assign(n, 0.0);
    }
    std::vector<double> next = p.values();
    const std::vector<double>& gv = g.values();
    for (size_t i = 0; i < n; ++i) {
      double gi = gv[i] * factor;
      slot.m[i] = cfg.beta1 * slot.m[i] + (1.0 - cfg.beta1) * gi;
      slot.v[i] = cfg.beta2 * slot.v[i] + (1.0 - cfg.beta2) * gi * gi;
      double mhat = slot.m[i] / bc1;
      double vhat = slot.v[i] / bc2;
      next[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
    }
    p = Tensor::from_values(p.shape(), std::move(next));
  }
}

namespace {

struct ParamSet {
  // names and current values of the trainable set
  std::map<std::string, Tensor> values;
};

// The env decides what trains: it binds exactly the trainable set as graph
// leaves, so gradients stop at everything else.
TrainReport run_training(const SeqModel& model, const Adapter* adapter, ParamSet& set,
                         const std::vector<Utterance>& corpus, const TrainConfig& cfg) {
  cfg.validate();
  if (corpus.empty()) throw std::invalid_argument("train: empty corpus");

  TrainReport report;
  report.seed = cfg.seed;
  auto t0 = std::chrono::steady_clock::now();
  auto elapsed_ms = [&t0] {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  };

  AdamState state;
  Prng rng(cfg.seed, 0x747261696eULL /* "train" */);
  size_t n = corpus.size();
  double loss_value = 0.0;

  for (int step = 0; step < cfg.steps; ++step) {
    std::vector<size_t> batch;
    if (static_cast<size_t>(cfg.batch_size) >= n) {
      for (size_t i = 0; i < n; ++i) batch.push_back(i);
    } else {
      for (int b = 0; b < cfg.batch_size; ++b) batch.push_back(rng.below(n));
    }

    Graph g;
    ParamMap env;
    for (const auto& [name, value] : set.values) env[name] = g.param(name, value);

    Tensor total;
    for (size_t idx : batch) {
      const Utterance& u = corpus[idx];
      Tensor loss = forward_loss(model, u.features, u.targets, adapter, &env);
      total = total.defined() ? ops::add(total, loss) : loss;
    }
    total = ops::scale(total, 1.0 / static_cast<double>(batch.size()));
    loss_value = total.value();
    if (!std::isfinite(loss_value))
      throw std::runtime_error("training aborted: non-finite loss at step " + std::to_string(step));

    GradTable grads = g.backward(total);
    adam_step(set.values, grads, state, cfg);

    if (step % cfg.log_every == 0 || step == cfg.steps - 1)
      report.log.push_back({step, loss_value, elapsed_ms()});
  }

  report.final_loss = loss_value;
  report.wall_seconds = elapsed_ms() / 1000.0;
  return report;
}

}  // namespace

TrainReport train_full(SeqModel& model, const std::vector<Utterance>& corpus,
                       const TrainConfig& cfg) {
  model.unfreeze_all();
  ParamSet set;
  set.values = model.params();
  TrainReport report = run_training(model, nullptr, set, corpus, cfg);
  for (auto& [name, value] : set.values) model.set_param(name, std::move(value));
  model.freeze_all();
  report.trainable_params = model.count_params(false);
  return report;
}

TrainReport train_adapter(const SeqModel& base, Adapter& adapter,
                          const std::vector<Utterance>& corpus, const TrainConfig& cfg) {
  ParamSet set;
  set.values = adapter.params();
  TrainReport report = run_training(base, &adapter, set, corpus, cfg);
  for (auto& [name, value] : set.values) adapter.set_param(name, std::move(value));
  report.trainable_params = adapter.count_params();
  return report;
}

double token_error_rate(const SeqModel& model, const std::vector<Utterance>& corpus,
                        const Adapter* adapter) {
  if (corpus.empty()) throw std::invalid_argument("token_error_rate: empty corpus");
  int64_t errors = 0, total = 0;
  for (const Utterance& u : corpus) {
    std::vector<int> hyp = greedy_decode(model, u.features, adapter);
    errors += edit_distance_ids(u.targets, hyp).total();
    total += static_cast<int64_t>(u.targets.size());
  }
  return static_cast<double>(errors) / static_cast<double>(total);
}

}  // namespace glora
