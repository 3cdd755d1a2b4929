#pragma once

// Actor-critic PPO with a scalar sigmoid-squashed Gaussian action. The actor
// emits the pre-squash mean; exploration adds fixed-std noise before the
// sigmoid and the raw action in (0, 1) is mapped onto the environment's
// admissible power interval.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "v2g/csv.hpp"
#include "v2g/env.hpp"
#include "v2g/error.hpp"
#include "v2g/json_util.hpp"
#include "v2g/nn.hpp"
#include "v2g/rng.hpp"

namespace v2g::ppo {

using nn::Vec;

struct PpoHyper {
  double lr_actor = 1e-6;
  double lr_critic = 2e-6;
  double gamma = 0.95;
  double gae_lambda = 1.0;
  double clip = 0.2;
  int update_step = 10;
  int batch_size = 32;
  long long episodes = 300000;
  int episode_length = 20;
  double action_std = 0.3;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::vector<int> hidden{64, 64};
  int rollout_episodes = 8;
  int epochs = 20;
  double weight_limit = 1e6;
  long long checkpoint_every = 0;  // 0 = only final and best
  // Also subtract, per time step, the leave-one-out mean advantage of the
  // other episodes in the rollout.
  bool step_baseline = true;

  void validate() const {
    if (!(clip > 0.0 && clip < 1.0)) throw ConfigError("ppo.clip must lie in (0, 1)");
    if (!(gamma > 0.0 && gamma < 1.0)) throw ConfigError("ppo.gamma must lie in (0, 1)");
    if (!(gae_lambda >= 0.0 && gae_lambda <= 1.0))
      throw ConfigError("ppo.gae_lambda must lie in [0, 1]");
    if (!(lr_actor > 0.0 && lr_critic > 0.0)) throw ConfigError("learning rates must be positive");
    if (!(action_std > 0.0)) throw ConfigError("ppo.action_std must be positive");
    if (update_step < 1 || epochs < 1 || rollout_episodes < 1 || episodes < 0)
      throw ConfigError("ppo loop counts must be positive");
    if (batch_size < 1 || batch_size > rollout_episodes * episode_length)
      throw ConfigError("ppo.batch_size must lie in [1, rollout size]");
    for (int h : hidden)
      if (h < 1) throw ConfigError("hidden layer widths must be positive");
  }
};

inline void to_json(json& j, const PpoHyper& h) {
  j = json{{"lr_actor", h.lr_actor},         {"lr_critic", h.lr_critic},
           {"gamma", h.gamma},               {"gae_lambda", h.gae_lambda},
           {"clip", h.clip},                 {"update_step", h.update_step},
           {"batch_size", h.batch_size},     {"episodes", h.episodes},
           {"episode_length", h.episode_length}, {"action_std", h.action_std},
           {"adam_beta1", h.adam_beta1},     {"adam_beta2", h.adam_beta2},
           {"adam_eps", h.adam_eps},         {"hidden", h.hidden},
           {"rollout_episodes", h.rollout_episodes}, {"epochs", h.epochs},
           {"weight_limit", h.weight_limit}, {"checkpoint_every", h.checkpoint_every},
           {"step_baseline", h.step_baseline}};
}

inline void read_hyper(const json& j, PpoHyper& h, const std::string& where = "ppo") {
  StrictObject o(j, where);
  o.get("lr_actor", h.lr_actor);
  o.get("lr_critic", h.lr_critic);
  o.get("gamma", h.gamma);
  o.get("gae_lambda", h.gae_lambda);
  o.get("clip", h.clip);
  o.get("update_step", h.update_step);
  o.get("batch_size", h.batch_size);
  o.get("episodes", h.episodes);
  o.get("episode_length", h.episode_length);
  o.get("action_std", h.action_std);
  o.get("adam_beta1", h.adam_beta1);
  o.get("adam_beta2", h.adam_beta2);
  o.get("adam_eps", h.adam_eps);
  o.get("hidden", h.hidden);
  o.get("rollout_episodes", h.rollout_episodes);
  o.get("epochs", h.epochs);
  o.get("weight_limit", h.weight_limit);
  o.get("checkpoint_every", h.checkpoint_every);
  o.get("step_baseline", h.step_baseline);
  o.finish();
}

// Fixed affine observation scaling, kept with the policy.
struct ObsScale {
  double load_kw = 3200.0;
  double energy_kwh = 1.0;
  double variance = 1e6;
  double tariff = 0.1;

  static ObsScale for_env(const env::Environment& e) {
    ObsScale s;
    s.load_kw = e.config().transformer_limit_kw();
    double cap = 0.0;
    for (const auto& ev : e.fleet()) cap += ev.capacity_kwh();
    s.energy_kwh = std::max(cap, 1.0);
    return s;
  }

  Vec apply(const env::EnvState& st) const {
    Vec x(env::kStateDim);
    for (int i = 0; i < env::kHistory; ++i) x(i) = st.load_history[i] / load_kw;
    x(env::kHistory) = st.eva_energy / energy_kwh;
    x(env::kHistory + 1) = st.variance / variance;
    x(env::kHistory + 2) = st.tariff / tariff;
    x(env::kHistory + 3) = st.energy_delta / energy_kwh;
    return x;
  }
};

struct Policy {
  PpoHyper hyper;
  ObsScale obs;
  nn::Mlp actor;
  nn::Mlp critic;
  nn::Adam actor_opt;
  nn::Adam critic_opt;
  long long episode = 0;
  std::string rng_state;
};

inline std::vector<int> layer_sizes(const PpoHyper& h) {
  std::vector<int> sizes{env::kStateDim};
  sizes.insert(sizes.end(), h.hidden.begin(), h.hidden.end());
  sizes.push_back(1);
  return sizes;
}

inline Policy make_policy(const PpoHyper& hyper, const ObsScale& obs, std::uint64_t seed) {
  hyper.validate();
  Policy p;
  p.hyper = hyper;
  p.obs = obs;
  p.actor = nn::Mlp(layer_sizes(hyper));
  p.critic = nn::Mlp(layer_sizes(hyper));
  std::mt19937_64 rng(derive_seed(seed, stream::init));
  p.actor.init(rng, nn::InitScheme::he_normal);
  p.critic.init(rng, nn::InitScheme::he_normal);
  p.actor_opt = nn::Adam({hyper.lr_actor, hyper.adam_beta1, hyper.adam_beta2, hyper.adam_eps},
                         p.actor.num_params());
  p.critic_opt = nn::Adam({hyper.lr_critic, hyper.adam_beta1, hyper.adam_beta2, hyper.adam_eps},
                          p.critic.num_params());
  return p;
}

inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline double softplus(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

inline double normal_log_density(double u, double mean, double std) {
  const double z = (u - mean) / std;
  return -0.5 * z * z - std::log(std) - 0.5 * std::log(2.0 * std::numbers::pi);
}

// Log density of a = sigmoid(u) where u ~ N(mean, std).
inline double log_prob(double u, double mean, double std) {
  return normal_log_density(u, mean, std) + softplus(-u) + softplus(u);
}

// Pre-squash mean of the policy.
inline double actor_pre(const nn::Mlp& actor, const Vec& x, nn::Mlp::Cache* cache = nullptr) {
  const double m = actor.forward_scalar(x, cache);
  if (!std::isfinite(m)) throw DivergenceError("actor produced a non-finite output");
  return m;
}

// Squashed mean action in (0, 1).
inline double actor_forward(const nn::Mlp& actor, const Vec& x) {
  return sigmoid(actor_pre(actor, x));
}

inline double critic_forward(const nn::Mlp& critic, const Vec& x,
                             nn::Mlp::Cache* cache = nullptr) {
  const double v = critic.forward_scalar(x, cache);
  if (!std::isfinite(v)) throw DivergenceError("critic produced a non-finite output");
  return v;
}

struct ActionSample {
  double pre = 0.0;  // u
  double raw = 0.5;  // sigmoid(u)
  double log_prob = 0.0;
};

template <typename Rng>
ActionSample sample_action(double mean_pre, double std, Rng& rng) {
  std::normal_distribution<double> unit(0.0, 1.0);
  ActionSample a;
  a.pre = mean_pre + std * unit(rng);
  a.raw = sigmoid(a.pre);
  a.log_prob = log_prob(a.pre, mean_pre, std);
  return a;
}

inline double scale_action(double raw, const fleet::PowerBounds& b) {
  return b.min + raw * (b.max - b.min);
}

struct Step {
  Vec obs;
  double pre = 0.0;
  double raw = 0.0;
  double power = 0.0;
  double log_prob = 0.0;
  double reward = 0.0;
  double value = 0.0;
  bool done = false;
};

using Trajectory = std::vector<Step>;

struct EpisodeSummary {
  long long episode = 0;
  double reward = 0.0;
  double f1 = 0.0;
  double f2 = 0.0;
  double f3 = 0.0;
  double sigma2 = 0.0;  // load variance of the window at the end of the day
};

struct Returns {
  std::vector<double> returns;
  std::vector<double> advantages;
};

// Discounted returns and advantages for one complete episode. lambda = 1
// gives Monte-Carlo returns minus the critic baseline.
inline Returns compute_returns_and_advantages(const Trajectory& traj, double gamma,
                                              double lambda = 1.0) {
  const std::size_t n = traj.size();
  Returns out;
  out.returns.assign(n, 0.0);
  out.advantages.assign(n, 0.0);
  double ret = 0.0;
  double gae = 0.0;
  for (std::size_t i = n; i-- > 0;) {
    const bool last = traj[i].done || i + 1 == n;
    ret = traj[i].reward + (last ? 0.0 : gamma * ret);
    out.returns[i] = ret;
    if (lambda >= 1.0) {
      out.advantages[i] = ret - traj[i].value;
    } else {
      const double next_v = last ? 0.0 : traj[i + 1].value;
      const double delta = traj[i].reward + gamma * next_v - traj[i].value;
      gae = delta + (last ? 0.0 : gamma * lambda * gae);
      out.advantages[i] = gae;
    }
  }
  return out;
}

inline void normalize(std::vector<double>& v) {
  if (v.empty()) return;
  const double n = static_cast<double>(v.size());
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  const double sd = std::sqrt(ss / n);
  for (double& x : v) x = (x - mean) / (sd + 1e-8);
}

// Per time step, subtracts from each episode's advantage the mean advantage
// of the other episodes at that step. A single episode is left unchanged.
inline void subtract_step_baseline(std::vector<Returns>& rets) {
  const std::size_t n = rets.size();
  if (n < 2) return;
  std::size_t len = 0;
  for (const auto& r : rets) len = std::max(len, r.advantages.size());
  for (std::size_t t = 0; t < len; ++t) {
    double sum = 0.0;
    std::size_t count = 0;
    for (const auto& r : rets)
      if (t < r.advantages.size()) {
        sum += r.advantages[t];
        ++count;
      }
    if (count < 2) continue;
    for (auto& r : rets)
      if (t < r.advantages.size())
        r.advantages[t] -= (sum - r.advantages[t]) / static_cast<double>(count - 1);
  }
}

inline double surrogate(double ratio, double adv, double clip) {
  return std::min(ratio * adv, std::clamp(ratio, 1.0 - clip, 1.0 + clip) * adv);
}

struct Sample {
  const Vec* obs = nullptr;
  double pre = 0.0;
  double old_log_prob = 0.0;
  double advantage = 0.0;
  double ret = 0.0;
};

struct UpdateStats {
  double actor_loss = 0.0;  // negated mean surrogate
  double critic_loss = 0.0;
  double clip_fraction = 0.0;
};

// Negated clipped surrogate over a minibatch and its gradient w.r.t. the
// actor parameters.
inline double actor_loss_and_grad(const nn::Mlp& actor, std::span<const Sample> batch,
                                  double std, double clip, Vec& grad, double* clip_frac = nullptr) {
  grad = Vec::Zero(actor.num_params());
  const double n = static_cast<double>(batch.size());
  double loss = 0.0;
  int clipped = 0;
  nn::Mlp::Cache cache;
  for (const auto& s : batch) {
    const double m = actor_pre(actor, *s.obs, &cache);
    const double lp = log_prob(s.pre, m, std);
    const double ratio = std::exp(lp - s.old_log_prob);
    const double unclipped = ratio * s.advantage;
    const double clipped_obj = std::clamp(ratio, 1.0 - clip, 1.0 + clip) * s.advantage;
    loss -= std::min(unclipped, clipped_obj) / n;
    if (unclipped <= clipped_obj) {
      const double dobj_dm = s.advantage * ratio * (s.pre - m) / (std * std);
      actor.backward_scalar(cache, -dobj_dm / n, grad);
    } else {
      ++clipped;
    }
  }
  if (clip_frac) *clip_frac = clipped / n;
  return loss;
}

inline double critic_loss_and_grad(const nn::Mlp& critic, std::span<const Sample> batch,
                                   Vec& grad) {
  grad = Vec::Zero(critic.num_params());
  const double n = static_cast<double>(batch.size());
  double loss = 0.0;
  nn::Mlp::Cache cache;
  for (const auto& s : batch) {
    const double v = critic_forward(critic, *s.obs, &cache);
    const double err = v - s.ret;
    loss += 0.5 * err * err / n;
    critic.backward_scalar(cache, err / n, grad);
  }
  return loss;
}

// One Adam step on each network. old_log_prob in the batch must come from the
// current old-policy snapshot.
inline UpdateStats clipped_surrogate_update(Policy& p, std::span<const Sample> batch) {
  UpdateStats st;
  Vec ga, gc;
  st.actor_loss =
      actor_loss_and_grad(p.actor, batch, p.hyper.action_std, p.hyper.clip, ga, &st.clip_fraction);
  st.critic_loss = critic_loss_and_grad(p.critic, batch, gc);
  if (!std::isfinite(st.actor_loss) || !std::isfinite(st.critic_loss) || !ga.allFinite() ||
      !gc.allFinite())
    throw DivergenceError("non-finite PPO loss");
  p.actor_opt.step(p.actor.params(), ga);
  p.critic_opt.step(p.critic.params(), gc);
  return st;
}

// Runs one day. With `rng` the actor samples; without it the mean action is
// used.
inline std::pair<Trajectory, EpisodeSummary> run_episode(env::Environment& e, const Policy& p,
                                                         std::uint64_t day_seed,
                                                         std::mt19937_64* rng) {
  Trajectory traj;
  EpisodeSummary sum;
  auto state = e.reset(day_seed);
  while (!e.done()) {
    Step s;
    s.obs = p.obs.apply(state);
    const double m = actor_pre(p.actor, s.obs);
    if (rng) {
      const auto a = sample_action(m, p.hyper.action_std, *rng);
      s.pre = a.pre;
      s.raw = a.raw;
      s.log_prob = a.log_prob;
    } else {
      s.pre = m;
      s.raw = sigmoid(m);
      s.log_prob = 0.0;
    }
    s.value = critic_forward(p.critic, s.obs);
    s.power = scale_action(s.raw, e.admissible_bounds());
    const auto out = e.step(s.power);
    s.reward = out.reward.r;
    s.done = out.done;
    sum.reward += out.reward.r;
    sum.f1 += out.reward.f1;
    sum.f2 += out.reward.f2;
    sum.f3 += out.reward.f3;
    state = out.next_state;
    traj.push_back(std::move(s));
  }
  sum.sigma2 = state.variance;
  return {std::move(traj), sum};
}

// ---- checkpoint ---------------------------------------------------------

inline constexpr int kCheckpointVersion = 1;

inline json net_to_json(const nn::Mlp& net) {
  return json{{"sizes", net.sizes()},
              {"params", std::vector<double>(net.params().data(),
                                             net.params().data() + net.params().size())}};
}

inline json adam_to_json(const nn::Adam& a) {
  return json{{"t", a.t},
              {"m", std::vector<double>(a.m.data(), a.m.data() + a.m.size())},
              {"v", std::vector<double>(a.v.data(), a.v.data() + a.v.size())}};
}

inline Vec to_vec(const std::vector<double>& v) {
  return Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size()));
}

inline json policy_to_json(const Policy& p) {
  return json{{"format", "v2g-ppo-checkpoint"},
              {"version", kCheckpointVersion},
              {"episode", p.episode},
              {"hyper", p.hyper},
              {"obs", {{"load_kw", p.obs.load_kw},
                       {"energy_kwh", p.obs.energy_kwh},
                       {"variance", p.obs.variance},
                       {"tariff", p.obs.tariff}}},
              {"actor", net_to_json(p.actor)},
              {"critic", net_to_json(p.critic)},
              {"adam_actor", adam_to_json(p.actor_opt)},
              {"adam_critic", adam_to_json(p.critic_opt)},
              {"rng", p.rng_state}};
}

inline void save_policy(const Policy& p, const std::filesystem::path& path) {
  csv::write_text(path, policy_to_json(p).dump(1) + "\n");
}

inline Policy load_policy(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw MissingFileError("cannot open checkpoint " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  try {
    if (j.at("format") != "v2g-ppo-checkpoint") throw ConfigError("not a policy checkpoint");
    if (j.at("version").get<int>() != kCheckpointVersion)
      throw ConfigError("unsupported checkpoint version");
    Policy p;
    read_hyper(j.at("hyper"), p.hyper, "checkpoint.hyper");
    p.hyper.validate();
    const auto& o = j.at("obs");
    p.obs = {o.at("load_kw"), o.at("energy_kwh"), o.at("variance"), o.at("tariff")};
    auto load_net = [](const json& jn) {
      nn::Mlp net(jn.at("sizes").get<std::vector<int>>());
      const auto params = jn.at("params").get<std::vector<double>>();
      if (static_cast<Eigen::Index>(params.size()) != net.num_params())
        throw ConfigError("checkpoint weights do not match the layer sizes");
      net.params() = to_vec(params);
      return net;
    };
    auto load_adam = [](const json& ja, nn::AdamParams ap) {
      nn::Adam a;
      a.p = ap;
      a.t = ja.at("t");
      a.m = to_vec(ja.at("m").get<std::vector<double>>());
      a.v = to_vec(ja.at("v").get<std::vector<double>>());
      return a;
    };
    p.actor = load_net(j.at("actor"));
    p.critic = load_net(j.at("critic"));
    if (p.actor.sizes().front() != env::kStateDim || p.actor.sizes().back() != 1)
      throw ConfigError("checkpoint actor has the wrong input/output shape");
    const auto& h = p.hyper;
    p.actor_opt = load_adam(j.at("adam_actor"), {h.lr_actor, h.adam_beta1, h.adam_beta2, h.adam_eps});
    p.critic_opt =
        load_adam(j.at("adam_critic"), {h.lr_critic, h.adam_beta1, h.adam_beta2, h.adam_eps});
    p.episode = j.at("episode");
    p.rng_state = j.at("rng");
    return p;
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

// ---- training -----------------------------------------------------------

struct TrainOptions {
  std::uint64_t seed = 0;
  int workers = 1;
  std::optional<std::filesystem::path> out_dir;  // checkpoints + curve
  std::function<void(const EpisodeSummary&)> on_episode;
};

struct TrainResult {
  Policy final_policy;
  Policy best_policy;
  double best_reward = -std::numeric_limits<double>::infinity();
  std::vector<EpisodeSummary> curve;
};

inline void write_curve(std::span<const EpisodeSummary> curve, const std::filesystem::path& path) {
  csv::Writer w({"episode", "reward", "f1", "f2", "f3", "sigma2"});
  for (const auto& c : curve) w.add(c.episode, c.reward, c.f1, c.f2, c.f3, c.sigma2);
  w.save(path);
}

inline void check_policy(const Policy& p) {
  if (!p.actor.finite() || !p.critic.finite())
    throw DivergenceError("non-finite network weights");
  if (p.actor.max_abs() > p.hyper.weight_limit || p.critic.max_abs() > p.hyper.weight_limit)
    throw DivergenceError("network weights exceeded the divergence threshold");
}

// Trains on copies of `base`. Each episode has its own exploration stream
// and day seed derived from (seed, episode), so the result does not depend
// on the number of workers.
inline TrainResult train(const env::Environment& base, const PpoHyper& hyper,
                         const TrainOptions& opt) {
  hyper.validate();
  if (hyper.episode_length != base.config().horizon.num_slots)
    throw ConfigError("ppo.episode_length must equal the number of horizon slots");
  TrainResult res;
  Policy policy = make_policy(hyper, ObsScale::for_env(base), opt.seed);
  const int workers = std::max(1, opt.workers);
  std::vector<env::Environment> envs(static_cast<std::size_t>(workers), base);
  std::mt19937_64 shuffle_rng(derive_seed(opt.seed, stream::shuffle));
  long long updates = 0;
  nn::Mlp old_actor = policy.actor;

  auto save_all = [&](const Policy& final_p) {
    if (!opt.out_dir) return;
    std::filesystem::create_directories(*opt.out_dir);
    save_policy(final_p, *opt.out_dir / "checkpoint.json");
    save_policy(res.best_policy, *opt.out_dir / "checkpoint_best.json");
    write_curve(res.curve, *opt.out_dir / "curve.csv");
  };

  res.best_policy = policy;
  long long next_checkpoint = hyper.checkpoint_every;
  for (long long ep0 = 0; ep0 < hyper.episodes; ep0 += hyper.rollout_episodes) {
    const int n = static_cast<int>(std::min<long long>(hyper.rollout_episodes, hyper.episodes - ep0));
    std::vector<Trajectory> trajs(static_cast<std::size_t>(n));
    std::vector<EpisodeSummary> sums(static_cast<std::size_t>(n));
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));

    auto work = [&](int w) {
      try {
        for (int i = w; i < n; i += workers) {
          const auto ep = static_cast<std::uint64_t>(ep0 + i);
          std::mt19937_64 rng(derive_seed(opt.seed, stream::episode, ep));
          auto [t, s] = run_episode(envs[w], policy, derive_seed(opt.seed, stream::day, ep), &rng);
          s.episode = ep0 + i;
          trajs[i] = std::move(t);
          sums[i] = s;
        }
      } catch (...) {
        errors[w] = std::current_exception();
      }
    };
    if (workers == 1) {
      work(0);
    } else {
      std::vector<std::thread> pool;
      for (int w = 0; w < workers; ++w) pool.emplace_back(work, w);
      for (auto& t : pool) t.join();
    }
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);

    double batch_reward = 0.0;
    for (const auto& s : sums) {
      if (!std::isfinite(s.reward)) {
        save_all(policy);
        throw DivergenceError("non-finite episode reward at episode " + std::to_string(s.episode));
      }
      batch_reward += s.reward;
      res.curve.push_back(s);
      if (opt.on_episode) opt.on_episode(s);
    }
    batch_reward /= n;
    if (batch_reward > res.best_reward) {
      res.best_reward = batch_reward;
      res.best_policy = policy;
      res.best_policy.episode = ep0;
    }

    std::vector<Returns> rets;
    for (const auto& t : trajs)
      rets.push_back(compute_returns_and_advantages(t, hyper.gamma, hyper.gae_lambda));
    if (hyper.step_baseline) subtract_step_baseline(rets);
    std::vector<Sample> samples;
    std::vector<double> adv;
    for (std::size_t e = 0; e < trajs.size(); ++e) {
      const auto& t = trajs[e];
      for (std::size_t i = 0; i < t.size(); ++i) {
        samples.push_back({&t[i].obs, t[i].pre, t[i].log_prob, 0.0, rets[e].returns[i]});
        adv.push_back(rets[e].advantages[i]);
      }
    }
    normalize(adv);
    for (std::size_t i = 0; i < samples.size(); ++i) samples[i].advantage = adv[i];

    const Policy last_good = policy;
    try {
      std::vector<std::size_t> order(samples.size());
      std::vector<Sample> batch;
      for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
        std::iota(order.begin(), order.end(), 0);
        std::shuffle(order.begin(), order.end(), shuffle_rng);
        for (std::size_t b = 0; b < order.size(); b += hyper.batch_size) {
          if (updates % hyper.update_step == 0) old_actor = policy.actor;
          batch.clear();
          for (std::size_t i = b; i < std::min(order.size(), b + hyper.batch_size); ++i) {
            Sample s = samples[order[i]];
            s.old_log_prob = log_prob(s.pre, actor_pre(old_actor, *s.obs), hyper.action_std);
            batch.push_back(s);
          }
          clipped_surrogate_update(policy, batch);
          ++updates;
        }
      }
      check_policy(policy);
    } catch (const DivergenceError&) {
      save_all(last_good);
      throw;
    }
    policy.episode = ep0 + n;
    policy.rng_state = rng_state(shuffle_rng);

    if (hyper.checkpoint_every > 0 && policy.episode >= next_checkpoint && opt.out_dir) {
      std::filesystem::create_directories(*opt.out_dir);
      save_policy(policy, *opt.out_dir / ("checkpoint_" + std::to_string(policy.episode) + ".json"));
      next_checkpoint += hyper.checkpoint_every;
    }
  }
  res.final_policy = policy;
  if (res.curve.empty()) res.best_policy = policy;
  save_all(policy);
  return res;
}

}  // namespace v2g::ppo
