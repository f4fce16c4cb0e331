#include "dbmrl/cyber_env.hpp"

#include <algorithm>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace dbmrl {
namespace {

const char* status_name(NodeStatus s) {
  switch (s) {
    case NodeStatus::healthy: return "healthy";
    case NodeStatus::compromised: return "compromised";
    case NodeStatus::patching: return "patching";
  }
  return "?";
}

}  // namespace

void NetworkSpec::validate() const {
  if (nodes.empty()) throw std::invalid_argument("spec: no nodes");
  if (episode_length < 1) throw std::invalid_argument("spec: episode_length < 1");
  if (patch_duration < 1) throw std::invalid_argument("spec: patch_duration < 1");
  if (ddos_load_factor <= 0.0) throw std::invalid_argument("spec: ddos_load_factor <= 0");
  if (green_demand.size() != links.size())
    throw std::invalid_argument("spec: green_demand size != link count");
  for (const LinkSpec& l : links) {
    if (l.a >= nodes.size() || l.b >= nodes.size())
      throw std::invalid_argument("spec: link endpoint out of range");
    if (l.capacity <= 0.0) throw std::invalid_argument("spec: capacity <= 0");
  }
  for (double g : green_demand)
    if (g < 0.0) throw std::invalid_argument("spec: negative green demand");
  for (const RedEvent& e : red_schedule) {
    const std::size_t limit =
        e.kind == AttackKind::compromise ? nodes.size() : links.size();
    if (e.target >= limit)
      throw std::invalid_argument("spec: red event target out of range");
    if (e.success_prob < 0.0 || e.success_prob > 1.0)
      throw std::invalid_argument("spec: success_prob outside [0,1]");
  }
  for (const RandomRed& r : random_reds) {
    if (r.target_node >= nodes.size())
      throw std::invalid_argument("spec: random red target out of range");
    if (r.success_prob < 0.0 || r.success_prob > 1.0)
      throw std::invalid_argument("spec: success_prob outside [0,1]");
    if (r.onset_min > r.onset_max)
      throw std::invalid_argument("spec: onset_min > onset_max");
    if (r.period < 1) throw std::invalid_argument("spec: period < 1");
  }
  if (weights.healthy < 0.0 || weights.compromised < 0.0 ||
      weights.green < 0.0 || weights.action < 0.0)
    throw std::invalid_argument("spec: negative reward weight");
}

std::size_t action_space_size(const NetworkSpec& spec) {
  return 1 + spec.nodes.size() + 2 * spec.links.size();
}

std::size_t observation_size(const NetworkSpec& spec) {
  return 3 * spec.nodes.size() + 4 * spec.links.size();
}

BlueAction decode_action(const NetworkSpec& spec, std::size_t raw) {
  const std::size_t n = spec.nodes.size(), m = spec.links.size();
  if (raw == 0) return {BlueAction::Kind::noop, 0};
  if (raw < 1 + n) return {BlueAction::Kind::patch, raw - 1};
  if (raw < 1 + n + m) return {BlueAction::Kind::block, raw - 1 - n};
  if (raw < 1 + n + 2 * m) return {BlueAction::Kind::unblock, raw - 1 - n - m};
  throw std::out_of_range("action index out of range");
}

CyberEnv::CyberEnv(NetworkSpec spec) : spec_(std::move(spec)) {
  spec_.validate();
}

UnitAssignment CyberEnv::reset(std::uint64_t seed) {
  const std::size_t n = spec_.nodes.size(), m = spec_.links.size();
  state_.status.assign(n, NodeStatus::healthy);
  for (std::size_t i = 0; i < n; ++i) state_.status[i] = spec_.nodes[i].initial;
  state_.patch_left.assign(n, 0);
  state_.links.assign(m, LinkState{});
  for (std::size_t l = 0; l < m; ++l) state_.links[l].load = spec_.green_demand[l];
  state_.timestep = 0;
  rng_ = Rng(seed);
  state_.red_onsets.clear();
  for (const RandomRed& r : spec_.random_reds)
    state_.red_onsets.push_back(
        r.onset_min + rng_.below(r.onset_max - r.onset_min + 1));
  started_ = true;
  done_ = false;
  trace_.clear();
  return observe();
}

StepResult CyberEnv::step(std::size_t action) {
  if (!started_) throw std::logic_error("step before reset");
  if (done_) throw std::logic_error("step after episode end");
  const BlueAction act = decode_action(spec_, action);
  const std::size_t n = spec_.nodes.size(), m = spec_.links.size();

  // 1. blue
  switch (act.kind) {
    case BlueAction::Kind::noop:
      break;
    case BlueAction::Kind::patch:
      state_.status[act.index] = NodeStatus::patching;
      state_.patch_left[act.index] = spec_.patch_duration;
      break;
    case BlueAction::Kind::block:
      state_.links[act.index].blocked = true;
      break;
    case BlueAction::Kind::unblock:
      state_.links[act.index].blocked = false;
      break;
  }

  // 2. red: scheduled events in spec order, then random agents.  Every fired
  // event consumes exactly one rng draw, applicable or not, so the stream is
  // a pure function of the timestep sequence.
  std::vector<double> attack_load(m, 0.0);
  std::string events;
  auto log_event = [&](const std::string& tok) {
    if (!events.empty()) events += ';';
    events += tok;
  };
  auto apply_compromise = [&](std::size_t node) {
    const std::string& id = spec_.nodes[node].id;
    switch (state_.status[node]) {
      case NodeStatus::patching:
        log_event("immune:" + id);
        break;
      case NodeStatus::compromised:
        log_event("already:" + id);
        break;
      case NodeStatus::healthy:
        state_.status[node] = NodeStatus::compromised;
        log_event("comp:" + id);
        break;
    }
  };
  auto fire = [&](AttackKind kind, std::size_t target, double prob) {
    const bool hit = rng_.uniform01() < prob;
    if (kind == AttackKind::compromise) {
      if (hit)
        apply_compromise(target);
      else
        log_event("miss:" + spec_.nodes[target].id);
      return;
    }
    const LinkSpec& link = spec_.links[target];
    if (state_.links[target].blocked) {
      log_event("absorbed:" + link.id);
    } else if (!hit) {
      log_event("miss:" + link.id);
    } else {
      attack_load[target] += spec_.ddos_load_factor * link.capacity;
      log_event("ddos:" + link.id);
      apply_compromise(link.b);
    }
  };
  for (const RedEvent& e : spec_.red_schedule)
    if (e.timestep == state_.timestep) fire(e.kind, e.target, e.success_prob);
  for (std::size_t r = 0; r < spec_.random_reds.size(); ++r) {
    const RandomRed& red = spec_.random_reds[r];
    const std::size_t onset = state_.red_onsets[r];
    if (state_.timestep >= onset &&
        (state_.timestep - onset) % red.period == 0)
      fire(AttackKind::compromise, red.target_node, red.success_prob);
  }

  // 3. green: blocked links carry nothing; elsewhere green and attack load
  // share the link, clipped at capacity, green keeping its pro-rata share.
  double demand_total = 0.0, delivered_total = 0.0;
  for (std::size_t l = 0; l < m; ++l) {
    const double demand = spec_.green_demand[l];
    demand_total += demand;
    if (state_.links[l].blocked) {
      state_.links[l].load = 0.0;
      continue;
    }
    const double load = demand + attack_load[l];
    state_.links[l].load = load;
    if (demand > 0.0)
      delivered_total += std::min(load, spec_.links[l].capacity) * demand / load;
  }
  const double green_fraction =
      demand_total > 0.0 ? delivered_total / demand_total : 1.0;

  // 4. reward
  std::size_t healthy = 0, compromised = 0;
  for (NodeStatus s : state_.status) {
    healthy += s == NodeStatus::healthy;
    compromised += s == NodeStatus::compromised;
  }
  const RewardWeights& w = spec_.weights;
  const double reward = w.healthy * double(healthy) -
                        w.compromised * double(compromised) +
                        w.green * green_fraction -
                        (act.kind == BlueAction::Kind::noop ? 0.0 : w.action);

  if (trace_on_) {
    TraceRow row;
    row.timestep = state_.timestep;
    switch (act.kind) {
      case BlueAction::Kind::noop: row.action = "noop"; break;
      case BlueAction::Kind::patch:
        row.action = "patch:" + spec_.nodes[act.index].id;
        break;
      case BlueAction::Kind::block:
        row.action = "block:" + spec_.links[act.index].id;
        break;
      case BlueAction::Kind::unblock:
        row.action = "unblock:" + spec_.links[act.index].id;
        break;
    }
    row.red_events = events;
    std::string statuses;
    for (std::size_t i = 0; i < n; ++i) {
      if (i) statuses += ';';
      statuses += status_name(state_.status[i]);
      if (state_.status[i] == NodeStatus::patching)
        statuses += std::to_string(state_.patch_left[i]);
    }
    row.node_statuses = statuses;
    row.reward = reward;
    trace_.push_back(std::move(row));
  }

  // 5. advance: patch timers tick down after the reward is scored.
  for (std::size_t i = 0; i < n; ++i)
    if (state_.status[i] == NodeStatus::patching && --state_.patch_left[i] == 0)
      state_.status[i] = NodeStatus::healthy;
  ++state_.timestep;
  done_ = state_.timestep >= spec_.episode_length;

  return {observe(), reward, done_};
}

UnitAssignment CyberEnv::observe() const {
  UnitAssignment obs(observation_size(spec_), 0);
  std::size_t k = 0;
  for (NodeStatus s : state_.status) {
    obs[k + static_cast<std::size_t>(s)] = 1;
    k += 3;
  }
  for (std::size_t l = 0; l < spec_.links.size(); ++l) {
    const LinkState& ls = state_.links[l];
    obs[k++] = ls.blocked ? 1 : 0;
    const double r = ls.load / spec_.links[l].capacity;
    const std::size_t band = r < 1.0 / 3.0 ? 0 : (r <= 1.0 ? 1 : 2);
    obs[k + band] = 1;
    k += 3;
  }
  return obs;
}

NetworkSpec default_network_spec() {
  NetworkSpec spec;
  spec.nodes = {{"pc0", NodeKind::pc, NodeStatus::healthy},
                {"pc1", NodeKind::pc, NodeStatus::healthy},
                {"srv", NodeKind::server, NodeStatus::healthy},
                {"swa", NodeKind::sw, NodeStatus::healthy},
                {"swb", NodeKind::sw, NodeStatus::healthy},
                {"swc", NodeKind::sw, NodeStatus::healthy}};
  spec.links = {{"l0", 0, 3, 1.0}, {"l1", 1, 3, 1.0}, {"l2", 3, 4, 1.0},
                {"l3", 4, 5, 1.0}, {"l4", 5, 2, 1.0}, {"l5", 3, 5, 1.0},
                {"l6", 4, 2, 1.0}};
  spec.green_demand.assign(spec.links.size(), 0.6);
  for (std::size_t t = 10; t <= 14; ++t)
    spec.red_schedule.push_back({t, AttackKind::ddos, 4, 0.7});
  spec.random_reds = {{1, 0.7, 3, 12, 4}};
  spec.episode_length = 30;
  spec.patch_duration = 2;
  return spec;
}

NetworkSpec deterministic_network_spec() {
  NetworkSpec spec = default_network_spec();
  for (RedEvent& e : spec.red_schedule) e.success_prob = 1.0;
  for (RandomRed& r : spec.random_reds) {
    r.success_prob = 1.0;
    r.onset_min = r.onset_max = 6;
  }
  return spec;
}

std::size_t oracle_action(const NetworkSpec& spec, const EnvState& state) {
  const std::size_t n = spec.nodes.size(), m = spec.links.size();
  for (const RedEvent& e : spec.red_schedule)
    if (e.kind == AttackKind::ddos && e.timestep == state.timestep &&
        !state.links[e.target].blocked)
      return 1 + n + e.target;
  for (std::size_t i = 0; i < n; ++i)
    if (state.status[i] == NodeStatus::compromised) return 1 + i;
  for (std::size_t l = 0; l < m; ++l) {
    if (!state.links[l].blocked) continue;
    bool pending = false;
    for (const RedEvent& e : spec.red_schedule)
      pending |= e.kind == AttackKind::ddos && e.target == l &&
                 e.timestep >= state.timestep;
    if (!pending) return 1 + n + m + l;
  }
  return 0;
}

double run_episode(CyberEnv& env, std::uint64_t seed,
                   const std::function<std::size_t(const CyberEnv&,
                                                   const UnitAssignment&)>& pick) {
  UnitAssignment obs = env.reset(seed);
  double total = 0.0;
  while (!env.done()) {
    StepResult r = env.step(pick(env, obs));
    total += r.reward;
    obs = std::move(r.obs);
  }
  return total;
}

void dump_trace_csv(const std::vector<TraceRow>& rows, std::ostream& out) {
  out << "timestep,action,red_events,node_statuses,reward\n";
  for (const TraceRow& r : rows)
    out << r.timestep << ',' << r.action << ',' << r.red_events << ','
        << r.node_statuses << ',' << format_double(r.reward) << '\n';
}

}  // namespace dbmrl
