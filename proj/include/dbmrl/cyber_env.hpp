#pragma once

// Episodic node/link cyber-defense environment.
//
// A small network of hosts and switches carries benign ("green") traffic
// while scripted attackers ("red") compromise nodes and flood links.  The
// learning agent ("blue") picks one action per timestep: do nothing, patch a
// node, or block/unblock a link.  Per-step effect order:
//
//   1. blue action applied
//   2. red events for this timestep fire (patching targets are immune;
//      blocked links absorb floods)
//   3. green traffic routed over unblocked links, clipped at capacity
//   4. reward = w_healthy*#healthy - w_compromised*#compromised
//              + w_green*(delivered green fraction) - w_action*[action != noop]
//   5. done once `episode_length` steps have elapsed; patch timers tick down
//
// Observations are strictly binary so they can clamp Boltzmann state units:
// a 3-bit status one-hot per node, then per link a blocked bit plus a 3-band
// load one-hot.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "dbmrl/env.hpp"
#include "dbmrl/util.hpp"

namespace dbmrl {

enum class NodeKind { pc, server, sw };
enum class NodeStatus { healthy, compromised, patching };
enum class AttackKind { compromise, ddos };

struct NodeSpec {
  std::string id;
  NodeKind kind = NodeKind::pc;
  NodeStatus initial = NodeStatus::healthy;
};

// Undirected link a<->b; floods travel toward endpoint `b`.
struct LinkSpec {
  std::string id;
  std::size_t a = 0;
  std::size_t b = 0;
  double capacity = 1.0;
};

// One scheduled red event.  `target` indexes nodes for compromise attacks
// and links for ddos attacks.
struct RedEvent {
  std::size_t timestep = 0;
  AttackKind kind = AttackKind::compromise;
  std::size_t target = 0;
  double success_prob = 1.0;
};

// Red agent whose first strike lands at a per-episode random onset drawn
// uniformly from [onset_min, onset_max]; it re-attacks every `period` steps.
struct RandomRed {
  std::size_t target_node = 0;
  double success_prob = 1.0;
  std::size_t onset_min = 0;
  std::size_t onset_max = 0;
  std::size_t period = 4;
};

struct RewardWeights {
  double healthy = 1.0;
  double compromised = 2.0;
  double green = 1.0;
  double action = 0.1;
};

struct NetworkSpec {
  std::vector<NodeSpec> nodes;
  std::vector<LinkSpec> links;
  std::vector<double> green_demand;  // per link, baseline green load
  std::vector<RedEvent> red_schedule;
  std::vector<RandomRed> random_reds;
  std::size_t episode_length = 30;
  std::size_t patch_duration = 2;   // steps a patching node stays offline
  double ddos_load_factor = 2.0;    // flood load = factor * link capacity

  RewardWeights weights;

  void validate() const;  // throws std::invalid_argument
};

struct LinkState {
  bool blocked = false;
  double load = 0.0;  // green + attack load arriving this step (pre-clip)
};

struct EnvState {
  std::vector<NodeStatus> status;
  std::vector<std::size_t> patch_left;  // meaningful while status==patching
  std::vector<LinkState> links;
  std::vector<std::size_t> red_onsets;  // resolved onset per random red
  std::size_t timestep = 0;
};

struct BlueAction {
  enum class Kind { noop, patch, block, unblock } kind = Kind::noop;
  std::size_t index = 0;  // node index for patch, link index for (un)block
};

// Flat encoding: 0 = noop, then patch per node, block per link, unblock per
// link.  Throws std::out_of_range past 1 + n_nodes + 2*n_links.
BlueAction decode_action(const NetworkSpec& spec, std::size_t raw);
std::size_t action_space_size(const NetworkSpec& spec);
std::size_t observation_size(const NetworkSpec& spec);

struct TraceRow {
  std::size_t timestep = 0;
  std::string action;
  std::string red_events;
  std::string node_statuses;
  double reward = 0.0;
};

class CyberEnv final : public RolloutEnv {
 public:
  explicit CyberEnv(NetworkSpec spec);

  std::size_t obs_size() const override { return observation_size(spec_); }
  std::size_t n_actions() const override { return action_space_size(spec_); }

  // Restores initial statuses, clears blocks, routes baseline traffic, and
  // resolves random-red onsets from `seed`.
  UnitAssignment reset(std::uint64_t seed) override;

  // Throws std::logic_error before the first reset or once done.
  StepResult step(std::size_t action) override;

  const NetworkSpec& spec() const { return spec_; }
  const EnvState& state() const { return state_; }
  bool done() const { return done_; }

  void set_trace(bool on) { trace_on_ = on; }
  const std::vector<TraceRow>& trace() const { return trace_; }

 private:
  UnitAssignment observe() const;

  NetworkSpec spec_;
  EnvState state_;
  Rng rng_{0};
  bool started_ = false;
  bool done_ = true;
  bool trace_on_ = false;
  std::vector<TraceRow> trace_;
};

// Six nodes (2 PCs, a server, 3 switches), seven links, 30-step episodes:
// one scheduled ddos burst against the server uplink plus one random-onset
// red agent hammering a PC.
NetworkSpec default_network_spec();

// Same network with every success probability forced to 1 and the random
// red's onset pinned, so red behavior is a fixed script.
NetworkSpec deterministic_network_spec();

// Scripted perfect-defense policy: blocks a link the step its flood lands,
// patches compromised nodes, unblocks once no flood remains, else no-op.
std::size_t oracle_action(const NetworkSpec& spec, const EnvState& state);

// Runs one episode under `pick`, returns the total reward.
double run_episode(CyberEnv& env, std::uint64_t seed,
                   const std::function<std::size_t(const CyberEnv&,
                                                   const UnitAssignment&)>& pick);

// Columns: timestep, action, red_events, node_statuses, reward.
void dump_trace_csv(const std::vector<TraceRow>& rows, std::ostream& out);

}  // namespace dbmrl
