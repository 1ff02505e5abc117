#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <compare>
#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "cftim/errors.hpp"

namespace cftim {

/// Dense per-scenario node index. Sources come first, then relays; the
/// coordinator holds the last (distinguished) index n_sources + n_relays.
struct NodeId {
    std::int32_t value = -1;

    constexpr auto operator<=>(const NodeId&) const = default;
};

enum class Role { Source, Relay, Coordinator };

inline const char* to_string(Role r) {
    switch (r) {
        case Role::Source: return "source";
        case Role::Relay: return "relay";
        case Role::Coordinator: return "coordinator";
    }
    return "?";
}

struct Node {
    NodeId id;
    Role role = Role::Source;
    double x_m = 0.0;
    double y_m = 0.0;
    double tx_power_dbm = 0.0;
    double initial_energy_j = 0.0;
};

inline double distance_m(const Node& a, const Node& b) {
    return std::hypot(a.x_m - b.x_m, a.y_m - b.y_m);
}

struct Packet {
    NodeId origin;
    int size_bytes = 0;
    double created_at_s = 0.0;
    std::optional<double> delivered_at_s;
    int hops = 0;  // hops traversed when delivered: 1 = direct, 2 = via relay
};

enum class Scheme { Cftim, Or, Tdma };

inline const char* to_string(Scheme s) {
    switch (s) {
        case Scheme::Cftim: return "cftim";
        case Scheme::Or: return "or";
        case Scheme::Tdma: return "tdma";
    }
    return "?";
}

inline std::optional<Scheme> scheme_from_string(const std::string& s) {
    if (s == "cftim") return Scheme::Cftim;
    if (s == "or") return Scheme::Or;
    if (s == "tdma") return Scheme::Tdma;
    return std::nullopt;
}

/// One TDMA schedule unit: beacon part, contention-access part, and a node
/// part of p slots in which the first m are dedicated and p-m are free.
/// Always p > m, i.e. at least one free slot.
struct Superframe {
    std::int64_t index = 0;
    double beacon_duration_s = 0.0;
    double cap_duration_s = 0.0;
    double slot_duration_s = 0.0;
    std::map<NodeId, int> node_slot_list;  // node -> dedicated slot, injective
    int free_slot_count = 0;

    int m() const { return static_cast<int>(node_slot_list.size()); }
    int p() const { return m() + free_slot_count; }

    void validate() const {
        if (free_slot_count < 1)
            throw SimError(ErrorKind::InvalidValue, "free_slot_count",
                           "superframe requires p > m (at least one free slot)");
        std::set<int> used;
        for (const auto& [id, slot] : node_slot_list) {
            if (slot < 0 || slot >= p())
                throw SimError(ErrorKind::InvalidValue, "node_slot_list",
                               "slot index out of range [0, p)");
            if (!used.insert(slot).second)
                throw SimError(ErrorKind::InvalidValue, "node_slot_list",
                               "duplicate slot assignment");
        }
    }
};

/// Coordinator broadcast announcing the schedule of the frame it opens.
/// stable_channel_assignments records the channels on which the coordinator
/// received during the frame this beacon concludes (diagnostic echo; nodes
/// rescan on their own before transmitting).
struct Beacon {
    std::int64_t frame_index = 0;
    std::map<NodeId, int> node_slot_list;
    int free_slot_count = 0;
    std::map<NodeId, int> stable_channel_assignments;

    int m() const { return static_cast<int>(node_slot_list.size()); }
    int p() const { return m() + free_slot_count; }

    bool has_slot(NodeId id) const { return node_slot_list.count(id) != 0; }
};

// -------------------------------------------------------------------------
// Scenario configuration

struct EnergyModelConfig {
    double tx_mw = 36.0;
    double rx_mw = 33.0;
    double sense_mw = 30.0;
    double idle_mw = 0.9;
    double switch_mw = 10.0;
    double switch_duration_s = 100e-6;
};

/// Validated simulation scenario. Durations in seconds, powers in dBm,
/// rates in bit/s. Defaults follow the standard WBAN setup: 12 sources,
/// 4 relays, 8 channels, 0 dBm, -100 dBm noise floor, 250 kbps, 12-byte
/// packets, pathloss exponent 4.22, 45-minute run.
struct ScenarioConfig {
    int n_sources = 12;
    int n_relays = 4;
    int channel_count = 8;
    double sim_duration_s = 2700.0;
    double tx_power_dbm = 0.0;
    double noise_floor_dbm = -100.0;
    double data_rate_bps = 250e3;
    int packet_size_bytes = 12;
    double pathloss_exponent = 4.22;
    double sinr_threshold_db = 7.0;
    double slot_duration_s = 1e-3;
    int max_retries = 3;
    int k_history = 4;
    int p_min_slack = 2;
    std::uint64_t rng_seed = 1;
    Scheme scheme = Scheme::Cftim;

    // Frame geometry (in slots) and contention parameters.
    int beacon_slots = 1;
    int cap_slots = 4;
    int or_window_slots = 16;
    int active_window = 3;
    int p_max_slack = 16;
    int cw_min = 8;
    int cw_max = 64;

    // Radio model.
    double reference_distance_m = 0.1;
    double reference_loss_db = 35.0;
    double area_side_m = 2.0;
    double tau_s_s = 1e-4;  // sensing / backoff slot; default slot_duration / 10
    double p_thr = 0.8;     // channel stability probability threshold
    std::array<double, 3> state_penalty_db = {-15.0, -6.0, 0.0};  // states 1..3
    std::array<std::array<double, 3>, 3> markov_matrix = {{
        {0.90, 0.10, 0.00},
        {0.05, 0.85, 0.10},
        {0.00, 0.05, 0.95},
    }};

    double initial_energy_j = 200.0;
    EnergyModelConfig energy;

    int n_nodes() const { return n_sources + n_relays + 1; }
    NodeId coordinator_id() const { return NodeId{n_sources + n_relays}; }
    double packet_duration_s() const { return packet_size_bytes * 8.0 / data_rate_bps; }
    double beacon_duration_s() const { return beacon_slots * slot_duration_s; }
    double cap_duration_s() const { return cap_slots * slot_duration_s; }
};

/// Checks every scenario invariant; throws SimError naming the violated
/// field. Returns the config unchanged on success.
inline ScenarioConfig validate_scenario(ScenarioConfig cfg) {
    auto positive = [](double v, const char* field) {
        if (!(v > 0.0))
            throw SimError(ErrorKind::NonPositiveDuration, field, "must be > 0");
    };
    positive(cfg.sim_duration_s, "sim_duration_s");
    positive(cfg.slot_duration_s, "slot_duration_s");
    positive(cfg.tau_s_s, "tau_s_s");
    positive(cfg.data_rate_bps, "data_rate_bps");

    if (cfg.n_sources < 1)
        throw SimError(ErrorKind::InvalidValue, "n_sources", "need at least one source");
    if (cfg.n_relays < 0)
        throw SimError(ErrorKind::InvalidValue, "n_relays", "must be >= 0");
    if (cfg.n_relays < 1 && cfg.scheme != Scheme::Tdma)
        throw SimError(ErrorKind::InvalidValue, "n_relays",
                       "relay-assisted schemes need at least one relay");
    // One shared base channel plus at least one candidate stable channel;
    // a single channel cannot satisfy the stable-channel assumption.
    if (cfg.channel_count < 2)
        throw SimError(ErrorKind::ChannelCountTooSmall, "channel_count",
                       "need the base channel plus at least one stable-channel candidate");
    if (cfg.packet_size_bytes < 1)
        throw SimError(ErrorKind::InvalidValue, "packet_size_bytes", "must be >= 1");
    if (cfg.packet_duration_s() > cfg.slot_duration_s)
        throw SimError(ErrorKind::InvalidValue, "slot_duration_s",
                       "a slot must fit one packet at the configured data rate");
    if (cfg.max_retries < 1)
        throw SimError(ErrorKind::InvalidValue, "max_retries", "must be >= 1");
    if (cfg.k_history < 1)
        throw SimError(ErrorKind::InvalidValue, "k_history", "must be >= 1");
    if (cfg.active_window < 1)
        throw SimError(ErrorKind::InvalidValue, "active_window", "must be >= 1");
    if (cfg.p_min_slack < 1)
        throw SimError(ErrorKind::InvalidValue, "p_min_slack",
                       "must be >= 1 to guarantee p > m");
    if (cfg.p_max_slack < cfg.p_min_slack)
        throw SimError(ErrorKind::InvalidValue, "p_max_slack", "must be >= p_min_slack");
    if (cfg.beacon_slots < 1)
        throw SimError(ErrorKind::InvalidValue, "beacon_slots", "must be >= 1");
    if (cfg.cap_slots < 1)
        throw SimError(ErrorKind::InvalidValue, "cap_slots", "must be >= 1");
    if (cfg.or_window_slots < 1)
        throw SimError(ErrorKind::InvalidValue, "or_window_slots", "must be >= 1");
    if (cfg.cw_min < 1 || cfg.cw_max < cfg.cw_min)
        throw SimError(ErrorKind::InvalidValue, "cw_min", "need 1 <= cw_min <= cw_max");
    if (!(cfg.p_thr >= 0.0 && cfg.p_thr <= 1.0))
        throw SimError(ErrorKind::InvalidValue, "p_thr", "must be in [0, 1]");
    if (!(cfg.noise_floor_dbm < cfg.tx_power_dbm))
        throw SimError(ErrorKind::InvalidValue, "noise_floor_dbm",
                       "noise floor must lie below the transmit power");
    if (!(cfg.pathloss_exponent > 0.0))
        throw SimError(ErrorKind::InvalidValue, "pathloss_exponent", "must be > 0");
    if (!(cfg.reference_distance_m > 0.0))
        throw SimError(ErrorKind::InvalidValue, "reference_distance_m", "must be > 0");
    if (!(cfg.area_side_m > 0.0))
        throw SimError(ErrorKind::InvalidValue, "area_side_m", "must be > 0");
    if (!(cfg.initial_energy_j > 0.0))
        throw SimError(ErrorKind::InvalidValue, "initial_energy_j", "must be > 0");
    for (int r = 0; r < 3; ++r) {
        double sum = 0.0;
        for (int c = 0; c < 3; ++c) {
            if (cfg.markov_matrix[r][c] < 0.0)
                throw SimError(ErrorKind::NonStochasticInput, "markov_matrix",
                               "negative transition probability");
            sum += cfg.markov_matrix[r][c];
        }
        if (std::abs(sum - 1.0) > 1e-9)
            throw SimError(ErrorKind::NonStochasticInput, "markov_matrix",
                           "row " + std::to_string(r + 1) + " does not sum to 1");
    }
    return cfg;
}

/// Builds the node roster for a validated scenario. Positions are filled in
/// by the placement step (simulation.hpp); this fixes ids, roles and budgets.
inline std::vector<Node> make_roster(const ScenarioConfig& cfg) {
    std::vector<Node> nodes;
    nodes.reserve(cfg.n_nodes());
    for (int i = 0; i < cfg.n_sources; ++i)
        nodes.push_back({NodeId{i}, Role::Source, 0, 0, cfg.tx_power_dbm, cfg.initial_energy_j});
    for (int i = 0; i < cfg.n_relays; ++i)
        nodes.push_back({NodeId{cfg.n_sources + i}, Role::Relay, 0, 0, cfg.tx_power_dbm,
                         cfg.initial_energy_j});
    nodes.push_back({cfg.coordinator_id(), Role::Coordinator, 0, 0, cfg.tx_power_dbm,
                     cfg.initial_energy_j});
    return nodes;
}

/// Exactly one coordinator, dense ids starting at 0.
inline void validate_roster(const std::vector<Node>& nodes) {
    int coordinators = 0;
    std::set<std::int32_t> ids;
    for (const auto& n : nodes) {
        if (n.role == Role::Coordinator) ++coordinators;
        ids.insert(n.id.value);
    }
    if (coordinators == 0)
        throw SimError(ErrorKind::NoCoordinator, "roster", "scenario has no coordinator");
    if (coordinators > 1)
        throw SimError(ErrorKind::NoCoordinator, "roster",
                       "scenario must have exactly one coordinator");
    if (ids.empty() || *ids.begin() != 0 ||
        *ids.rbegin() != static_cast<std::int32_t>(nodes.size()) - 1 ||
        ids.size() != nodes.size())
        throw SimError(ErrorKind::InvalidValue, "roster", "node ids must be dense from 0");
}

// -------------------------------------------------------------------------
// Coordinator reception history

/// Per-frame record of which node ids the coordinator heard from.
class ReceptionLog {
public:
    void push_frame(std::vector<NodeId> heard) {
        std::sort(heard.begin(), heard.end());
        frames_.push_back(std::move(heard));
    }

    std::int64_t frame_count() const { return static_cast<std::int64_t>(frames_.size()); }

    const std::vector<NodeId>& heard_in(std::int64_t frame) const { return frames_.at(frame); }

private:
    std::vector<std::vector<NodeId>> frames_;
};

/// Nodes heard in frames {f-1, ..., f-window}. A node heard at least once in
/// that window is active and keeps its dedicated slot.
inline std::set<NodeId> active_nodes(const ReceptionLog& log, std::int64_t current_frame,
                                     int window = 3) {
    std::set<NodeId> active;
    std::int64_t lo = std::max<std::int64_t>(0, current_frame - window);
    std::int64_t hi = std::min<std::int64_t>(log.frame_count(), current_frame);
    for (std::int64_t f = lo; f < hi; ++f)
        for (NodeId id : log.heard_in(f)) active.insert(id);
    return active;
}

}  // namespace cftim
