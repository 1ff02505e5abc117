#pragma once

#include <cmath>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "cftim/channel.hpp"
#include "cftim/contention.hpp"
#include "cftim/core.hpp"
#include "cftim/engine.hpp"
#include "cftim/metrics.hpp"
#include "cftim/protocols.hpp"
#include "cftim/rng.hpp"

namespace cftim {

/// One transmission in the TDMA part of a frame.
struct ClaimRecord {
    NodeId node;
    int slot = -1;
    int channel = 0;
    bool assigned = false;  // dedicated slot vs free-slot claim
    bool collided = false;
    bool success = false;
    int burst = 1;  // packets carried (relays may pack several)
};

/// Per-frame protocol snapshot handed to the observer callback.
struct FrameObservation {
    std::int64_t frame = 0;
    double start_s = 0.0;
    double end_s = 0.0;
    Beacon beacon;       // schedule this frame ran under
    Beacon next_beacon;  // schedule formed at frame end
    std::vector<ClaimRecord> claims;
    std::set<NodeId> ts;
    std::set<NodeId> is;
    std::vector<NodeId> acked;
    int delivered = 0;
    int free_slot_collisions = 0;  // claimants caught in collided free slots
};

struct RunSummary {
    Scheme scheme = Scheme::Cftim;
    std::uint64_t seed = 0;
    std::int64_t frames = 0;
    double sim_time_s = 0.0;
    double final_energy_j = 0.0;
    double mean_throughput_msg_s = 0.0;
    double outage_probability = 0.0;
    double final_running_mean_sinr_db = 0.0;
    std::int64_t delivered_total = 0;
    std::int64_t relay_drops = 0;
    std::int64_t no_stable_deferrals = 0;
    int exhausted_nodes = 0;
};

struct RunResult {
    std::vector<MetricsFrame> frames;
    RunSummary summary;
    Trace trace;
    std::vector<Packet> delivered_log;  // only with capture_deliveries
};

struct RunOptions {
    bool capture_trace = false;
    bool capture_deliveries = false;
    std::function<void(const FrameObservation&)> observer;
};

/// Deterministic single-run simulator: the trace and every metric are a pure
/// function of (config, seed). One instance runs one scenario once.
class Simulation {
public:
    explicit Simulation(const ScenarioConfig& cfg, RunOptions opts = {})
        : cfg_(validate_scenario(cfg)),
          opts_(std::move(opts)),
          rngs_(cfg_.rng_seed),
          backoff_rng_(rngs_.make("backoff")),
          slot_rng_(rngs_.make("slot-choice")),
          scan_rng_(rngs_.make("scan-order")),
          coordinator_(cfg_.k_history, cfg_.active_window, cfg_.p_min_slack, cfg_.p_max_slack) {
        nodes_ = make_roster(cfg_);
        validate_roster(nodes_);
        place_nodes();
        build_power_matrix();
        init_channels();
        ledger_ = EnergyLedger(nodes_, cfg_.energy);

        for (int i = 0; i < cfg_.n_sources; ++i) sources_.push_back({NodeId{i}});
        for (int i = 0; i < cfg_.n_relays; ++i)
            relays_.push_back({NodeId{cfg_.n_sources + i}});
        current_beacon_ = CoordinatorState::initial_beacon(cfg_.p_min_slack);

        node_busy_s_.resize(nodes_.size(), 0.0);
        last_sinr_db_.resize(nodes_.size(), 0.0);
        has_sinr_.resize(nodes_.size(), 0);
    }

    RunResult run() { return run_until(cfg_.sim_duration_s); }

    /// Processes all events strictly before t_end.
    RunResult run_until(double t_end) {
        if (t_end > cfg_.sim_duration_s)
            throw SimError(ErrorKind::InvalidValue, "t_end",
                           "cannot run beyond the configured sim duration");
        queue_.schedule(make_event(0.0, EventKind::BeaconStart, 0), clock_.now_s);
        if (slot_time(1) < t_end)
            queue_.schedule(make_event(slot_time(1), EventKind::ChannelStep, 0), clock_.now_s);
        while (!queue_.empty() && queue_.peek().time_s < t_end) {
            Event ev = queue_.pop();
            clock_.now_s = ev.time_s;
            clock_.frame = ev.frame;
            if (opts_.capture_trace) trace_.push_back(ev);
            dispatch(ev, t_end);
        }
        return finalize(t_end);
    }

    const ScenarioConfig& config() const { return cfg_; }
    const std::vector<Node>& nodes() const { return nodes_; }
    const EnergyLedger& ledger() const { return ledger_; }

private:
    // ---- setup -----------------------------------------------------------

    void place_nodes() {
        auto rng = rngs_.make("placement");
        std::uniform_real_distribution<double> coord(0.0, cfg_.area_side_m);
        for (auto& n : nodes_) {
            if (n.role == Role::Coordinator) {
                n.x_m = cfg_.area_side_m / 2.0;
                n.y_m = cfg_.area_side_m / 2.0;
            } else {
                n.x_m = coord(rng);
                n.y_m = coord(rng);
            }
        }
    }

    void build_power_matrix() {
        const std::size_t n = nodes_.size();
        rx_mw_.assign(n, std::vector<double>(n, 0.0));
        for (std::size_t a = 0; a < n; ++a)
            for (std::size_t b = 0; b < n; ++b) {
                if (a == b) continue;
                // Nodes closer than d0 are treated as at d0.
                double d = std::max(distance_m(nodes_[a], nodes_[b]), cfg_.reference_distance_m);
                LinkBudget lb{nodes_[a].tx_power_dbm, d, cfg_.pathloss_exponent,
                              cfg_.reference_distance_m, cfg_.reference_loss_db};
                rx_mw_[a][b] = dbm_to_mw(received_power_dbm(lb));
            }
    }

    void init_channels() {
        auto rng = rngs_.make("initial-state");
        std::uniform_int_distribution<int> s(1, 3);
        for (int c = 0; c < cfg_.channel_count; ++c) {
            MarkovChannel ch{c, s(rng), cfg_.markov_matrix, cfg_.slot_duration_s};
            ch.validate();
            channels_.push_back(ch);
            channel_rngs_.push_back(rngs_.make("channel-" + std::to_string(c)));
            channel_boundary_.push_back(0);
        }
    }

    // ---- channel state ---------------------------------------------------

    /// State of channel c during the slot that begins at global boundary b.
    /// Advances the chain lazily; each channel owns an RNG substream, so
    /// early advancement cannot perturb any other consumer.
    int state_at_boundary(int c, std::int64_t b) {
        while (channel_boundary_[c] < b) {
            channels_[c] = step_channel(channels_[c], channel_rngs_[c]);
            ++channel_boundary_[c];
        }
        return channels_[c].state;
    }

    double penalty_linear(int state) const {
        return db_to_linear(cfg_.state_penalty_db[state - 1]);
    }

    double noise_mw() const { return dbm_to_mw(cfg_.noise_floor_dbm); }

    // ---- time helpers ----------------------------------------------------

    double slot_time(std::int64_t boundary) const { return boundary * cfg_.slot_duration_s; }

    int bslots_per_packet() const {
        return static_cast<int>(std::ceil(cfg_.packet_duration_s() / cfg_.tau_s_s - 1e-12));
    }

    std::int64_t boundary_of_bslot(std::int64_t window_start_boundary, int bslot) const {
        double offset = bslot * cfg_.tau_s_s / cfg_.slot_duration_s;
        return window_start_boundary + static_cast<std::int64_t>(offset + 1e-12);
    }

    int slot_capacity() const {
        return std::max(1, static_cast<int>(cfg_.slot_duration_s / cfg_.packet_duration_s()));
    }

    Event make_event(double t, EventKind kind, std::int64_t frame, NodeId node = NodeId{-1},
                     int slot = -1, int channel = -1) const {
        Event ev;
        ev.time_s = t;
        ev.kind = kind;
        ev.frame = frame;
        ev.node = node;
        ev.slot = slot;
        ev.channel = channel;
        return ev;
    }

    bool alive(NodeId id) const { return !ledger_.exhausted(id); }

    void charge(NodeId id, Activity a, double duration_s, bool busy = true) {
        ledger_.record(id, a, duration_s);
        if (busy && a != Activity::Idle) node_busy_s_[id.value] += duration_s;
    }

    void note_sinr(NodeId id, double sinr_db) {
        last_sinr_db_[id.value] = sinr_db;
        has_sinr_[id.value] = 1;
    }

    // ---- frame plumbing ----------------------------------------------------

    struct PlannedTx {
        NodeId node;
        bool assigned = false;
        bool is_relay = false;
        int channel = 0;
        int burst = 1;
    };

    void dispatch(const Event& ev, double t_end) {
        switch (ev.kind) {
            case EventKind::BeaconStart: on_beacon_start(ev, t_end); break;
            case EventKind::CapStart: on_cap_start(ev); break;
            case EventKind::SlotStart: on_slot_start(ev); break;
            case EventKind::FrameEnd: on_frame_end(ev, t_end); break;
            case EventKind::ChannelStep: on_channel_step(ev, t_end); break;
            case EventKind::TxAttempt:
            case EventKind::TxEnd:
                break;  // trace markers; outcomes were resolved at scheduling time
        }
    }

    void on_channel_step(const Event& ev, double t_end) {
        std::int64_t b = static_cast<std::int64_t>(std::llround(ev.time_s / cfg_.slot_duration_s));
        for (int c = 0; c < cfg_.channel_count; ++c) state_at_boundary(c, b);
        double next = slot_time(b + 1);
        if (next < t_end)
            queue_.schedule(make_event(next, EventKind::ChannelStep, ev.frame), clock_.now_s);
    }

    void on_beacon_start(const Event& ev, double t_end) {
        (void)t_end;
        frame_ = ev.frame;
        frame_start_s_ = ev.time_s;
        frame_start_boundary_ =
            static_cast<std::int64_t>(std::llround(ev.time_s / cfg_.slot_duration_s));
        reset_frame_state();

        if (!alive(cfg_.coordinator_id())) {
            // Coordinator battery empty: the schedule stops but the clock
            // keeps running; frames pass quietly with no transmissions.
            double quiet_end = ev.time_s + cfg_.beacon_duration_s();
            if (cfg_.scheme == Scheme::Tdma)
                quiet_end += cfg_.n_sources * cfg_.slot_duration_s;
            else if (cfg_.scheme == Scheme::Or)
                quiet_end += cfg_.or_window_slots * cfg_.slot_duration_s;
            else
                quiet_end += cfg_.cap_duration_s() +
                             current_beacon_.p() * cfg_.slot_duration_s;
            frame_end_s_ = quiet_end;
            coordinator_dark_ = true;
            queue_.schedule(make_event(quiet_end, EventKind::FrameEnd, frame_), clock_.now_s);
            return;
        }
        coordinator_dark_ = false;

        // Beacon part: coordinator transmits, every live node listens.
        charge(cfg_.coordinator_id(), Activity::Tx, cfg_.beacon_duration_s());
        for (const auto& n : nodes_)
            if (n.role != Role::Coordinator && alive(n.id))
                charge(n.id, Activity::Rx, cfg_.beacon_duration_s());

        refresh_best_relays();

        if (cfg_.scheme == Scheme::Cftim) {
            // The schedule this frame runs under; injectivity and p > m are
            // invariants of every frame.
            superframe_ = Superframe{frame_,
                                     cfg_.beacon_duration_s(),
                                     cfg_.cap_duration_s(),
                                     cfg_.slot_duration_s,
                                     current_beacon_.node_slot_list,
                                     current_beacon_.free_slot_count};
            superframe_.validate();
        }

        double node_part_start = ev.time_s + cfg_.beacon_duration_s();
        if (cfg_.scheme == Scheme::Tdma) {
            frame_end_s_ = node_part_start + cfg_.n_sources * cfg_.slot_duration_s;
            tdma_start_s_ = node_part_start;
            cap_start_s_ = node_part_start;  // packet generation instant
            p_ = cfg_.n_sources;
            plan_tdma_baseline();
            for (int j = 0; j < p_; ++j)
                queue_.schedule(make_event(tdma_start_s_ + j * cfg_.slot_duration_s,
                                           EventKind::SlotStart, frame_, NodeId{-1}, j),
                                clock_.now_s);
            queue_.schedule(make_event(frame_end_s_, EventKind::FrameEnd, frame_), clock_.now_s);
        } else {
            queue_.schedule(make_event(node_part_start, EventKind::CapStart, frame_),
                            clock_.now_s);
        }
    }

    void on_cap_start(const Event& ev) {
        if (cfg_.scheme == Scheme::Cftim) {
            resolve_cftim_cap(ev.time_s);
            plan_cftim_tdma(ev.time_s + cfg_.cap_duration_s());
        } else {
            resolve_or_window(ev.time_s);
        }
    }

    void on_slot_start(const Event& ev) { resolve_slot(ev.slot, ev.time_s); }

    void on_frame_end(const Event& ev, double t_end) {
        finish_frame(ev.time_s);
        if (ev.time_s < t_end)
            queue_.schedule(make_event(ev.time_s, EventKind::BeaconStart, frame_ + 1),
                            clock_.now_s);
    }

    void reset_frame_state() {
        slot_plan_.clear();
        claims_.clear();
        acks_.clear();
        observed_channels_.clear();
        ts_.clear();
        is_.clear();
        is_delta_.clear();
        mitigated_.clear();
        delivered_this_frame_ = 0;
        free_slot_collisions_ = 0;
        collision_count_ = 0;
        claimed_free_slots_.clear();
        std::fill(node_busy_s_.begin(), node_busy_s_.end(), 0.0);
        std::fill(has_sinr_.begin(), has_sinr_.end(), 0);
    }

    void refresh_best_relays() {
        if (cfg_.scheme == Scheme::Tdma) return;
        alive_relays_.clear();
        for (const auto& r : relays_)
            if (alive(r.id)) alive_relays_.push_back(nodes_[r.id.value]);
        for (auto& r : relays_) r.is_best_for.clear();
        if (alive_relays_.empty()) return;
        auto power = [&](NodeId a, NodeId b) { return rx_mw_[a.value][b.value]; };
        for (auto& s : sources_) {
            if (!alive(s.id)) continue;
            s.best_relay = select_best_relay(s.id, alive_relays_, power);
            relays_[s.best_relay.value - cfg_.n_sources].is_best_for.insert(s.id);
        }
    }

    // ---- CFTIM -----------------------------------------------------------

    void resolve_cftim_cap(double cap_start_s) {
        cap_start_s_ = cap_start_s;
        std::int64_t cap_boundary = frame_start_boundary_ + cfg_.beacon_slots;

        std::vector<ContenderSpec> specs;
        if (!alive_relays_.empty())
            for (const auto& s : sources_)
                if (alive(s.id)) specs.push_back({s.id, s.best_relay, 0, 1});

        ContentionParams params;
        params.window_bslots = static_cast<int>(
            std::floor(cfg_.cap_duration_s() / cfg_.tau_s_s + 1e-9));
        params.tx_bslots = bslots_per_packet();
        params.cw_min = cfg_.cw_min;
        params.cw_max = cfg_.cw_max;
        params.noise_mw = noise_mw();
        params.threshold_db = cfg_.sinr_threshold_db;

        auto power = [&](NodeId a, NodeId b) { return rx_mw_[a.value][b.value]; };
        auto penalty = [&](int bslot) {
            return penalty_linear(state_at_boundary(0, boundary_of_bslot(cap_boundary, bslot)));
        };
        auto draw = [&](int cw) {
            return std::uniform_int_distribution<int>(0, cw - 1)(backoff_rng_);
        };
        DeliveryHook hook = [&](const ContentionAttempt& a, const AddPacketFn&) {
            auto& relay = relays_[a.rx.value - cfg_.n_sources];
            relay.buffer.push_back(
                Packet{a.tx, cfg_.packet_size_bytes, cap_start_s_, std::nullopt, 1});
        };

        auto outcome = run_contention_window(params, specs, power, penalty, draw, hook);
        record_contention(outcome, cap_start_s, params);

        // TS / IS partition of this frame's contenders.
        for (std::size_t i = 0; i < specs.size(); ++i) {
            const auto& r = outcome.contenders[i];
            auto& src = sources_[r.id.value];
            bool clear = r.transmitted &&
                         classify_source(r.last_sinr_db, cfg_.sinr_threshold_db) ==
                             SourceClass::NonInterfering;
            src.classification =
                clear ? SourceClass::NonInterfering : SourceClass::HighInterfering;
            if (clear) {
                ts_.insert(r.id);
            } else {
                is_.insert(r.id);
                double delta =
                    r.transmitted ? db_to_linear(r.last_sinr_db) : 0.0;
                is_delta_[r.id] = delta;
            }
        }
        // Sources that could not contend at all (no live relay) count as IS.
        if (alive_relays_.empty())
            for (const auto& s : sources_)
                if (alive(s.id)) {
                    sources_[s.id.value].classification = SourceClass::HighInterfering;
                    is_.insert(s.id);
                    is_delta_[s.id] = 0.0;
                }

        // Relays listen for the whole CAP; the coordinator sleeps through it
        // (no CAP traffic is addressed to it) and its gap becomes idle time
        // in the frame-end top-up.
        for (const auto& r : relays_)
            if (alive(r.id)) charge(r.id, Activity::Rx, cfg_.cap_duration_s());
    }

    /// Books CAP/OR contention results: energy, SINR samples, trace events.
    void record_contention(const ContentionOutcome& outcome, double window_start_s,
                           const ContentionParams& params) {
        for (const auto& a : outcome.attempts) {
            double t0 = window_start_s + a.start_bslot * cfg_.tau_s_s;
            double t1 = t0 + params.tx_bslots * cfg_.tau_s_s;
            queue_.schedule(make_event(t0, EventKind::TxAttempt, frame_, a.tx, -1, 0),
                            clock_.now_s);
            queue_.schedule(make_event(t1, EventKind::TxEnd, frame_, a.tx, -1, 0), clock_.now_s);
            if (!a.success && a.concurrent > 0) ++collision_count_;
        }
        // Transmit energy covers the physical packet time; the remainder of
        // each occupied backoff slot is listening.
        double occupancy_s = params.tx_bslots * cfg_.tau_s_s;
        for (const auto& r : outcome.contenders) {
            double tx_s = r.tx_attempts * cfg_.packet_duration_s();
            double busy_s = r.finish_bslot * cfg_.tau_s_s;
            charge(r.id, Activity::Tx, tx_s);
            charge(r.id, Activity::Sense,
                   std::max(0.0, busy_s - r.tx_attempts * occupancy_s));
            node_busy_s_[r.id.value] += r.tx_attempts * occupancy_s - tx_s;
            if (r.transmitted) note_sinr(r.id, r.last_sinr_db);
        }
    }

    /// ISBR nodes pick their slots and scan for stable channels; the slot
    /// plan then drives the SlotStart events of this frame's TDMA part.
    void plan_cftim_tdma(double tdma_start_s) {
        tdma_start_s_ = tdma_start_s;
        std::int64_t tdma_boundary = frame_start_boundary_ + cfg_.beacon_slots + cfg_.cap_slots;
        p_ = current_beacon_.p();
        frame_end_s_ = tdma_start_s + p_ * cfg_.slot_duration_s;

        auto plan_node = [&](NodeId id, LotteryState& lottery, bool is_relay, int burst) {
            SlotDecision d = ftdma_node_step(id, lottery, current_beacon_, slot_rng_);
            if (d.action == SlotDecision::Action::WaitFrame) return;
            double t_data = burst * cfg_.packet_duration_s();
            int sensed = 0;
            auto candidates =
                std::span<const MarkovChannel>(channels_).subspan(1);  // base excluded
            // Conceptually the node scans at TDMA start; advance to that point.
            for (int c = 1; c < cfg_.channel_count; ++c) state_at_boundary(c, tdma_boundary);
            auto pick = find_stable_channel(candidates, d.slot, cfg_.slot_duration_s, t_data,
                                            cfg_.tau_s_s, cfg_.p_thr, scan_rng_, &sensed);
            charge(id, Activity::Sense, sensed * cfg_.tau_s_s);
            if (!pick) {
                ++no_stable_deferrals_;
                return;  // assumption violated: surfaced, node sits this frame out
            }
            int channel = static_cast<int>(*pick) + 1;
            slot_plan_[d.slot].push_back(
                {id, d.action == SlotDecision::Action::TransmitAssigned, is_relay, channel,
                 burst});
            if (d.action == SlotDecision::Action::ClaimFreeSlot)
                claimed_free_slots_.insert(d.slot);
        };

        for (auto& s : sources_) {
            if (!alive(s.id)) continue;
            s.assigned_slot.reset();
            if (auto it = current_beacon_.node_slot_list.find(s.id);
                it != current_beacon_.node_slot_list.end())
                s.assigned_slot = it->second;
            if (s.classification == SourceClass::HighInterfering)
                plan_node(s.id, s.lottery, false, 1);
        }
        for (auto& r : relays_) {
            if (!alive(r.id)) continue;
            r.assigned_slot.reset();
            if (auto it = current_beacon_.node_slot_list.find(r.id);
                it != current_beacon_.node_slot_list.end())
                r.assigned_slot = it->second;
            if (!r.buffer.empty())
                plan_node(r.id, r.lottery, true,
                          std::min<int>(static_cast<int>(r.buffer.size()), slot_capacity()));
        }

        for (int j = 0; j < p_; ++j)
            queue_.schedule(make_event(tdma_start_s + j * cfg_.slot_duration_s,
                                       EventKind::SlotStart, frame_, NodeId{-1}, j),
                            clock_.now_s);
        queue_.schedule(make_event(frame_end_s_, EventKind::FrameEnd, frame_), clock_.now_s);
    }

    void plan_tdma_baseline() {
        for (const auto& s : sources_)
            if (alive(s.id)) slot_plan_[s.id.value].push_back({s.id, true, false, 0, 1});
    }

    void resolve_slot(int slot, double slot_start_s) {
        auto it = slot_plan_.find(slot);
        if (it == slot_plan_.end()) return;
        const auto& txs = it->second;
        std::int64_t boundary =
            static_cast<std::int64_t>(std::llround(slot_start_s / cfg_.slot_duration_s));
        bool collided = txs.size() > 1;

        // Received powers at the coordinator, with each transmitter's own
        // channel-state penalty applied.
        std::vector<double> powers(txs.size());
        for (std::size_t i = 0; i < txs.size(); ++i)
            powers[i] = rx_mw_[txs[i].node.value][cfg_.coordinator_id().value] *
                        penalty_linear(state_at_boundary(txs[i].channel, boundary));

        for (std::size_t i = 0; i < txs.size(); ++i) {
            const auto& tx = txs[i];
            std::vector<double> interferers;
            for (std::size_t j = 0; j < txs.size(); ++j)
                if (j != i) interferers.push_back(powers[j]);
            double ratio = sinr(powers[i], interferers, noise_mw());
            double sinr_db = linear_to_db(ratio);
            bool clear =
                classify_source(sinr_db, cfg_.sinr_threshold_db) == SourceClass::NonInterfering;
            bool success = clear && !collided;
            note_sinr(tx.node, sinr_db);

            double t_data = tx.burst * cfg_.packet_duration_s();
            queue_.schedule(
                make_event(slot_start_s, EventKind::TxAttempt, frame_, tx.node, slot, tx.channel),
                clock_.now_s);
            queue_.schedule(
                make_event(slot_start_s + t_data, EventKind::TxEnd, frame_, tx.node, slot,
                           tx.channel),
                clock_.now_s);
            charge(tx.node, Activity::Tx, t_data);
            if (tx.channel != 0)
                charge(tx.node, Activity::ChannelSwitch, cfg_.energy.switch_duration_s);

            if (success) {
                acks_.push_back(tx.node);
                observed_channels_[tx.node] = tx.channel;
                if (tx.is_relay) {
                    auto& relay = relays_[tx.node.value - cfg_.n_sources];
                    for (int b = 0; b < tx.burst; ++b) {
                        Packet pkt = relay.buffer.front();
                        relay.buffer.erase(relay.buffer.begin());
                        pkt.delivered_at_s = slot_start_s + (b + 1) * cfg_.packet_duration_s();
                        pkt.hops = 2;
                        deliver(pkt);
                    }
                } else {
                    Packet pkt{tx.node, cfg_.packet_size_bytes, cap_start_s_,
                               slot_start_s + cfg_.packet_duration_s(), 1};
                    deliver(pkt);
                    mitigated_.insert(tx.node);
                }
            } else if (collided) {
                ++free_slot_collisions_;
                ++collision_count_;
                if (!tx.assigned) lottery_of(tx.node).on_collision(cfg_.max_retries);
            }
            claims_.push_back({tx.node, slot, tx.channel, tx.assigned, collided, success,
                               tx.burst});
        }
    }

    LotteryState& lottery_of(NodeId id) {
        if (id.value < cfg_.n_sources) return sources_[id.value].lottery;
        return relays_[id.value - cfg_.n_sources].lottery;
    }

    void deliver(Packet pkt) {
        ++delivered_this_frame_;
        ++delivered_total_;
        if (opts_.capture_deliveries) delivered_log_.push_back(pkt);
    }

    // ---- OR baseline -------------------------------------------------------

    void resolve_or_window(double window_start_s) {
        cap_start_s_ = window_start_s;
        std::int64_t window_boundary = frame_start_boundary_ + cfg_.beacon_slots;
        double window_s = cfg_.or_window_slots * cfg_.slot_duration_s;
        frame_end_s_ = window_start_s + window_s;

        std::vector<ContenderSpec> specs;
        if (!alive_relays_.empty())
            for (const auto& s : sources_)
                if (alive(s.id)) specs.push_back({s.id, s.best_relay, 0, 1});

        ContentionParams params;
        params.window_bslots =
            static_cast<int>(std::floor(window_s / cfg_.tau_s_s + 1e-9));
        params.tx_bslots = bslots_per_packet();
        params.cw_min = cfg_.cw_min;
        params.cw_max = cfg_.cw_max;
        params.noise_mw = noise_mw();
        params.threshold_db = cfg_.sinr_threshold_db;

        auto power = [&](NodeId a, NodeId b) { return rx_mw_[a.value][b.value]; };
        auto penalty = [&](int bslot) {
            return penalty_linear(
                state_at_boundary(0, boundary_of_bslot(window_boundary, bslot)));
        };
        auto draw = [&](int cw) {
            return std::uniform_int_distribution<int>(0, cw - 1)(backoff_rng_);
        };
        DeliveryHook hook = [&](const ContentionAttempt& a, const AddPacketFn& add) {
            if (a.rx == cfg_.coordinator_id()) {
                auto& relay = relays_[a.tx.value - cfg_.n_sources];
                Packet pkt = relay.buffer.front();
                relay.buffer.erase(relay.buffer.begin());
                pkt.delivered_at_s =
                    window_start_s + (a.start_bslot + params.tx_bslots) * cfg_.tau_s_s;
                pkt.hops = 2;
                deliver(pkt);
            } else {
                auto& relay = relays_[a.rx.value - cfg_.n_sources];
                relay.buffer.push_back(
                    Packet{a.tx, cfg_.packet_size_bytes, window_start_s, std::nullopt, 1});
                add(a.rx, cfg_.coordinator_id(), a.start_bslot + params.tx_bslots);
            }
        };

        auto outcome = run_contention_window(params, specs, power, penalty, draw, hook);

        // Energy: relays listen whenever they are not transmitting; sources
        // carrier-sense until they finish, then sleep; C listens throughout.
        double tx_slot_s = params.tx_bslots * cfg_.tau_s_s;
        for (const auto& a : outcome.attempts) {
            double t0 = window_start_s + a.start_bslot * cfg_.tau_s_s;
            queue_.schedule(make_event(t0, EventKind::TxAttempt, frame_, a.tx, -1, 0),
                            clock_.now_s);
            queue_.schedule(make_event(t0 + tx_slot_s, EventKind::TxEnd, frame_, a.tx, -1, 0),
                            clock_.now_s);
            if (!a.success && a.concurrent > 0) ++collision_count_;
        }
        std::set<NodeId> joined;
        for (const auto& r : outcome.contenders) {
            double tx_s = r.tx_attempts * cfg_.packet_duration_s();
            double occupied_s = r.tx_attempts * tx_slot_s;
            charge(r.id, Activity::Tx, tx_s);
            if (r.id.value >= cfg_.n_sources) {
                joined.insert(r.id);
                charge(r.id, Activity::Rx, std::max(0.0, window_s - occupied_s));
            } else {
                charge(r.id, Activity::Sense,
                       std::max(0.0, r.finish_bslot * cfg_.tau_s_s - occupied_s));
            }
            node_busy_s_[r.id.value] += occupied_s - tx_s;
            if (r.transmitted) note_sinr(r.id, r.last_sinr_db);
        }
        for (const auto& r : relays_)  // relays that never joined still listen
            if (alive(r.id) && !joined.count(r.id)) charge(r.id, Activity::Rx, window_s);
        charge(cfg_.coordinator_id(), Activity::Rx, window_s);

        for (std::size_t i = 0; i < specs.size(); ++i) {
            const auto& r = outcome.contenders[i];
            auto& src = sources_[r.id.value];
            bool clear = r.transmitted &&
                         classify_source(r.last_sinr_db, cfg_.sinr_threshold_db) ==
                             SourceClass::NonInterfering;
            src.classification =
                clear ? SourceClass::NonInterfering : SourceClass::HighInterfering;
            if (clear) {
                ts_.insert(r.id);
            } else {
                is_.insert(r.id);
                is_delta_[r.id] = r.transmitted ? db_to_linear(r.last_sinr_db) : 0.0;
            }
        }

        queue_.schedule(make_event(frame_end_s_, EventKind::FrameEnd, frame_), clock_.now_s);
    }

    // ---- frame close -------------------------------------------------------

    void finish_frame(double frame_end_s) {
        double frame_duration_s = frame_end_s - frame_start_s_;
        const double thr_linear = db_to_linear(cfg_.sinr_threshold_db);

        // TDMA baseline: classification from the fixed-slot transmissions.
        if (cfg_.scheme == Scheme::Tdma) {
            for (const auto& c : claims_) {
                if (c.success) {
                    ts_.insert(c.node);
                } else {
                    is_.insert(c.node);
                    is_delta_[c.node] = db_to_linear(last_sinr_db_[c.node.value]);
                }
            }
        }

        // Residual interference: IS members whose transmission was moved to a
        // dedicated slot / stable channel this frame no longer contribute.
        double delta_sum_unmitigated = 0.0;
        std::vector<double> is_deltas;
        is_deltas.reserve(is_delta_.size());
        for (const auto& [id, delta] : is_delta_) {
            is_deltas.push_back(delta);
            if (!mitigated_.count(id)) delta_sum_unmitigated += delta;
        }

        // Idle/always-on completion per scheme.
        if (cfg_.scheme == Scheme::Tdma) {
            // Traditional TDMA nodes keep their receivers on outside their
            // own slot; unused relays stay asleep.
            for (const auto& s : sources_)
                if (alive(s.id))
                    charge(s.id, Activity::Rx,
                           std::max(0.0, frame_duration_s - node_busy_s_[s.id.value]));
            for (const auto& r : relays_)
                if (alive(r.id)) charge(r.id, Activity::Idle, frame_duration_s, false);
            charge(cfg_.coordinator_id(), Activity::Rx,
                   cfg_.n_sources * cfg_.slot_duration_s);
        } else {
            if (cfg_.scheme == Scheme::Cftim)
                charge(cfg_.coordinator_id(), Activity::Rx, p_ * cfg_.slot_duration_s);
            for (const auto& n : nodes_) {
                if (!alive(n.id)) continue;
                double idle = frame_duration_s - node_busy_s_[n.id.value];
                if (idle > 0.0) ledger_.record(n.id, Activity::Idle, idle);
            }
        }

        // Coordinator bookkeeping and the next schedule (CFTIM only).
        Beacon next;
        int unused_free = 0;
        if (cfg_.scheme == Scheme::Cftim && !coordinator_dark_) {
            unused_free = current_beacon_.free_slot_count -
                          static_cast<int>(claimed_free_slots_.size());
            next = coordinator_.close_frame(frame_, acks_, free_slot_collisions_, unused_free,
                                            observed_channels_);
        } else if (coordinator_dark_) {
            next = current_beacon_;  // stale schedule; nobody runs it anyway
        }

        // Metrics row.
        MetricsFrame row;
        row.frame = frame_;
        row.time_s = frame_end_s;
        std::vector<double> samples;
        for (std::size_t i = 0; i < nodes_.size(); ++i)
            if (has_sinr_[i]) samples.push_back(last_sinr_db_[i]);
        row.avg_sinr_db = frame_avg_sinr_db(samples);
        running_sinr_sum_db_ += row.avg_sinr_db * (samples.empty() ? 0 : 1);
        running_sinr_frames_ += samples.empty() ? 0 : 1;
        row.running_mean_sinr_db =
            running_sinr_frames_ > 0 ? running_sinr_sum_db_ / running_sinr_frames_ : 0.0;
        row.eq6_residual = residual_interference(is_deltas, thr_linear);
        row.cum_energy_j = ledger_.total_consumed_j();
        row.delivered = delivered_this_frame_;
        row.collisions = collision_count_;
        row.outage = delta_sum_unmitigated > thr_linear;
        metrics_.push_back(row);
        aggregate_interference_.push_back(delta_sum_unmitigated);

        if (opts_.observer) {
            FrameObservation obs;
            obs.frame = frame_;
            obs.start_s = frame_start_s_;
            obs.end_s = frame_end_s;
            obs.beacon = current_beacon_;
            obs.next_beacon = next;
            obs.claims = claims_;
            obs.ts = ts_;
            obs.is = is_;
            obs.acked = acks_;
            obs.delivered = delivered_this_frame_;
            obs.free_slot_collisions = free_slot_collisions_;
            opts_.observer(obs);
        }

        // Undelivered relay buffers expire with the frame.
        for (auto& r : relays_) {
            relay_drops_ += static_cast<std::int64_t>(r.buffer.size());
            r.buffer.clear();
        }

        if (cfg_.scheme == Scheme::Cftim) current_beacon_ = next;
    }

    RunResult finalize(double t_end) {
        RunResult result;
        result.frames = std::move(metrics_);
        result.trace = std::move(trace_);
        result.delivered_log = std::move(delivered_log_);

        RunSummary s;
        s.scheme = cfg_.scheme;
        s.seed = cfg_.rng_seed;
        s.frames = static_cast<std::int64_t>(result.frames.size());
        s.sim_time_s = result.frames.empty() ? 0.0 : result.frames.back().time_s;
        s.final_energy_j = ledger_.total_consumed_j();
        s.delivered_total = delivered_total_;
        s.mean_throughput_msg_s =
            s.sim_time_s > 0.0 ? static_cast<double>(delivered_total_) / s.sim_time_s : 0.0;
        if (!aggregate_interference_.empty())
            s.outage_probability =
                outage_estimate(aggregate_interference_, db_to_linear(cfg_.sinr_threshold_db));
        s.final_running_mean_sinr_db =
            result.frames.empty() ? 0.0 : result.frames.back().running_mean_sinr_db;
        s.relay_drops = relay_drops_;
        s.no_stable_deferrals = no_stable_deferrals_;
        s.exhausted_nodes = ledger_.exhausted_count();
        result.summary = s;
        (void)t_end;
        return result;
    }

    // ---- members -----------------------------------------------------------

    ScenarioConfig cfg_;
    RunOptions opts_;
    RngStreams rngs_;
    std::mt19937_64 backoff_rng_;
    std::mt19937_64 slot_rng_;
    std::mt19937_64 scan_rng_;

    std::vector<Node> nodes_;
    std::vector<std::vector<double>> rx_mw_;
    std::vector<MarkovChannel> channels_;
    std::vector<std::mt19937_64> channel_rngs_;
    std::vector<std::int64_t> channel_boundary_;

    EventQueue queue_;
    SimClock clock_;
    Trace trace_;
    EnergyLedger ledger_;

    std::vector<SourceState> sources_;
    std::vector<RelayState> relays_;
    std::vector<Node> alive_relays_;
    CoordinatorState coordinator_;
    Beacon current_beacon_;
    Superframe superframe_;
    bool coordinator_dark_ = false;

    // Frame-scoped scratch.
    std::int64_t frame_ = 0;
    double frame_start_s_ = 0.0;
    std::int64_t frame_start_boundary_ = 0;
    double cap_start_s_ = 0.0;
    double tdma_start_s_ = 0.0;
    double frame_end_s_ = 0.0;
    int p_ = 0;
    std::map<int, std::vector<PlannedTx>> slot_plan_;
    std::vector<ClaimRecord> claims_;
    std::vector<NodeId> acks_;
    std::map<NodeId, int> observed_channels_;
    std::set<NodeId> ts_;
    std::set<NodeId> is_;
    std::map<NodeId, double> is_delta_;
    std::set<NodeId> mitigated_;
    std::set<int> claimed_free_slots_;
    std::vector<double> node_busy_s_;
    std::vector<double> last_sinr_db_;
    std::vector<char> has_sinr_;
    int delivered_this_frame_ = 0;
    int free_slot_collisions_ = 0;
    int collision_count_ = 0;

    // Run accumulators.
    std::vector<MetricsFrame> metrics_;
    std::vector<double> aggregate_interference_;
    std::vector<Packet> delivered_log_;
    std::int64_t delivered_total_ = 0;
    std::int64_t relay_drops_ = 0;
    std::int64_t no_stable_deferrals_ = 0;
    double running_sinr_sum_db_ = 0.0;
    std::int64_t running_sinr_frames_ = 0;
};

/// Runs one validated scenario to completion.
inline RunResult run_scenario(const ScenarioConfig& cfg, RunOptions opts = {}) {
    Simulation sim(cfg, std::move(opts));
    return sim.run();
}

}  // namespace cftim
