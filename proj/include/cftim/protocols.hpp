#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <vector>

#include "cftim/channel.hpp"
#include "cftim/core.hpp"

namespace cftim {

/// The unique best relay for a source: the relay receiving it strongest,
/// ties broken by lowest node id.
template <class PowerFn>
NodeId select_best_relay(NodeId source, std::span<const Node> relays, PowerFn&& rx_power_mw) {
    NodeId best{-1};
    double best_power = -1.0;
    for (const auto& relay : relays) {
        double p = rx_power_mw(source, relay.id);
        if (p > best_power || (p == best_power && relay.id < best)) {
            best_power = p;
            best = relay.id;
        }
    }
    return best;
}

/// Next frame's slot count: p = m + clamp(p_min_slack + ceil(mean collisions
/// over the last k frames), p_min_slack, p_max_slack). Collision-free history
/// shrinks p back toward m + p_min_slack; p > m always. The unused-free-slot
/// history is tracked for reporting; the shrink behaviour already follows
/// from the collision term going to zero.
inline int predict_p(std::span<const int> collision_history, std::span<const int> unused_history,
                     int m, int p_min_slack, int p_max_slack) {
    (void)unused_history;
    double mean = 0.0;
    if (!collision_history.empty()) {
        double sum = 0.0;
        for (int c : collision_history) sum += c;
        mean = sum / static_cast<double>(collision_history.size());
    }
    int slack = p_min_slack + static_cast<int>(std::ceil(mean));
    slack = std::clamp(slack, p_min_slack, p_max_slack);
    return m + slack;
}

// -------------------------------------------------------------------------
// Node-side state

/// Free-slot lottery bookkeeping shared by IS sources and best relays.
/// One free-slot attempt per frame; after max_retries consecutive failed
/// frames the node sits out one frame, then resumes with a reset counter.
struct LotteryState {
    int retry_counter = 0;
    bool wait_this_frame = false;

    void on_collision(int max_retries) {
        ++retry_counter;
        if (retry_counter >= max_retries) {
            retry_counter = 0;
            wait_this_frame = true;  // consumed by the next frame's decision
        }
    }

    void on_success() {
        retry_counter = 0;
        wait_this_frame = false;
    }
};

struct SourceState {
    NodeId id;
    NodeId best_relay{-1};
    SourceClass classification = SourceClass::NonInterfering;
    std::optional<int> assigned_slot;
    LotteryState lottery;
};

struct RelayState {
    NodeId id;
    std::set<NodeId> is_best_for;
    std::vector<Packet> buffer;  // packets received this frame, cleared at frame end
    std::optional<int> assigned_slot;
    LotteryState lottery;
};

/// What a node in ISBR does in the TDMA part of the current frame.
struct SlotDecision {
    enum class Action { TransmitAssigned, ClaimFreeSlot, WaitFrame };
    Action action = Action::WaitFrame;
    int slot = -1;
};

/// Assigned nodes use their dedicated slot; unassigned nodes draw one of the
/// p-m free slots uniformly, unless they are sitting out this frame after
/// exhausting their retries.
template <class URBG>
SlotDecision ftdma_node_step(NodeId id, LotteryState& lottery, const Beacon& beacon,
                             URBG& slot_rng) {
    auto it = beacon.node_slot_list.find(id);
    if (it != beacon.node_slot_list.end()) return {SlotDecision::Action::TransmitAssigned, it->second};
    if (lottery.wait_this_frame) {
        lottery.wait_this_frame = false;
        return {SlotDecision::Action::WaitFrame, -1};
    }
    std::uniform_int_distribution<int> pick(0, beacon.free_slot_count - 1);
    int free_slot = beacon.m() + pick(slot_rng);
    return {SlotDecision::Action::ClaimFreeSlot, free_slot};
}

// -------------------------------------------------------------------------
// Coordinator

/// Reception log, collision history, and beacon formation. The node-slot
/// list of frame k+1 holds every node the coordinator heard within the
/// active window (which always includes this frame's acknowledged ids).
class CoordinatorState {
public:
    CoordinatorState(int k_history, int active_window, int p_min_slack, int p_max_slack)
        : k_history_(k_history),
          active_window_(active_window),
          p_min_slack_(p_min_slack),
          p_max_slack_(p_max_slack) {
        // Startup padding: an empty history reads as zero collisions.
        for (int i = 0; i < k_history_; ++i) {
            collision_history_.push_back(0);
            unused_history_.push_back(0);
        }
    }

    /// Closes frame `frame_index`: logs the acknowledged ids and this
    /// frame's free-slot collision count, then forms the next beacon.
    Beacon close_frame(std::int64_t frame_index, std::vector<NodeId> acked_ids,
                       int free_slot_collisions, int unused_free_slots,
                       std::map<NodeId, int> observed_channels = {}) {
        log_.push_frame(std::move(acked_ids));
        push_history(collision_history_, free_slot_collisions);
        push_history(unused_history_, unused_free_slots);

        std::set<NodeId> active = active_nodes(log_, frame_index + 1, active_window_);
        Beacon beacon;
        beacon.frame_index = frame_index + 1;
        int slot = 0;
        for (NodeId id : active) beacon.node_slot_list[id] = slot++;

        std::vector<int> coll(collision_history_.begin(), collision_history_.end());
        std::vector<int> unused(unused_history_.begin(), unused_history_.end());
        int p = predict_p(coll, unused, beacon.m(), p_min_slack_, p_max_slack_);
        beacon.free_slot_count = p - beacon.m();
        beacon.stable_channel_assignments = std::move(observed_channels);
        return beacon;
    }

    static Beacon initial_beacon(int p_min_slack) {
        Beacon beacon;
        beacon.frame_index = 0;
        beacon.free_slot_count = std::max(1, p_min_slack);
        return beacon;
    }

    const ReceptionLog& log() const { return log_; }
    const std::deque<int>& collision_history() const { return collision_history_; }

private:
    void push_history(std::deque<int>& h, int value) {
        h.push_back(value);
        while (static_cast<int>(h.size()) > k_history_) h.pop_front();
    }

    int k_history_;
    int active_window_;
    int p_min_slack_;
    int p_max_slack_;
    ReceptionLog log_;
    std::deque<int> collision_history_;
    std::deque<int> unused_history_;
};

}  // namespace cftim
