#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "cftim/channel.hpp"
#include "cftim/core.hpp"

namespace cftim {

/// Slotted CSMA/CA over a single shared channel. Backoff counters decrement
/// only while the medium is idle; every contender whose counter reaches zero
/// in the same idle slot transmits concurrently, and concurrent transmitters
/// interfere at each other's receivers. Binary exponential backoff on
/// failure.
struct ContentionParams {
    int window_bslots = 0;  // window length in backoff slots
    int tx_bslots = 0;      // packet duration in backoff slots
    int cw_min = 8;
    int cw_max = 64;
    double noise_mw = 1e-13;
    double threshold_db = 7.0;
};

struct ContenderSpec {
    NodeId id;
    NodeId receiver;
    int arrival_bslot = 0;
    int packets = 1;
};

struct ContentionAttempt {
    NodeId tx;
    NodeId rx;
    int start_bslot = 0;
    int concurrent = 0;  // other transmitters overlapping this attempt
    double sinr_db = 0.0;
    bool clear = false;    // measured SINR >= threshold
    bool success = false;  // clear and the receiver was able to listen
};

struct ContenderResult {
    NodeId id;
    int delivered = 0;
    int tx_attempts = 0;
    int finish_bslot = 0;  // listening stops here; window end if never finished
    bool transmitted = false;
    bool all_delivered = false;
    double last_sinr_db = 0.0;  // of the final attempt, when transmitted
};

struct ContentionOutcome {
    std::vector<ContentionAttempt> attempts;
    std::vector<ContenderResult> contenders;  // initial specs first, joiners appended
};

/// Callback invoked on every successful delivery. `add(id, receiver,
/// arrival_bslot)` enqueues one more packet for `id` (joining the contention
/// if it is not already in it), e.g. a relay that now has data to forward.
using AddPacketFn = std::function<void(NodeId, NodeId, int)>;
using DeliveryHook = std::function<void(const ContentionAttempt&, const AddPacketFn&)>;

/// power_mw(tx, rx): received power without channel-state penalty.
/// penalty_linear(bslot): multiplicative channel-state factor at that slot.
/// draw(cw): backoff draw, uniform on [0, cw).
template <class PowerFn, class PenaltyFn, class DrawFn>
ContentionOutcome run_contention_window(const ContentionParams& params,
                                        std::span<const ContenderSpec> specs,
                                        PowerFn&& power_mw, PenaltyFn&& penalty_linear,
                                        DrawFn&& draw,
                                        const DeliveryHook& on_delivery = {}) {
    struct State {
        ContenderSpec spec;
        int packets_left;
        int cw;
        int backoff;
        int attempts = 0;
        int delivered = 0;
        int finish_bslot = 0;
        bool idle_done = false;  // no packets pending
        bool transmitted = false;
        double last_sinr_db = 0.0;
    };

    std::vector<State> states;
    states.reserve(specs.size());
    for (const auto& spec : specs) {
        State s{spec, spec.packets, params.cw_min, 0};
        s.backoff = draw(s.cw);
        s.finish_bslot = params.window_bslots;
        states.push_back(s);
    }

    AddPacketFn add = [&](NodeId id, NodeId receiver, int arrival) {
        for (auto& s : states) {
            if (s.spec.id == id) {
                ++s.packets_left;
                if (s.idle_done) {
                    s.idle_done = false;
                    s.spec.arrival_bslot = arrival;
                    s.cw = params.cw_min;
                    s.backoff = draw(s.cw);
                    s.finish_bslot = params.window_bslots;
                }
                return;
            }
        }
        State s{ContenderSpec{id, receiver, arrival, 1}, 1, params.cw_min, 0};
        s.backoff = draw(s.cw);
        s.finish_bslot = params.window_bslots;
        states.push_back(s);
    };

    ContentionOutcome outcome;
    std::vector<std::size_t> transmitters;
    std::vector<double> interferers_mw;

    int busy_until = 0;
    for (int t = 0; t < params.window_bslots; ++t) {
        if (t < busy_until) continue;  // medium busy; counters frozen

        transmitters.clear();
        for (std::size_t i = 0; i < states.size(); ++i) {
            auto& s = states[i];
            if (s.idle_done || s.packets_left <= 0 || s.spec.arrival_bslot > t) continue;
            if (s.backoff == 0 && t + params.tx_bslots <= params.window_bslots)
                transmitters.push_back(i);
        }

        if (transmitters.empty()) {
            for (auto& s : states) {
                if (s.idle_done || s.packets_left <= 0 || s.spec.arrival_bslot > t) continue;
                if (s.backoff > 0) --s.backoff;
            }
            continue;
        }

        int tx_end = t + params.tx_bslots;
        busy_until = tx_end;
        double penalty = penalty_linear(t);

        for (std::size_t i : transmitters) {
            auto& s = states[i];
            NodeId rx = s.spec.receiver;
            double desired = power_mw(s.spec.id, rx) * penalty;
            interferers_mw.clear();
            bool receiver_deaf = false;
            for (std::size_t j : transmitters) {
                if (j == i) continue;
                if (states[j].spec.id == rx) receiver_deaf = true;
                interferers_mw.push_back(power_mw(states[j].spec.id, rx) * penalty);
            }
            double ratio = sinr(desired, interferers_mw, params.noise_mw);
            double sinr_db = linear_to_db(ratio);
            bool clear = classify_source(sinr_db, params.threshold_db) ==
                         SourceClass::NonInterfering;
            bool success = clear && !receiver_deaf;

            ContentionAttempt attempt{s.spec.id,
                                      rx,
                                      t,
                                      static_cast<int>(transmitters.size()) - 1,
                                      sinr_db,
                                      clear,
                                      success};
            outcome.attempts.push_back(attempt);
            ++s.attempts;
            s.transmitted = true;
            s.last_sinr_db = sinr_db;

            if (success) {
                ++s.delivered;
                --s.packets_left;
                if (s.packets_left == 0) {
                    s.idle_done = true;
                    s.finish_bslot = tx_end;
                } else {
                    s.cw = params.cw_min;
                    s.backoff = draw(s.cw);
                }
                if (on_delivery) on_delivery(attempt, add);
            } else {
                s.cw = std::min(s.cw * 2, params.cw_max);
                s.backoff = draw(s.cw);
            }
        }
    }

    outcome.contenders.reserve(states.size());
    for (const auto& s : states) {
        ContenderResult r;
        r.id = s.spec.id;
        r.delivered = s.delivered;
        r.tx_attempts = s.attempts;
        r.finish_bslot = s.idle_done ? s.finish_bslot : params.window_bslots;
        r.transmitted = s.transmitted;
        r.all_delivered = s.idle_done && s.packets_left == 0;
        r.last_sinr_db = s.last_sinr_db;
        outcome.contenders.push_back(r);
    }
    return outcome;
}

}  // namespace cftim
