#pragma once

#include <cstdint>
#include <queue>
#include <vector>

#include "cftim/core.hpp"
#include "cftim/errors.hpp"

namespace cftim {

enum class EventKind : std::uint8_t {
    BeaconStart,
    CapStart,
    SlotStart,
    TxAttempt,
    TxEnd,
    ChannelStep,
    FrameEnd,
};

inline const char* to_string(EventKind k) {
    switch (k) {
        case EventKind::BeaconStart: return "BeaconStart";
        case EventKind::CapStart: return "CapStart";
        case EventKind::SlotStart: return "SlotStart";
        case EventKind::TxAttempt: return "TxAttempt";
        case EventKind::TxEnd: return "TxEnd";
        case EventKind::ChannelStep: return "ChannelStep";
        case EventKind::FrameEnd: return "FrameEnd";
    }
    return "?";
}

struct Event {
    double time_s = 0.0;
    std::uint64_t sequence = 0;  // assigned by the queue; unique tiebreaker
    EventKind kind = EventKind::FrameEnd;
    std::int64_t frame = -1;
    NodeId node{-1};
    std::int32_t slot = -1;
    std::int32_t channel = -1;
};

struct SimClock {
    double now_s = 0.0;
    std::int64_t frame = 0;
};

/// Min-queue over (time, sequence). Sequence numbers make dequeue order total
/// and FIFO-stable for equal timestamps.
class EventQueue {
public:
    /// Enqueues at ev.time_s, which must not lie in the past.
    void schedule(Event ev, double now_s) {
        if (ev.time_s < now_s)
            throw SimError(ErrorKind::SchedulingInPast, "time_s",
                           "event scheduled before the current simulation time");
        ev.sequence = next_sequence_++;
        heap_.push(ev);
    }

    bool empty() const { return heap_.empty(); }
    std::size_t size() const { return heap_.size(); }
    const Event& peek() const { return heap_.top(); }

    Event pop() {
        Event ev = heap_.top();
        heap_.pop();
        // Dequeue order must be non-decreasing in (time, sequence).
        if (have_last_ && (ev.time_s < last_time_ ||
                           (ev.time_s == last_time_ && ev.sequence < last_sequence_)))
            throw SimError(ErrorKind::InvalidValue, "event_queue",
                           "events dequeued out of (time, sequence) order");
        have_last_ = true;
        last_time_ = ev.time_s;
        last_sequence_ = ev.sequence;
        return ev;
    }

private:
    struct After {
        bool operator()(const Event& a, const Event& b) const {
            if (a.time_s != b.time_s) return a.time_s > b.time_s;
            return a.sequence > b.sequence;
        }
    };

    std::priority_queue<Event, std::vector<Event>, After> heap_;
    std::uint64_t next_sequence_ = 0;
    bool have_last_ = false;
    double last_time_ = 0.0;
    std::uint64_t last_sequence_ = 0;
};

using Trace = std::vector<Event>;

}  // namespace cftim
