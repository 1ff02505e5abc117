#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "cftim/core.hpp"
#include "cftim/errors.hpp"

namespace cftim {

enum class Activity : std::uint8_t { Tx, Rx, Sense, Idle, ChannelSwitch };

inline const char* to_string(Activity a) {
    switch (a) {
        case Activity::Tx: return "tx";
        case Activity::Rx: return "rx";
        case Activity::Sense: return "sense";
        case Activity::Idle: return "idle";
        case Activity::ChannelSwitch: return "switch";
    }
    return "?";
}

/// Per-node joule accounting split by radio activity. A node that exhausts
/// its budget is marked dead: the charge is clamped at the remaining energy
/// and the node is expected to stop transmitting; the run continues.
class EnergyLedger {
public:
    EnergyLedger() = default;

    EnergyLedger(const std::vector<Node>& nodes, const EnergyModelConfig& model)
        : model_(model) {
        entries_.resize(nodes.size());
        for (std::size_t i = 0; i < nodes.size(); ++i) {
            entries_[i].initial_j = nodes[i].initial_energy_j;
            entries_[i].remaining_j = nodes[i].initial_energy_j;
        }
    }

    double draw_mw(Activity a) const {
        switch (a) {
            case Activity::Tx: return model_.tx_mw;
            case Activity::Rx: return model_.rx_mw;
            case Activity::Sense: return model_.sense_mw;
            case Activity::Idle: return model_.idle_mw;
            case Activity::ChannelSwitch: return model_.switch_mw;
        }
        return 0.0;
    }

    /// Charges power(activity) * duration joules to the node. Returns true
    /// while the node still has energy afterwards; false once exhausted.
    bool record(NodeId node, Activity activity, double duration_s) {
        if (duration_s < 0.0)
            throw SimError(ErrorKind::NonPositiveDuration, "duration_s", "must be >= 0");
        auto& e = entries_.at(node.value);
        if (e.dead) return false;
        double joules = draw_mw(activity) * 1e-3 * duration_s;
        if (joules >= e.remaining_j) {
            joules = e.remaining_j;
            e.dead = true;
        }
        e.by_activity[static_cast<int>(activity)] += joules;
        e.remaining_j -= joules;
        return !e.dead;
    }

    bool exhausted(NodeId node) const { return entries_.at(node.value).dead; }
    double remaining_j(NodeId node) const { return entries_.at(node.value).remaining_j; }
    double initial_j(NodeId node) const { return entries_.at(node.value).initial_j; }

    double consumed_j(NodeId node) const {
        const auto& e = entries_.at(node.value);
        double total = 0.0;
        for (double j : e.by_activity) total += j;
        return total;
    }

    double activity_j(NodeId node, Activity a) const {
        return entries_.at(node.value).by_activity[static_cast<int>(a)];
    }

    double total_consumed_j() const {
        double total = 0.0;
        for (std::size_t i = 0; i < entries_.size(); ++i)
            total += consumed_j(NodeId{static_cast<std::int32_t>(i)});
        return total;
    }

    int exhausted_count() const {
        int n = 0;
        for (const auto& e : entries_) n += e.dead ? 1 : 0;
        return n;
    }

    std::size_t node_count() const { return entries_.size(); }

private:
    struct Entry {
        std::array<double, 5> by_activity{};
        double initial_j = 0.0;
        double remaining_j = 0.0;
        bool dead = false;
    };

    EnergyModelConfig model_;
    std::vector<Entry> entries_;
};

/// One exported timeseries row per superframe.
struct MetricsFrame {
    std::int64_t frame = 0;
    double time_s = 0.0;  // frame end time; strictly increasing
    double avg_sinr_db = 0.0;
    double running_mean_sinr_db = 0.0;
    double eq6_residual = 0.0;  // linear residual interference of the frame's IS set
    double cum_energy_j = 0.0;
    int delivered = 0;
    int collisions = 0;
    bool outage = false;
};

// -------------------------------------------------------------------------
// Frame statistics

/// Residual interference of an IS set under probabilistic channel
/// assignment: sum of delta_j * (1 - delta_j / delta_thr), linear scale.
inline double residual_interference(std::span<const double> deltas_linear,
                                    double delta_thr_linear) {
    double sum = 0.0;
    for (double d : deltas_linear) sum += d * (1.0 - d / delta_thr_linear);
    return sum;
}

/// Mean of the frame's per-transmission SINR samples, in dB.
inline double frame_avg_sinr_db(std::span<const double> samples_db) {
    if (samples_db.empty()) return 0.0;
    double sum = 0.0;
    for (double s : samples_db) sum += s;
    return sum / static_cast<double>(samples_db.size());
}

/// Successful messages per second: deliveries with t0 <= delivered_at < t1.
inline double throughput(const std::vector<Packet>& delivered, double t0, double t1) {
    if (!(t1 > t0))
        throw SimError(ErrorKind::NonPositiveDuration, "window", "window must be > 0");
    std::int64_t count = 0;
    for (const auto& p : delivered)
        if (p.delivered_at_s && *p.delivered_at_s >= t0 && *p.delivered_at_s < t1) ++count;
    return static_cast<double>(count) / (t1 - t0);
}

/// Fraction of frames whose aggregate interference exceeds the threshold.
inline double outage_estimate(std::span<const double> aggregate_interference_linear,
                              double delta_thr_linear) {
    if (aggregate_interference_linear.empty())
        throw SimError(ErrorKind::InvalidValue, "samples", "need at least one frame");
    std::int64_t over = 0;
    for (double v : aggregate_interference_linear)
        if (v > delta_thr_linear) ++over;
    return static_cast<double>(over) /
           static_cast<double>(aggregate_interference_linear.size());
}

}  // namespace cftim
