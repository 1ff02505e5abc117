#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "cftim/errors.hpp"

namespace cftim {

inline double dbm_to_mw(double dbm) { return std::pow(10.0, dbm / 10.0); }
inline double mw_to_dbm(double mw) { return 10.0 * std::log10(mw); }
inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }
inline double linear_to_db(double lin) { return 10.0 * std::log10(lin); }

// -------------------------------------------------------------------------
// Log-distance pathloss

struct LinkBudget {
    double tx_power_dbm = 0.0;
    double distance_m = 1.0;
    double pathloss_exponent = 4.22;
    double reference_distance_m = 0.1;
    double reference_loss_db = 35.0;
};

/// PL(d) = PL0 + 10 * alpha * log10(d / d0), valid for d >= d0.
inline double pathloss_db(const LinkBudget& b) {
    if (b.distance_m < b.reference_distance_m)
        throw SimError(ErrorKind::DistanceBelowReference, "distance_m",
                       "distance below the reference distance d0");
    return b.reference_loss_db +
           10.0 * b.pathloss_exponent * std::log10(b.distance_m / b.reference_distance_m);
}

inline double received_power_dbm(const LinkBudget& b) { return b.tx_power_dbm - pathloss_db(b); }

// -------------------------------------------------------------------------
// SINR and source classification

/// SINR = P / (sum I_i + N0), all in mW, returned as a linear ratio.
inline double sinr(double desired_mw, std::span<const double> interferers_mw, double noise_mw) {
    if (!(noise_mw > 0.0))
        throw SimError(ErrorKind::InvalidValue, "noise_mw", "noise power must be > 0");
    if (desired_mw < 0.0)
        throw SimError(ErrorKind::InvalidValue, "desired_mw", "powers must be >= 0");
    double interference = 0.0;
    for (double i : interferers_mw) {
        if (i < 0.0)
            throw SimError(ErrorKind::InvalidValue, "interferers_mw", "powers must be >= 0");
        interference += i;
    }
    return desired_mw / (interference + noise_mw);
}

enum class SourceClass { NonInterfering, HighInterfering };

/// Clear channel (member of TS) iff SINR >= threshold; ties are clear.
inline SourceClass classify_source(double sinr_db, double threshold_db) {
    return sinr_db >= threshold_db ? SourceClass::NonInterfering
                                   : SourceClass::HighInterfering;
}

// -------------------------------------------------------------------------
// Three-state Markov channel

using Matrix3 = std::array<std::array<double, 3>, 3>;

inline Matrix3 identity3() {
    return {{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}};
}

inline Matrix3 multiply(const Matrix3& a, const Matrix3& b) {
    Matrix3 out{};
    for (int i = 0; i < 3; ++i)
        for (int k = 0; k < 3; ++k) {
            double aik = a[i][k];
            for (int j = 0; j < 3; ++j) out[i][j] += aik * b[k][j];
        }
    return out;
}

inline bool is_row_stochastic(const Matrix3& m, double tol = 1e-9) {
    for (int i = 0; i < 3; ++i) {
        double sum = 0.0;
        for (int j = 0; j < 3; ++j) {
            if (m[i][j] < -tol) return false;
            sum += m[i][j];
        }
        if (std::abs(sum - 1.0) > tol) return false;
    }
    return true;
}

/// P^n by repeated squaring. P^0 is the identity.
inline Matrix3 matrix_power(const Matrix3& p, std::int64_t n) {
    if (n < 0)
        throw SimError(ErrorKind::InvalidValue, "n", "matrix power needs n >= 0");
    if (!is_row_stochastic(p))
        throw SimError(ErrorKind::NonStochasticInput, "matrix",
                       "matrix_power requires a row-stochastic matrix");
    Matrix3 result = identity3();
    Matrix3 base = p;
    while (n > 0) {
        if (n & 1) result = multiply(result, base);
        base = multiply(base, base);
        n >>= 1;
    }
    return result;
}

/// One of the C radio channels. States are 1 (bad), 2 (degraded), 3 (good);
/// the chain advances one step every step_duration seconds.
struct MarkovChannel {
    int channel_index = 0;
    int state = 3;
    Matrix3 step_matrix = identity3();
    double step_duration_s = 1e-3;

    void validate() const {
        if (state < 1 || state > 3)
            throw SimError(ErrorKind::InvalidValue, "state", "channel state must be 1..3");
        if (!is_row_stochastic(step_matrix, 1e-12))
            throw SimError(ErrorKind::NonStochasticInput, "step_matrix",
                           "rows must sum to 1 within 1e-12");
        if (!(step_duration_s > 0.0))
            throw SimError(ErrorKind::NonPositiveDuration, "step_duration_s", "must be > 0");
    }
};

/// Stability test for a transmission scheduled K slots ahead lasting t_data
/// seconds, after sensed_count channels have been sensed at tau_s each:
///
///   mu = K*T + t_data - sensed_count*tau_s,   n = round(mu / step_duration)
///   stable  <=>  P^n(i,i) + P^n(i,i-1) > p_thr
///
/// A channel in state 3 needs no check and is always stable. For state 1 the
/// second term is taken as 0 (there is no state 0).
inline bool is_stable(const MarkovChannel& ch, int wait_slots, double slot_duration_s,
                      double t_data_s, int sensed_count, double tau_s, double p_thr) {
    ch.validate();
    if (ch.state == 3) return true;
    double mu = wait_slots * slot_duration_s + t_data_s - sensed_count * tau_s;
    if (mu < 0.0)
        throw SimError(ErrorKind::NegativeMu, "mu",
                       "sensing time exceeds the scheduling horizon");
    auto n = static_cast<std::int64_t>(std::llround(mu / ch.step_duration_s));
    Matrix3 m = matrix_power(ch.step_matrix, n);
    int i = ch.state - 1;  // 0-based row
    double stay = m[i][i];
    double drift_down = (ch.state >= 2) ? m[i][i - 1] : 0.0;
    return stay + drift_down > p_thr;
}

/// Samples the next state from the current state's transition row.
template <class URBG>
MarkovChannel step_channel(const MarkovChannel& ch, URBG& rng) {
    MarkovChannel next = ch;
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    double u = unit(rng);
    const auto& row = ch.step_matrix[ch.state - 1];
    double acc = 0.0;
    for (int j = 0; j < 3; ++j) {
        acc += row[j];
        if (u < acc) {
            next.state = j + 1;
            return next;
        }
    }
    next.state = 3;  // guard against row-sum rounding
    return next;
}

/// Scans candidates in the given order and returns the index (into the span)
/// of the first stable channel. Sensing the k-th candidate costs tau_s and
/// shrinks mu accordingly: candidate k is judged with sensed_count = k.
/// Returns nullopt when no candidate is stable (the stable-channel
/// availability assumption was violated; callers must handle it explicitly).
inline std::optional<std::size_t> find_stable_channel_ordered(
    std::span<const MarkovChannel> channels, std::span<const std::size_t> scan_order,
    int wait_slots, double slot_duration_s, double t_data_s, double tau_s, double p_thr,
    int* sensed_count_out = nullptr) {
    int sensed = 0;
    for (std::size_t idx : scan_order) {
        ++sensed;
        if (sensed_count_out) *sensed_count_out = sensed;
        if (is_stable(channels[idx], wait_slots, slot_duration_s, t_data_s, sensed, tau_s,
                      p_thr))
            return idx;
    }
    return std::nullopt;
}

/// Same, scanning in a seeded random order drawn from rng.
template <class URBG>
std::optional<std::size_t> find_stable_channel(std::span<const MarkovChannel> channels,
                                               int wait_slots, double slot_duration_s,
                                               double t_data_s, double tau_s, double p_thr,
                                               URBG& rng, int* sensed_count_out = nullptr) {
    std::vector<std::size_t> order(channels.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    return find_stable_channel_ordered(channels, order, wait_slots, slot_duration_s, t_data_s,
                                       tau_s, p_thr, sensed_count_out);
}

}  // namespace cftim
