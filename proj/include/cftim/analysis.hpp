#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "cftim/errors.hpp"
#include "cftim/metrics.hpp"

namespace cftim {

/// Sampler for the interference level delta_j of an IS member. IS membership
/// requires delta_j < delta_thr, so the support must stay below the
/// threshold.
struct DeltaDistribution {
    enum class Kind { Uniform, Constant };
    Kind kind = Kind::Uniform;
    double a = 0.0;  // Uniform lower bound, or the constant value
    double b = 0.0;  // Uniform upper bound (half-open)

    static DeltaDistribution uniform(double lo, double hi) {
        return {Kind::Uniform, lo, hi};
    }
    static DeltaDistribution constant(double v) { return {Kind::Constant, v, v}; }

    double upper_bound() const { return kind == Kind::Uniform ? b : a; }
    bool degenerate_zero() const { return upper_bound() <= 0.0; }

    template <class URBG>
    double sample(URBG& rng) const {
        if (kind == Kind::Constant) return a;
        std::uniform_real_distribution<double> u(a, b);
        return u(rng);
    }
};

struct InterferenceScenario {
    int is_size = 0;
    DeltaDistribution dist;
    double delta_thr = 1.0;

    void validate() const {
        if (is_size < 1)
            throw SimError(ErrorKind::InvalidValue, "is_size", "need at least one sensor");
        if (!(delta_thr > 0.0))
            throw SimError(ErrorKind::InvalidValue, "delta_thr", "must be > 0");
        if (dist.a < 0.0 || dist.upper_bound() > delta_thr ||
            (dist.kind == DeltaDistribution::Kind::Uniform && dist.b < dist.a))
            throw SimError(ErrorKind::InvalidValue, "dist",
                           "delta support must lie within [0, delta_thr]");
    }
};

/// Independently assigns sensor j an orthogonal channel with probability
/// delta_j / delta_thr. Requires every delta_j in [0, delta_thr).
template <class URBG>
std::vector<char> probabilistic_assignment(std::span<const double> deltas, double delta_thr,
                                           URBG& rng) {
    if (!(delta_thr > 0.0))
        throw SimError(ErrorKind::InvalidValue, "delta_thr", "must be > 0");
    std::vector<char> assigned(deltas.size(), 0);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (std::size_t j = 0; j < deltas.size(); ++j) {
        if (deltas[j] < 0.0 || deltas[j] >= delta_thr)
            throw SimError(ErrorKind::InvalidValue, "deltas",
                           "IS membership requires 0 <= delta_j < delta_thr");
        assigned[j] = u(rng) < deltas[j] / delta_thr ? 1 : 0;
    }
    return assigned;
}

struct TrialOutcome {
    bool original_exceeds = false;       // sum delta_j > delta_thr
    bool probabilistic_exceeds = false;  // realized residual > delta_thr
    double realized_residual = 0.0;      // sum over unassigned sensors
};

/// One trial on a fixed delta vector: assigned sensors drop out of the
/// residual interference; both exceedance indicators are reported.
template <class URBG>
TrialOutcome lemma1_trial(std::span<const double> deltas, double delta_thr, URBG& rng) {
    auto assigned = probabilistic_assignment(deltas, delta_thr, rng);
    double total = 0.0;
    double residual = 0.0;
    for (std::size_t j = 0; j < deltas.size(); ++j) {
        total += deltas[j];
        if (!assigned[j]) residual += deltas[j];
    }
    return {total > delta_thr, residual > delta_thr, residual};
}

struct Lemma1Result {
    double p_original = 0.0;
    double p_probabilistic = 0.0;
    double ci_original = 0.0;       // 95% half-width
    double ci_probabilistic = 0.0;  // 95% half-width
    std::int64_t trials = 0;
    bool holds = false;   // p_probabilistic <= p_original
    bool strict = false;  // separated beyond the overlap of the two CIs
};

inline double wald_halfwidth_95(double p, std::int64_t n) {
    return 1.96 * std::sqrt(std::max(0.0, p * (1.0 - p)) / static_cast<double>(n));
}

/// Estimates the outage probability of the original scheme and of the
/// probabilistic-assignment scheme over `trials` independent draws of the
/// delta vector. Throws DegenerateScenario when the distribution cannot
/// produce any positive delta (the lemma would be vacuous).
template <class URBG>
Lemma1Result verify_lemma1(const InterferenceScenario& scenario, std::int64_t trials,
                           URBG& rng) {
    scenario.validate();
    if (trials < 1)
        throw SimError(ErrorKind::InvalidValue, "trials", "need at least one trial");
    if (scenario.dist.degenerate_zero())
        throw SimError(ErrorKind::DegenerateScenario, "dist",
                       "all delta_j are 0; the outage comparison is vacuous");

    std::int64_t original = 0;
    std::int64_t probabilistic = 0;
    std::vector<double> deltas(scenario.is_size);
    for (std::int64_t t = 0; t < trials; ++t) {
        for (auto& d : deltas) d = scenario.dist.sample(rng);
        TrialOutcome out = lemma1_trial(deltas, scenario.delta_thr, rng);
        original += out.original_exceeds ? 1 : 0;
        probabilistic += out.probabilistic_exceeds ? 1 : 0;
    }

    Lemma1Result r;
    r.trials = trials;
    r.p_original = static_cast<double>(original) / static_cast<double>(trials);
    r.p_probabilistic = static_cast<double>(probabilistic) / static_cast<double>(trials);
    r.ci_original = wald_halfwidth_95(r.p_original, trials);
    r.ci_probabilistic = wald_halfwidth_95(r.p_probabilistic, trials);
    r.holds = r.p_probabilistic <= r.p_original;
    r.strict =
        r.p_probabilistic + r.ci_probabilistic < r.p_original - r.ci_original;
    return r;
}

struct McResidualEstimate {
    double mean = 0.0;
    double standard_error = 0.0;
    std::int64_t trials = 0;
};

/// Monte-Carlo mean of the realized residual on a fixed delta vector. Its
/// expectation is exactly residual_interference(deltas, delta_thr).
template <class URBG>
McResidualEstimate mc_residual_mean(std::span<const double> deltas, double delta_thr,
                                    std::int64_t trials, URBG& rng) {
    if (trials < 2)
        throw SimError(ErrorKind::InvalidValue, "trials", "need at least two trials");
    double sum = 0.0;
    double sum_sq = 0.0;
    for (std::int64_t t = 0; t < trials; ++t) {
        double r = lemma1_trial(deltas, delta_thr, rng).realized_residual;
        sum += r;
        sum_sq += r * r;
    }
    double n = static_cast<double>(trials);
    double mean = sum / n;
    double var = std::max(0.0, (sum_sq - n * mean * mean) / (n - 1.0));
    return {mean, std::sqrt(var / n), trials};
}

}  // namespace cftim
