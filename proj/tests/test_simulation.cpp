#include <catch2/catch_amalgamated.hpp>

#include <map>
#include <set>
#include <vector>

#include "cftim/simulation.hpp"

using namespace cftim;

namespace {

ScenarioConfig short_scenario(Scheme scheme, std::uint64_t seed, double duration_s) {
    ScenarioConfig cfg;
    cfg.scheme = scheme;
    cfg.rng_seed = seed;
    cfg.sim_duration_s = duration_s;
    return cfg;
}

bool same_metrics(const std::vector<MetricsFrame>& a, const std::vector<MetricsFrame>& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const auto& x = a[i];
        const auto& y = b[i];
        if (x.frame != y.frame || x.time_s != y.time_s || x.avg_sinr_db != y.avg_sinr_db ||
            x.running_mean_sinr_db != y.running_mean_sinr_db ||
            x.eq6_residual != y.eq6_residual || x.cum_energy_j != y.cum_energy_j ||
            x.delivered != y.delivered || x.collisions != y.collisions ||
            x.outage != y.outage)
            return false;
    }
    return true;
}

}  // namespace

TEST_CASE("identical config and seed reproduce the run exactly", "[simulation]") {
    for (Scheme scheme : {Scheme::Cftim, Scheme::Or, Scheme::Tdma}) {
        RunOptions opts;
        opts.capture_trace = true;
        auto cfg = short_scenario(scheme, 99, 3.0);
        RunResult a = run_scenario(cfg, opts);
        RunResult b = run_scenario(cfg, opts);
        CHECK(same_metrics(a.frames, b.frames));
        REQUIRE(a.trace.size() == b.trace.size());
        for (std::size_t i = 0; i < a.trace.size(); ++i) {
            CHECK(a.trace[i].time_s == b.trace[i].time_s);
            CHECK(a.trace[i].sequence == b.trace[i].sequence);
            CHECK(a.trace[i].kind == b.trace[i].kind);
            CHECK(a.trace[i].node == b.trace[i].node);
        }
    }
}

TEST_CASE("different seeds shuffle the transmission pattern", "[simulation]") {
    RunOptions opts;
    opts.capture_trace = true;
    RunResult a = run_scenario(short_scenario(Scheme::Cftim, 1, 3.0), opts);
    RunResult b = run_scenario(short_scenario(Scheme::Cftim, 2, 3.0), opts);

    auto tx_nodes = [](const Trace& t) {
        std::vector<std::int32_t> out;
        for (const auto& ev : t)
            if (ev.kind == EventKind::TxAttempt) out.push_back(ev.node.value);
        return out;
    };
    CHECK(tx_nodes(a.trace) != tx_nodes(b.trace));
}

TEST_CASE("running until t=0 produces nothing", "[simulation]") {
    RunOptions opts;
    opts.capture_trace = true;
    Simulation sim(short_scenario(Scheme::Cftim, 5, 10.0), opts);
    RunResult r = sim.run_until(0.0);
    CHECK(r.trace.empty());
    CHECK(r.frames.empty());
    CHECK(r.summary.delivered_total == 0);
}

TEST_CASE("cftim frames hold every slot and schedule invariant", "[simulation]") {
    std::vector<FrameObservation> observations;
    RunOptions opts;
    opts.observer = [&](const FrameObservation& obs) { observations.push_back(obs); };
    opts.capture_deliveries = true;

    auto cfg = short_scenario(Scheme::Cftim, 1234, 30.0);
    RunResult r = run_scenario(cfg, opts);
    REQUIRE(observations.size() > 100);

    std::int64_t successful_claims = 0;
    double last_end = 0.0;
    for (std::size_t i = 0; i < observations.size(); ++i) {
        const auto& obs = observations[i];

        // Clock moves strictly forward, one row per frame.
        CHECK(obs.end_s > last_end);
        last_end = obs.end_s;

        // p > m: at least one free slot announced on every frame.
        CHECK(obs.beacon.free_slot_count >= 1);

        // Dedicated slots are injective and never collide.
        const int m = obs.beacon.m();
        std::set<int> seen_slots;
        for (const auto& [id, slot] : obs.beacon.node_slot_list) {
            CHECK(slot >= 0);
            CHECK(slot < obs.beacon.p());
            CHECK(seen_slots.insert(slot).second);
        }
        std::map<int, int> claims_per_slot;
        for (const auto& c : obs.claims) {
            ++claims_per_slot[c.slot];
            if (c.assigned) {
                CHECK_FALSE(c.collided);
                CHECK(obs.beacon.node_slot_list.at(c.node) == c.slot);
            } else {
                CHECK(c.slot >= m);  // free slots sit after the dedicated block
                CHECK(c.slot < obs.beacon.p());
            }
            if (c.collided) CHECK_FALSE(c.success);
        }
        for (const auto& c : obs.claims) {
            if (c.assigned) CHECK(claims_per_slot[c.slot] == 1);
            if (claims_per_slot[c.slot] > 1) CHECK(c.collided);
        }

        // TS and IS partition the contenders.
        for (NodeId id : obs.ts) CHECK(obs.is.count(id) == 0);
        CHECK(obs.ts.size() + obs.is.size() == static_cast<std::size_t>(cfg.n_sources));

        // Deliveries cannot exceed one packet per source per frame.
        CHECK(obs.delivered <= cfg.n_sources);

        // Successful free-slot claimants enter the next frame's slot list.
        for (const auto& c : obs.claims)
            if (!c.assigned && c.success) {
                ++successful_claims;
                CHECK(obs.next_beacon.has_slot(c.node));
            }
    }
    CHECK(successful_claims > 0);

    // Two-hop bookkeeping: relayed packets originate from that frame's TS,
    // direct packets from its IS.
    REQUIRE(!r.delivered_log.empty());
    for (const auto& pkt : r.delivered_log) {
        REQUIRE(pkt.delivered_at_s.has_value());
        CHECK(*pkt.delivered_at_s >= pkt.created_at_s);
        if (pkt.created_at_s >= observations.back().end_s) continue;  // partial last frame
        const FrameObservation* frame = nullptr;
        for (const auto& obs : observations)
            if (pkt.created_at_s >= obs.start_s && pkt.created_at_s < obs.end_s) {
                frame = &obs;
                break;
            }
        REQUIRE(frame != nullptr);
        if (pkt.hops == 2)
            CHECK(frame->ts.count(pkt.origin) == 1);
        else
            CHECK(frame->is.count(pkt.origin) == 1);
    }
}

TEST_CASE("per-node energy books balance", "[simulation]") {
    for (Scheme scheme : {Scheme::Cftim, Scheme::Or, Scheme::Tdma}) {
        auto cfg = short_scenario(scheme, 77, 10.0);
        Simulation sim(cfg);
        RunResult r = sim.run();
        const auto& ledger = sim.ledger();
        for (int i = 0; i < cfg.n_nodes(); ++i) {
            NodeId id{i};
            CHECK(ledger.consumed_j(id) ==
                  Catch::Approx(ledger.initial_j(id) - ledger.remaining_j(id)).epsilon(1e-9));
        }
        double prev = 0.0;
        for (const auto& f : r.frames) {
            CHECK(f.cum_energy_j >= prev);
            prev = f.cum_energy_j;
        }
    }
}

TEST_CASE("or baseline: a lone source delivers two-hop every frame", "[simulation]") {
    ScenarioConfig cfg = short_scenario(Scheme::Or, 7, 5.0);
    cfg.n_sources = 1;
    cfg.n_relays = 1;
    cfg.area_side_m = 0.5;                  // short links decode in any state
    cfg.state_penalty_db = {0.0, 0.0, 0.0};
    RunOptions opts;
    opts.capture_deliveries = true;
    RunResult r = run_scenario(cfg, opts);
    for (const auto& f : r.frames) CHECK(f.delivered == 1);
    for (const auto& pkt : r.delivered_log) CHECK(pkt.hops == 2);

    // Exactly two transmissions' worth of tx energy per delivery.
    Simulation sim(cfg);
    sim.run();
    double tx_total = sim.ledger().activity_j(NodeId{0}, Activity::Tx) +
                      sim.ledger().activity_j(NodeId{1}, Activity::Tx);
    double expected = 2.0 * cfg.packet_duration_s() * cfg.energy.tx_mw * 1e-3 *
                      static_cast<double>(r.summary.delivered_total);
    CHECK(tx_total == Catch::Approx(expected).epsilon(1e-9));
}

TEST_CASE("or baseline: contention defers some of twelve sources", "[simulation]") {
    std::vector<FrameObservation> observations;
    RunOptions opts;
    opts.observer = [&](const FrameObservation& obs) { observations.push_back(obs); };
    run_scenario(short_scenario(Scheme::Or, 3, 10.0), opts);

    std::int64_t frames_with_is = 0;
    for (const auto& obs : observations) {
        CHECK(obs.claims.empty());  // no TDMA part in OR
        if (!obs.is.empty()) ++frames_with_is;
    }
    CHECK(frames_with_is > 0);
}

TEST_CASE("tdma baseline: fixed schedule, no collisions", "[simulation]") {
    std::vector<FrameObservation> observations;
    RunOptions opts;
    opts.observer = [&](const FrameObservation& obs) { observations.push_back(obs); };

    ScenarioConfig cfg = short_scenario(Scheme::Tdma, 11, 10.0);
    RunResult r = run_scenario(cfg, opts);

    for (const auto& f : r.frames) CHECK(f.collisions == 0);
    for (const auto& obs : observations) {
        CHECK(obs.claims.size() == static_cast<std::size_t>(cfg.n_sources));
        CHECK(obs.delivered <= cfg.n_sources);
        std::set<int> slots;
        for (const auto& c : obs.claims) {
            CHECK_FALSE(c.collided);
            CHECK(slots.insert(c.slot).second);
        }
    }

    // With penalties disabled every frame decodes all N packets.
    cfg.state_penalty_db = {0.0, 0.0, 0.0};
    RunResult clean = run_scenario(cfg);
    for (const auto& f : clean.frames) CHECK(f.delivered == cfg.n_sources);
}

TEST_CASE("an exhausted node stops transmitting and the run continues", "[simulation]") {
    ScenarioConfig cfg = short_scenario(Scheme::Cftim, 21, 10.0);
    cfg.initial_energy_j = 0.02;  // dies within a couple of seconds
    RunResult r = run_scenario(cfg);
    CHECK(r.summary.exhausted_nodes > 0);
    CHECK(r.summary.sim_time_s > 5.0);  // the simulation itself kept going
}
