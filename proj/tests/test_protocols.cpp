#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "cftim/protocols.hpp"

using namespace cftim;

namespace {

std::vector<Node> relay_row(std::initializer_list<double> xs) {
    std::vector<Node> relays;
    int id = 100;
    for (double x : xs) relays.push_back({NodeId{id++}, Role::Relay, x, 0.0, 0.0, 1.0});
    return relays;
}

}  // namespace

TEST_CASE("select_best_relay maximises received power", "[protocols]") {
    auto one = relay_row({0.5});
    auto power_by_distance = [&](NodeId, NodeId rx) {
        return 1.0 / (1.0 + rx.value);  // arbitrary positive values
    };
    CHECK(select_best_relay(NodeId{0}, one, power_by_distance) == NodeId{100});

    // Nearer relay wins under any monotone pathloss.
    std::vector<Node> two = relay_row({0.2, 1.0});
    Node src{NodeId{0}, Role::Source, 0.0, 0.0, 0.0, 1.0};
    auto monotone = [&](NodeId, NodeId rx) {
        const Node& r = two[rx.value - 100];
        double d = distance_m(src, r);
        return 1.0 / (d * d);
    };
    CHECK(select_best_relay(src.id, two, monotone) == NodeId{100});

    // Ties break toward the lowest id.
    auto flat = [](NodeId, NodeId) { return 3.5; };
    CHECK(select_best_relay(NodeId{0}, two, flat) == NodeId{100});
}

TEST_CASE("four random relays match the exhaustive argmax", "[protocols]") {
    std::mt19937_64 rng(47);
    std::uniform_real_distribution<double> pos(0.0, 2.0);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<Node> relays;
        for (int i = 0; i < 4; ++i)
            relays.push_back({NodeId{100 + i}, Role::Relay, pos(rng), pos(rng), 0.0, 1.0});
        Node src{NodeId{0}, Role::Source, pos(rng), pos(rng), 0.0, 1.0};
        auto power = [&](NodeId, NodeId rx) {
            double d = std::max(distance_m(src, relays[rx.value - 100]), 0.1);
            return std::pow(d, -4.22);
        };
        NodeId expected{-1};
        double best = -1.0;
        for (const auto& r : relays) {
            double p = power(src.id, r.id);
            if (p > best) {
                best = p;
                expected = r.id;
            }
        }
        CHECK(select_best_relay(src.id, relays, power) == expected);
    }
}

TEST_CASE("predict_p applies the clamped slack formula", "[protocols]") {
    std::vector<int> quiet{0, 0, 0, 0};
    std::vector<int> unused{2, 2, 2, 2};
    CHECK(predict_p(quiet, unused, 5, 1, 16) == 6);

    std::vector<int> busy{2, 2, 2, 2};  // mean 2 collisions per frame
    CHECK(predict_p(busy, unused, 5, 1, 16) == 8);

    std::vector<int> storm{40, 40, 40, 40};
    CHECK(predict_p(storm, unused, 5, 1, 16) == 5 + 16);  // clamped at p_max_slack

    std::mt19937_64 rng(53);
    std::uniform_int_distribution<int> c(0, 30);
    std::uniform_int_distribution<int> m(0, 20);
    for (int i = 0; i < 200; ++i) {
        std::vector<int> hist{c(rng), c(rng), c(rng), c(rng)};
        int mm = m(rng);
        int p = predict_p(hist, unused, mm, 2, 16);
        CHECK(p > mm);  // always at least one free slot
        CHECK(p <= mm + 16);
    }
}

TEST_CASE("ftdma_node_step picks assigned slots first", "[protocols]") {
    Beacon beacon;
    beacon.frame_index = 3;
    beacon.node_slot_list = {{NodeId{4}, 0}, {NodeId{9}, 1}, {NodeId{11}, 2}};
    beacon.free_slot_count = 3;  // slots 3, 4, 5 are free

    std::mt19937_64 rng(59);
    LotteryState lot;

    auto assigned = ftdma_node_step(NodeId{9}, lot, beacon, rng);
    CHECK(assigned.action == SlotDecision::Action::TransmitAssigned);
    CHECK(assigned.slot == 1);

    for (int i = 0; i < 100; ++i) {
        auto claim = ftdma_node_step(NodeId{5}, lot, beacon, rng);
        CHECK(claim.action == SlotDecision::Action::ClaimFreeSlot);
        CHECK(claim.slot >= 3);
        CHECK(claim.slot < 6);
    }

    lot.wait_this_frame = true;
    auto wait = ftdma_node_step(NodeId{5}, lot, beacon, rng);
    CHECK(wait.action == SlotDecision::Action::WaitFrame);
    // The wait is consumed: the next frame claims again.
    CHECK(ftdma_node_step(NodeId{5}, lot, beacon, rng).action ==
          SlotDecision::Action::ClaimFreeSlot);
}

TEST_CASE("retry counter resets on success and on exhaustion", "[protocols]") {
    LotteryState lot;
    const int max_retries = 3;
    for (int round = 0; round < 4; ++round) {
        for (int i = 0; i < max_retries - 1; ++i) {
            lot.on_collision(max_retries);
            CHECK(lot.retry_counter <= max_retries);
            CHECK_FALSE(lot.wait_this_frame);
        }
        lot.on_collision(max_retries);  // exhausts
        CHECK(lot.retry_counter == 0);
        CHECK(lot.wait_this_frame);
        lot.wait_this_frame = false;
    }
    lot.on_collision(max_retries);
    lot.on_success();
    CHECK(lot.retry_counter == 0);
    CHECK_FALSE(lot.wait_this_frame);
}

TEST_CASE("coordinator forms the next beacon from acknowledgements", "[protocols]") {
    CoordinatorState coord(4, 3, 2, 16);

    // Three successes with a quiet history: p = 3 + 2 free slots.
    Beacon b1 = coord.close_frame(0, {NodeId{3}, NodeId{7}, NodeId{9}}, 0, 0);
    CHECK(b1.m() == 3);
    CHECK(b1.free_slot_count == 2);
    CHECK(b1.has_slot(NodeId{3}));
    CHECK(b1.has_slot(NodeId{7}));
    CHECK(b1.has_slot(NodeId{9}));

    // A node acknowledged last frame keeps a dedicated slot this frame too.
    Beacon b2 = coord.close_frame(1, {NodeId{3}}, 0, 2);
    CHECK(b2.has_slot(NodeId{3}));
    CHECK(b2.has_slot(NodeId{7}));  // still inside the active window

    Beacon b3 = coord.close_frame(2, {}, 0, 4);
    Beacon b4 = coord.close_frame(3, {}, 0, 4);
    CHECK(b4.has_slot(NodeId{3}));   // heard at frame 1, window {1,2,3}
    CHECK_FALSE(b4.has_slot(NodeId{7}));  // last heard at frame 0

    // No successes at all: every slot is free, and p >= 1.
    CoordinatorState empty(4, 3, 2, 16);
    Beacon b = empty.close_frame(0, {}, 0, 0);
    CHECK(b.m() == 0);
    CHECK(b.p() >= 1);
    CHECK(b.free_slot_count == b.p());

    // Collisions widen the free part; calm frames shrink it back.
    CoordinatorState stormy(2, 3, 2, 16);
    Beacon w1 = stormy.close_frame(0, {}, 8, 0);
    CHECK(w1.free_slot_count == 2 + 4);  // ceil(mean{0-padded,8}/2) = 4
    stormy.close_frame(1, {}, 0, 0);
    Beacon w3 = stormy.close_frame(2, {}, 0, 0);
    CHECK(w3.free_slot_count == 2);

    // Slot lists stay injective and inside [0, p).
    Superframe sf{0, 1e-3, 4e-3, 1e-3, b2.node_slot_list, b2.free_slot_count};
    CHECK_NOTHROW(sf.validate());
}
