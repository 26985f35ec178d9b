/******************************************************************************
This source code is licensed under the MIT license found in the
LICENSE file in the root directory of this source tree.
*******************************************************************************/

#include "doctest.h"
#include "test_support.h"
#include <sstream>

using namespace chunksched;
using namespace chunksched::testing;

namespace {

std::vector<std::vector<DimIndex>> rs_orders(const ScheduleList& schedules) {
    std::vector<std::vector<DimIndex>> orders;
    for (const auto& s : schedules) {
        orders.emplace_back(s.rs_order.dims().begin(), s.rs_order.dims().end());
    }
    return orders;
}

}  // namespace

TEST_CASE("baseline orders") {
    const auto topology = preset_topology("3D-FC_Ring_SW");
    const auto ar = baseline_schedule(CollectiveKind::AllReduce, topology, 1e9, 4);
    REQUIRE(ar.size() == 4);
    for (const auto& s : ar) {
        CHECK(s.rs_order.encode() == "1-2-3");
        CHECK(s.ag_order.encode() == "3-2-1");
        CHECK(s.initial_bytes == doctest::Approx(2.5e8));
    }
    const auto rs = baseline_schedule(CollectiveKind::ReduceScatter, topology, 1e9, 2);
    CHECK(rs[0].ag_order.empty());
    const auto ag = baseline_schedule(CollectiveKind::AllGather, topology, 1e9, 2);
    CHECK(ag[0].rs_order.empty());
    CHECK(ag[0].initial_bytes == doctest::Approx(5e8 / 1024));
    CHECK_THROWS((void)baseline_schedule(CollectiveKind::AllReduce, topology, 1e9, 0));
    CHECK_THROWS((void)baseline_schedule(CollectiveKind::AllReduce, topology, 0.0, 4));
}

TEST_CASE("two-to-one example: greedy schedule") {
    const auto topology = two_to_one_topology();
    SchedulerConfig config;
    config.chunks_per_collective = 4;
    GreedyScheduler scheduler(topology, config);
    const auto schedules = scheduler.schedule(CollectiveKind::AllReduce, 256e6);
    const std::vector<std::vector<DimIndex>> expected = {{1, 2}, {2, 1}, {1, 2}, {1, 2}};
    CHECK(rs_orders(schedules) == expected);
    for (const auto& s : schedules) {
        CHECK(s.ag_order == s.rs_order.reversed());
    }

    // Loads after the first chunk and the threshold it is compared against.
    DimLoadTracker tracker;
    tracker.reset(CollectiveKind::AllReduce, topology);
    tracker.add(1, chunk_load(topology.dim(1), Phase::ReduceScatter, 64e6));
    tracker.add(2, chunk_load(topology.dim(2), Phase::ReduceScatter, 16e6));
    tracker.add(2, chunk_load(topology.dim(2), Phase::AllGather, 4e6));
    tracker.add(1, chunk_load(topology.dim(1), Phase::AllGather, 16e6));
    CHECK(tracker.load(1) / kUnit == doctest::Approx(2.0));
    CHECK(tracker.load(2) / kUnit == doctest::Approx(1.0));
    CHECK(tracker.min_dim() == 2);
    CHECK(threshold(config, tracker, 64e6, topology) / kUnit == doctest::Approx(0.125));

    // Same makespan as the baseline under one-at-a-time service; see the
    // engine trace of this schedule.
    CHECK(simulate(topology, schedules).makespan / kUnit == doctest::Approx(8.0));
}

TEST_CASE("balanced topology keeps baseline orders") {
    const Topology topology({{1, 4, DimKind::Ring, 400, 1, 0}, {2, 4, DimKind::Ring, 100, 1, 0}});
    const auto schedules = greedy_schedule(CollectiveKind::AllReduce, 1e9, {}, topology);
    for (const auto& s : schedules) {
        CHECK(s.rs_order.encode() == "1-2");
    }
}

TEST_CASE("tracker") {
    const Topology topology({{1, 4, DimKind::Ring, 100, 1, 10}, {2, 8, DimKind::Switch, 100, 1, 100}});
    DimLoadTracker tracker;
    tracker.reset(CollectiveKind::AllReduce, topology);
    CHECK(tracker.load(1) == doctest::Approx(60e-9));
    CHECK(tracker.load(2) == doctest::Approx(600e-9));
    tracker.reset(CollectiveKind::ReduceScatter, topology);
    CHECK(tracker.load(2) == doctest::Approx(300e-9));
    CHECK(tracker.min_dim() == 1);
    CHECK(tracker.spread() == doctest::Approx(270e-9));
    tracker.add(1, 270e-9);
    CHECK(tracker.min_dim() == 1);
    CHECK_THROWS((void)tracker.add(1, -1.0));
    CHECK_THROWS((void)tracker.add(3, 1.0));
}

TEST_CASE("property: AG order is the reverse of the RS order") {
    std::mt19937 rng(31);
    std::uniform_int_distribution<int> cpc(1, 64);
    for (int trial = 0; trial < 200; ++trial) {
        const auto topology = random_topology(rng, 1, 4);
        SchedulerConfig config;
        config.chunks_per_collective = cpc(rng);
        for (const auto& s : greedy_schedule(CollectiveKind::AllReduce, 1e8, config, topology)) {
            CHECK(s.ag_order == s.rs_order.reversed());
            CHECK(s.rs_order.size() == topology.dims_count());
        }
    }
}

TEST_CASE("property: greedy gap bound with a vanishing threshold") {
    // Holds for one phase over equal-bandwidth dimensions. A dimension much
    // slower than the rest can outgrow the others by more than any single
    // increment, since every chunk must cross it.
    std::mt19937 rng(32);
    std::uniform_int_distribution<int> dims_count(2, 4);
    std::uniform_int_distribution<int> log_size(1, 4);
    std::uniform_int_distribution<int> kind(0, 2);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<NetworkDim> dims;
        for (int k = 1, d = dims_count(rng); k <= d; ++k) {
            dims.push_back({k, 1 << log_size(rng), static_cast<DimKind>(kind(rng)), 100.0, 2, 0.0});
        }
        const Topology topology(dims);
        SchedulerConfig config;
        config.chunks_per_collective = 256;
        config.threshold_divisor = 1e300;
        GreedyScheduler scheduler(topology, config);
        for (auto collective : {CollectiveKind::ReduceScatter, CollectiveKind::AllGather}) {
            (void)scheduler.schedule(collective, 1e9);
            CHECK(scheduler.tracker().spread() <= scheduler.largest_increment() * (1 + 1e-9));
        }
    }
}

TEST_CASE("property: tracker loads match the emitted orders") {
    std::mt19937 rng(33);
    for (int trial = 0; trial < 100; ++trial) {
        const auto topology = random_topology(rng, 1, 4);
        SchedulerConfig config;
        config.chunks_per_collective = 16;
        GreedyScheduler scheduler(topology, config);
        const auto schedules = scheduler.schedule(CollectiveKind::AllReduce, 1e8);
        DimLoadTracker replay;
        replay.reset(CollectiveKind::AllReduce, topology);
        for (const auto& stages : expand_ops(topology, schedules)) {
            for (const auto& op : stages) {
                replay.add(op.dim_index, op.byte_time);
            }
        }
        for (int k = 1; k <= topology.dims_count(); ++k) {
            CHECK(close(replay.load(k), scheduler.tracker().load(k)));
        }
    }
}

TEST_CASE("property: scheduling is deterministic") {
    std::mt19937 rng(34);
    for (int trial = 0; trial < 50; ++trial) {
        const auto topology = random_topology(rng, 1, 4);
        SchedulerConfig config;
        config.chunks_per_collective = 32;
        CHECK(greedy_schedule(CollectiveKind::AllReduce, 5e8, config, topology) ==
              greedy_schedule(CollectiveKind::AllReduce, 5e8, config, topology));
    }
}

TEST_CASE("config validation") {
    const auto topology = two_to_one_topology();
    CHECK_THROWS_AS(GreedyScheduler(topology, {0, 16}), ValidationError);
    CHECK_THROWS_AS(GreedyScheduler(topology, {4, 0}), ValidationError);
    CHECK_THROWS((void)greedy_schedule(CollectiveKind::AllReduce, -1.0, {}, topology));
}

TEST_CASE("intra-dimension order of baseline schedules") {
    const auto topology = preset_topology("3D-SW_SW_SW_homo");
    const int chunks = 5;
    const auto order = intra_dim_order(baseline_schedule(CollectiveKind::AllReduce, topology, 1e8, chunks),
                                       topology, IntraDimPolicy::Fifo);
    REQUIRE(order.size() == 3);
    std::vector<OpKey> expected;
    for (auto phase : {Phase::ReduceScatter, Phase::AllGather}) {
        for (int c = 1; c <= chunks; ++c) {
            expected.push_back({c, phase});
        }
    }
    CHECK(order[0] == expected);

    std::ostringstream out;
    write_intra_dim_order_csv(out, order);
    CHECK(out.str().rfind("dim,position,chunk_id,phase\n", 0) == 0);
}

TEST_CASE("schedule cache") {
    const auto topology = preset_topology("2D-SW_SW");
    ScheduleCache cache;
    SchedulerConfig config;
    const auto& first = cache.get(SchedulingMode::GreedyScf, CollectiveKind::AllReduce, 1e8, config, topology);
    const auto& again = cache.get(SchedulingMode::GreedyScf, CollectiveKind::AllReduce, 1e8, config, topology);
    CHECK(&first == &again);
    CHECK(cache.size() == 1);
    CHECK(cache.hits() == 1);
    CHECK(first.schedules == greedy_schedule(CollectiveKind::AllReduce, 1e8, config, topology));
    (void)cache.get(SchedulingMode::Baseline, CollectiveKind::AllReduce, 1e8, config, topology);
    config.chunks_per_collective = 8;
    (void)cache.get(SchedulingMode::GreedyScf, CollectiveKind::AllReduce, 1e8, config, topology);
    CHECK(cache.size() == 3);
    CHECK_THROWS((void)cache.get(SchedulingMode::Ideal, CollectiveKind::AllReduce, 1e8, config, topology));
}

TEST_CASE("mode names") {
    for (auto mode : {SchedulingMode::Baseline, SchedulingMode::GreedyFifo, SchedulingMode::GreedyScf,
                      SchedulingMode::Ideal}) {
        CHECK(parse_scheduling_mode(to_string(mode)) == mode);
    }
    CHECK(policy_for(SchedulingMode::GreedyScf) == IntraDimPolicy::Scf);
    CHECK(policy_for(SchedulingMode::Baseline) == IntraDimPolicy::Fifo);
    CHECK_THROWS((void)parse_scheduling_mode("fastest"));
}

TEST_CASE("schedule csv") {
    const auto topology = two_to_one_topology();
    std::ostringstream out;
    write_schedule_csv(out, baseline_schedule(CollectiveKind::AllReduce, topology, 4.0, 2));
    CHECK(out.str() == "chunk_id,rs_order,ag_order,bytes\n1,1-2,2-1,2\n2,1-2,2-1,2\n");
}
