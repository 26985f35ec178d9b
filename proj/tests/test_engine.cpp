/******************************************************************************
This source code is licensed under the MIT license found in the
LICENSE file in the root directory of this source tree.
*******************************************************************************/

#include "doctest.h"
#include "test_support.h"
#include <sstream>

using namespace chunksched;
using namespace chunksched::testing;

TEST_CASE("SCF serves smaller AG stages ahead of pending RS stages") {
    // Baseline on two dimensions: once chunk 1 returns to dim1 for its AG
    // (16 MB resident) it outranks chunks still waiting for RS (64 MB).
    const auto topology = two_to_one_topology();
    const auto schedules = baseline_schedule(CollectiveKind::AllReduce, topology, 256e6, 4);
    const auto scf = simulate(topology, schedules, {IntraDimPolicy::Scf, 1});
    std::vector<Phase> dim1;
    for (const auto& record : scf.ops) {
        if (record.op.dim_index == 1) {
            dim1.push_back(record.op.phase);
        }
    }
    CHECK(dim1[2] == Phase::AllGather);
    CHECK(scf.makespan / kUnit == doctest::Approx(8.0));
}

TEST_CASE("single chunk on one ring matches the closed form") {
    const Topology topology({{1, 4, DimKind::Ring, 100, 1, 50}});
    const double s = 8e6;
    const auto metrics = simulate(topology, baseline_schedule(CollectiveKind::AllReduce, topology, s, 1));
    const auto x = aggregate_bw(topology.dim(1));
    const auto expected = 2 * (3 * 50e-9) + 2 * (3 * s / 4) / x;
    CHECK(metrics.makespan == doctest::Approx(expected).epsilon(1e-12));
    CHECK(metrics.weighted_utilization == doctest::Approx(1.0));
    CHECK(metrics.dims[0].bytes == doctest::Approx(2 * 3 * s / 4));
}

TEST_CASE("two-to-one example: baseline trace") {
    const auto topology = two_to_one_topology();
    const auto schedules = baseline_schedule(CollectiveKind::AllReduce, topology, 256e6, 4);
    const auto metrics = simulate(topology, schedules);
    CHECK(metrics.makespan / kUnit == doctest::Approx(8.0));
    CHECK(metrics.dims[1].busy / kUnit == doctest::Approx(4.0));
    CHECK(metrics.dims[0].busy / kUnit == doctest::Approx(8.0));

    const auto reference = reference_fifo(topology, schedules, true);
    CHECK(close(metrics.makespan, reference.makespan));

    // dim1 serves RS c1..c4 then AG c1..c4.
    std::vector<std::pair<ChunkId, Phase>> dim1;
    for (const auto& record : metrics.ops) {
        if (record.op.dim_index == 1) {
            dim1.emplace_back(record.op.chunk_id, record.op.phase);
        }
    }
    const std::vector<std::pair<ChunkId, Phase>> expected = {
        {1, Phase::ReduceScatter}, {2, Phase::ReduceScatter}, {3, Phase::ReduceScatter},
        {4, Phase::ReduceScatter}, {1, Phase::AllGather},     {2, Phase::AllGather},
        {3, Phase::AllGather},     {4, Phase::AllGather}};
    CHECK(dim1 == expected);
}

TEST_CASE("two-to-one example: rebalanced schedule") {
    // dim1 carries 6.5 units and dim2 7 units, so 7 is a lower bound. With one
    // stage at a time both policies start chunk 2's long dim2 AG before
    // chunk 4 clears dim2, which leaves chunk 4's final dim1 AG at 7..8.
    const auto topology = two_to_one_topology();
    const auto schedules = explicit_schedules({{1, 2}, {2, 1}, {1, 2}, {1, 2}}, 256e6);
    const auto fifo = simulate(topology, schedules);
    CHECK(close(fifo.makespan, reference_fifo(topology, schedules, true).makespan));
    CHECK(fifo.makespan / kUnit == doctest::Approx(8.0));
    CHECK(fifo.dims[0].busy / kUnit == doctest::Approx(6.5));
    CHECK(fifo.dims[1].busy / kUnit == doctest::Approx(7.0));
    CHECK(simulate(topology, schedules, {IntraDimPolicy::Scf, 1}).makespan / kUnit == doctest::Approx(8.0));
    CHECK(simulate(topology, schedules, {IntraDimPolicy::Scf, 2}).makespan / kUnit == doctest::Approx(7.0));
}

TEST_CASE("property: engine agrees with the reference list scheduler") {
    std::mt19937 rng(21);
    std::uniform_int_distribution<int> chunk_count(1, 6);
    for (int trial = 0; trial < 300; ++trial) {
        const auto topology = random_topology(rng, 1, 3);
        const auto schedules = random_schedules(rng, topology, chunk_count(rng), 1e7);
        for (auto charging : {FixedDelayCharging::PerStage, FixedDelayCharging::PerPhase}) {
            const EnginePolicy policy{IntraDimPolicy::Fifo, 1, charging};
            const auto metrics = simulate(topology, schedules, policy);
            const auto reference =
                reference_fifo(topology, schedules, charging == FixedDelayCharging::PerPhase);
            CHECK(close(metrics.makespan, reference.makespan, 1e-9));
            for (std::size_t k = 0; k < metrics.dims.size(); ++k) {
                CHECK(close(metrics.dims[k].busy, reference.busy[k], 1e-9));
            }
        }
    }
}

TEST_CASE("property: metric invariants") {
    std::mt19937 rng(22);
    std::uniform_int_distribution<int> chunk_count(1, 8);
    std::uniform_int_distribution<int> concurrency(1, 3);
    for (int trial = 0; trial < 200; ++trial) {
        const auto topology = random_topology(rng, 1, 4);
        const auto schedules = random_schedules(rng, topology, chunk_count(rng), 1e8);
        const EnginePolicy policy{trial % 2 ? IntraDimPolicy::Scf : IntraDimPolicy::Fifo,
                                  concurrency(rng),
                                  trial % 3 ? FixedDelayCharging::PerPhase : FixedDelayCharging::PerStage};
        const auto metrics = simulate(topology, schedules, policy);
        CHECK(metrics.weighted_utilization >= 0.0);
        CHECK(metrics.weighted_utilization <= 1.0 + 1e-12);
        const auto expanded = expand_ops(topology, schedules);
        for (std::size_t k = 0; k < metrics.dims.size(); ++k) {
            const auto& dm = metrics.dims[k];
            CHECK(dm.busy + dm.idle <= metrics.makespan * (1 + 1e-12));
            CHECK(dm.busy <= metrics.makespan * (1 + 1e-12));
            double bytes = 0.0;
            for (const auto& stages : expanded) {
                for (const auto& op : stages) {
                    if (static_cast<std::size_t>(op.dim_index - 1) == k) {
                        bytes += bytes_sent_per_npu(op.phase, topology.dim(op.dim_index).size,
                                                    op.bytes_before);
                    }
                }
            }
            CHECK(close(dm.bytes, bytes));
            for (std::size_t i = 1; i < dm.timeline.size(); ++i) {
                CHECK(dm.timeline[i].start > dm.timeline[i - 1].end);
            }
        }
        CHECK(metrics.ops.size() == static_cast<std::size_t>(2 * topology.dims_count()) * schedules.size());
    }
}

TEST_CASE("property: total volume does not depend on orders or policy") {
    std::mt19937 rng(23);
    for (int trial = 0; trial < 100; ++trial) {
        const auto topology = random_topology(rng, 1, 4);
        double first_total = -1.0;
        for (int variant = 0; variant < 4; ++variant) {
            const auto schedules = random_schedules(rng, topology, 4, 1e8);
            const EnginePolicy policy{variant % 2 ? IntraDimPolicy::Scf : IntraDimPolicy::Fifo, 1 + variant / 2};
            const auto metrics = simulate(topology, schedules, policy);
            double total = 0.0;
            for (const auto& dm : metrics.dims) {
                total += dm.bytes;
            }
            if (first_total < 0.0) {
                first_total = total;
            }
            CHECK(close(total, first_total));
        }
    }
}

TEST_CASE("property: determinism") {
    std::mt19937 rng(24);
    for (int trial = 0; trial < 50; ++trial) {
        const auto topology = random_topology(rng, 1, 4);
        const auto schedules = random_schedules(rng, topology, 6, 1e8);
        const EnginePolicy policy{IntraDimPolicy::Scf, 2};
        CHECK(simulate(topology, schedules, policy) == simulate(topology, schedules, policy));
    }
}

TEST_CASE("property: FIFO and SCF agree on baseline schedules over one dimension") {
    std::mt19937 rng(25);
    std::uniform_int_distribution<int> chunk_count(1, 16);
    for (int trial = 0; trial < 100; ++trial) {
        const auto topology = random_topology(rng, 1, 1);
        const auto schedules =
            baseline_schedule(CollectiveKind::AllReduce, topology, 1e8, chunk_count(rng));
        const auto fifo = simulate(topology, schedules, {IntraDimPolicy::Fifo, 1});
        const auto scf = simulate(topology, schedules, {IntraDimPolicy::Scf, 1});
        CHECK(close(fifo.makespan, scf.makespan));
    }
}

TEST_CASE("property: makespan is at least the busiest dimension") {
    std::mt19937 rng(26);
    for (int trial = 0; trial < 100; ++trial) {
        const auto topology = random_topology(rng, 1, 4);
        const auto schedules = random_schedules(rng, topology, 5, 1e8);
        const auto metrics = simulate(topology, schedules, {IntraDimPolicy::Fifo, 1, FixedDelayCharging::PerStage});
        for (std::size_t k = 0; k < metrics.dims.size(); ++k) {
            const auto& dm = metrics.dims[k];
            double work = 0.0;
            for (const auto& record : metrics.ops) {
                if (static_cast<std::size_t>(record.op.dim_index - 1) == k) {
                    work += record.op.fixed + record.op.byte_time;
                }
            }
            CHECK(close(dm.busy, work, 1e-9));
            CHECK(metrics.makespan >= work * (1 - 1e-12));
        }
    }
}

TEST_CASE("shared bandwidth") {
    const Topology topology({{1, 4, DimKind::Ring, 80, 1, 0}});
    ScheduleList schedules;
    for (int c = 1; c <= 2; ++c) {
        schedules.push_back({c, DimOrder::ascending(1), DimOrder(), 4e6});
    }
    const auto alone = simulate(topology, {schedules[0]});
    const auto shared = simulate(topology, schedules, {IntraDimPolicy::Fifo, 2});
    CHECK(shared.makespan == doctest::Approx(2 * alone.makespan));
    CHECK(shared.ops[0].end == doctest::Approx(shared.ops[1].end));
    const auto serial = simulate(topology, schedules, {IntraDimPolicy::Fifo, 1});
    CHECK(serial.ops[0].end == doctest::Approx(alone.makespan));
}

TEST_CASE("fixed delay charging") {
    const Topology topology({{1, 4, DimKind::Ring, 80, 1, 1000}});
    const auto schedules = baseline_schedule(CollectiveKind::ReduceScatter, topology, 8e6, 4);
    const auto per_stage = simulate(topology, schedules, {IntraDimPolicy::Fifo, 1, FixedDelayCharging::PerStage});
    const auto per_phase = simulate(topology, schedules, {IntraDimPolicy::Fifo, 1, FixedDelayCharging::PerPhase});
    CHECK(per_stage.dims[0].fixed_total == doctest::Approx(4 * 3e-6));
    CHECK(per_phase.dims[0].fixed_total == doctest::Approx(3e-6));
    CHECK(per_stage.makespan - per_phase.makespan == doctest::Approx(3 * 3e-6));
    CHECK(parse_fixed_delay_charging(to_string(FixedDelayCharging::PerStage)) == FixedDelayCharging::PerStage);
    CHECK_THROWS_AS((void)parse_fixed_delay_charging("sometimes"), ParseError);
}

TEST_CASE("enforced order") {
    const auto topology = two_to_one_topology();
    const auto schedules = explicit_schedules({{1, 2}, {2, 1}, {1, 2}, {1, 2}}, 256e6);

    SUBCASE("recorded order replays to the same makespan") {
        const auto order = intra_dim_order(schedules, topology, IntraDimPolicy::Fifo);
        CHECK(simulate(topology, schedules, {}, order).makespan ==
              doctest::Approx(simulate(topology, schedules).makespan));
    }
    SUBCASE("circular wait is reported as a deadlock") {
        const auto two = explicit_schedules({{1, 2}, {2, 1}}, 64e6);
        IntraDimOrder order(2);
        order[0] = {{1, Phase::AllGather}, {1, Phase::ReduceScatter}, {2, Phase::ReduceScatter},
                    {2, Phase::AllGather}};
        order[1] = {{2, Phase::ReduceScatter}, {1, Phase::ReduceScatter}, {1, Phase::AllGather},
                    {2, Phase::AllGather}};
        try {
            (void)simulate(topology, two, {}, order);
            FAIL("expected SimulationError");
        } catch (const SimulationError& e) {
            CHECK(std::string(e.what()).find("deadlock") != std::string::npos);
        }
    }
    SUBCASE("order that does not cover the stages") {
        IntraDimOrder order(2);
        order[0] = {{1, Phase::ReduceScatter}};
        order[1] = {{1, Phase::ReduceScatter}};
        CHECK_THROWS_AS((void)simulate(topology, schedules, {}, order), SimulationError);
        CHECK_THROWS_AS((void)simulate(topology, schedules, {}, IntraDimOrder(1)), SimulationError);
    }
}

TEST_CASE("schedule validation") {
    const auto topology = two_to_one_topology();
    auto schedules = baseline_schedule(CollectiveKind::AllReduce, topology, 1e6, 2);
    auto duplicate = schedules;
    duplicate[1].chunk_id = 1;
    CHECK_THROWS((void)simulate(topology, duplicate));
    auto empty = schedules;
    empty[0].initial_bytes = 0.0;
    CHECK_THROWS((void)simulate(topology, empty));
    auto short_order = schedules;
    short_order[0].rs_order = DimOrder::ascending(1);
    CHECK_THROWS((void)simulate(topology, short_order));
    CHECK_THROWS_AS(DimOrder({1, 1}), ValidationError);
    CHECK_THROWS_AS(DimOrder({2, 3}), ValidationError);
    CHECK_THROWS((void)simulate(topology, schedules, {IntraDimPolicy::Fifo, 0}));
}

TEST_CASE("activity rate") {
    const Topology topology({{1, 4, DimKind::Ring, 80, 1, 0}});
    const auto metrics = simulate(topology, baseline_schedule(CollectiveKind::AllReduce, topology, 8e6, 4));
    const auto whole = activity_rate(metrics, metrics.makespan * 2);
    REQUIRE(whole.size() == 1);
    REQUIRE(whole[0].size() == 1);
    CHECK(whole[0][0] == doctest::Approx(metrics.dims[0].busy / metrics.makespan));
    const auto windows = activity_rate(metrics, metrics.makespan / 7);
    CHECK(windows[0].size() == 7);
    for (double rate : windows[0]) {
        CHECK(rate == doctest::Approx(1.0));
    }
    CHECK_THROWS((void)activity_rate(metrics, 0.0));

    RunMetrics empty;
    CHECK_THROWS_AS((void)weighted_utilization(empty, topology), ValidationError);
}

TEST_CASE("metrics csv") {
    const auto topology = two_to_one_topology();
    const auto metrics = simulate(topology, baseline_schedule(CollectiveKind::AllReduce, topology, 256e6, 4));
    std::ostringstream out;
    write_metrics_csv(out, metrics, topology);
    const auto text = out.str();
    CHECK(text.rfind("row,dim,busy_s", 0) == 0);
    CHECK(std::count(text.begin(), text.end(), '\n') == 4);
}
