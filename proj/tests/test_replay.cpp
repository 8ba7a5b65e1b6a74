#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "idem/replay.hpp"

using namespace idem;

TEST_SUITE_BEGIN("replay");

namespace {

Transition tr(int tag) { return Transition{tag, tag % 4, static_cast<double>(tag), 0, false}; }

} // namespace

TEST_CASE("weight formula") {
    CHECK(weight_of(0.0, 1.0) == 1.0);
    CHECK(weight_of(std::log(2.0), 1.0) == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(weight_of(-2.0, 0.5) == doctest::Approx(std::exp(1.0)).epsilon(1e-12));
    // saturation at the exponent cap
    CHECK(weight_of(1e6, 1.0, 50.0) == doctest::Approx(std::exp(50.0)).epsilon(1e-12));
    CHECK(weight_of(1e6, 1.0, 50.0) == weight_of(1e9, 1.0, 50.0));
    CHECK(weight_of(0.5, 2.0) >= 1.0);
    CHECK_THROWS_AS(weight_of(std::nan(""), 1.0), NonFiniteTDError);
}

TEST_CASE("push fills slots in order and evicts FIFO") {
    ReplayBuffer buffer(3000);
    CHECK(buffer.push(tr(0), 0.0) == 0);
    CHECK(buffer.size() == 1);
    CHECK(buffer.at(0).weight == 1.0);

    for (int i = 1; i <= 3000; ++i)
        buffer.push(tr(i), 0.0);
    CHECK(buffer.size() == 3000);
    // push 3000 wrapped onto slot 0, so the first transition is gone
    CHECK(buffer.at(0).state == 3000);
    CHECK(buffer.at(1).state == 1);

    CHECK_THROWS_AS(buffer.push(tr(1), std::nan("")), NonFiniteTDError);
}

TEST_CASE("occupants after k pushes are exactly the trailing window") {
    ReplayBuffer buffer(7);
    const int k = 23;
    for (int i = 0; i < k; ++i)
        buffer.push(tr(i), 0.0);
    std::vector<int> have;
    for (int s = 0; s < buffer.size(); ++s)
        have.push_back(buffer.at(s).state);
    std::sort(have.begin(), have.end());
    std::vector<int> want;
    for (int i = k - 7; i < k; ++i)
        want.push_back(i);
    CHECK(have == want);
}

TEST_CASE("probabilities normalize the weights") {
    ReplayBuffer buffer(10, ReplayMode::Weighted, 1.0);
    SUBCASE("equal weights") {
        for (int i = 0; i < 4; ++i)
            buffer.push(tr(i), 0.0);
        CHECK(buffer.probabilities() == std::vector<double>{0.25, 0.25, 0.25, 0.25});
    }
    SUBCASE("one-to-three ratio") {
        buffer.push(tr(0), 0.0);          // weight 1
        buffer.push(tr(1), std::log(3.0)); // weight 3
        auto p = buffer.probabilities();
        CHECK(p[0] == doctest::Approx(0.25).epsilon(1e-12));
        CHECK(p[1] == doctest::Approx(0.75).epsilon(1e-12));
    }
    SUBCASE("empty buffer refuses") {
        CHECK_THROWS_AS(buffer.probabilities(), EmptyBuffer);
    }
}

TEST_CASE("uniform mode ignores the weights") {
    ReplayBuffer buffer(10, ReplayMode::Uniform, 1.0);
    buffer.push(tr(0), 0.0);
    buffer.push(tr(1), 5.0);
    buffer.push(tr(2), 20.0);
    auto p = buffer.probabilities();
    for (double x : p)
        CHECK(x == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("probabilities always sum to one and stay positive") {
    std::mt19937_64 rng(8);
    ReplayBuffer buffer(200, ReplayMode::Weighted, 0.8);
    std::uniform_real_distribution<double> delta(-8.0, 8.0);
    for (int i = 0; i < 500; ++i) {
        buffer.push(tr(i), delta(rng));
        auto p = buffer.probabilities();
        double total = std::accumulate(p.begin(), p.end(), 0.0);
        CHECK(std::abs(total - 1.0) <= 1e-12);
        CHECK(*std::min_element(p.begin(), p.end()) > 0.0);
    }
}

TEST_CASE("sampling from a single occupant") {
    ReplayBuffer buffer(10);
    buffer.push(tr(7), 1.0);
    std::mt19937_64 rng(1);
    SampleBatch batch = buffer.sample(5, rng);
    CHECK(batch.indices == std::vector<int>{0, 0, 0, 0, 0});
    CHECK(batch.transitions[0].state == 7);
}

TEST_CASE("weighted sampling hits binomial frequencies") {
    ReplayBuffer buffer(10, ReplayMode::Weighted, 1.0);
    buffer.push(tr(0), 0.0);           // weight 1
    buffer.push(tr(1), std::log(3.0)); // weight 3
    std::mt19937_64 rng(2);
    const int n = 100000;
    SampleBatch batch = buffer.sample(n, rng);
    int ones = static_cast<int>(std::count(batch.indices.begin(), batch.indices.end(), 1));
    double sigma = std::sqrt(0.75 * 0.25 / n);
    CHECK(std::abs(static_cast<double>(ones) / n - 0.75) <= 3 * sigma);
}

TEST_CASE("uniform sampling stays uniform under wild weights") {
    ReplayBuffer buffer(16, ReplayMode::Uniform, 1.0);
    for (int i = 0; i < 16; ++i)
        buffer.push(tr(i), static_cast<double>(i * i));
    std::mt19937_64 rng(3);
    const int n = 100000;
    SampleBatch batch = buffer.sample(n, rng);
    std::vector<int> counts(16, 0);
    for (int s : batch.indices)
        ++counts[static_cast<std::size_t>(s)];
    double p = 1.0 / 16.0;
    double sigma = std::sqrt(p * (1 - p) / n);
    for (int c : counts)
        CHECK(std::abs(static_cast<double>(c) / n - p) <= 3 * sigma);
}

TEST_CASE("sampling is deterministic for a fixed rng state") {
    ReplayBuffer buffer(50, ReplayMode::Weighted, 1.0);
    for (int i = 0; i < 50; ++i)
        buffer.push(tr(i), 0.1 * i);
    std::mt19937_64 a(77), b(77);
    CHECK(buffer.sample(64, a).indices == buffer.sample(64, b).indices);
    CHECK_THROWS_AS(ReplayBuffer(4).sample(1, a), EmptyBuffer);
}

TEST_CASE("refresh updates weights through the same formula") {
    ReplayBuffer buffer(10, ReplayMode::Weighted, 0.5);
    buffer.push(tr(0), 2.0);
    buffer.push(tr(1), 0.0);
    double before = buffer.at(0).weight;

    SUBCASE("same delta is idempotent") {
        buffer.refresh_weights(std::vector<int>{0}, std::vector<double>{2.0});
        CHECK(buffer.at(0).weight == before);
    }
    SUBCASE("raising a delta raises its probability") {
        double p_before = buffer.probabilities()[1];
        buffer.refresh_weights(std::vector<int>{1}, std::vector<double>{4.0});
        CHECK(buffer.probabilities()[1] > p_before);
    }
    SUBCASE("all-zero deltas flatten to uniform") {
        buffer.refresh_weights(std::vector<int>{0, 1}, std::vector<double>{0.0, 0.0});
        auto p = buffer.probabilities();
        CHECK(p[0] == doctest::Approx(0.5).epsilon(1e-12));
        CHECK(p[1] == doctest::Approx(0.5).epsilon(1e-12));
    }
    SUBCASE("duplicate slots apply the last delta") {
        buffer.refresh_weights(std::vector<int>{0, 0}, std::vector<double>{5.0, 0.0});
        CHECK(buffer.at(0).weight == 1.0);
    }
    SUBCASE("bad inputs") {
        CHECK_THROWS_AS(buffer.refresh_weights(std::vector<int>{9}, std::vector<double>{0.0}),
                        UnoccupiedSlot);
        CHECK_THROWS_AS(
            buffer.refresh_weights(std::vector<int>{0}, std::vector<double>{std::nan("")}),
            NonFiniteTDError);
    }
}

TEST_CASE("raising one |delta| never lowers its probability") {
    std::mt19937_64 rng(4);
    ReplayBuffer buffer(64, ReplayMode::Weighted, 0.7, 10.0);
    std::uniform_real_distribution<double> delta(0.0, 6.0);
    for (int i = 0; i < 64; ++i)
        buffer.push(tr(i), delta(rng));
    for (int trial = 0; trial < 50; ++trial) {
        int slot = std::uniform_int_distribution<int>(0, 63)(rng);
        double d = buffer.at(slot).td_error;
        double p_before = buffer.probabilities()[static_cast<std::size_t>(slot)];
        double bump = std::uniform_real_distribution<double>(0.1, 2.0)(rng);
        buffer.refresh_weights(std::vector<int>{slot}, std::vector<double>{std::abs(d) + bump});
        double p_after = buffer.probabilities()[static_cast<std::size_t>(slot)];
        CHECK(p_after >= p_before);
        if (0.7 * (std::abs(d) + bump) < 10.0)
            CHECK(p_after > p_before);
    }
}

TEST_CASE("scaling all deltas preserves the probability ranking") {
    std::mt19937_64 rng(6);
    std::uniform_real_distribution<double> delta(0.0, 3.0);
    std::vector<double> deltas;
    for (int i = 0; i < 32; ++i)
        deltas.push_back(delta(rng));

    auto ranking = [](const std::vector<double>& p) {
        std::vector<int> order(p.size());
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(),
                         [&p](int a, int b) { return p[static_cast<std::size_t>(a)] >
                                                     p[static_cast<std::size_t>(b)]; });
        return order;
    };

    ReplayBuffer one(32, ReplayMode::Weighted, 1.0);
    ReplayBuffer scaled(32, ReplayMode::Weighted, 1.0);
    for (int i = 0; i < 32; ++i) {
        one.push(tr(i), deltas[static_cast<std::size_t>(i)]);
        scaled.push(tr(i), 2.5 * deltas[static_cast<std::size_t>(i)]);
    }
    auto p1 = one.probabilities();
    auto p2 = scaled.probabilities();
    CHECK(ranking(p1) == ranking(p2));
    CHECK(p1 != p2); // the distribution itself does change
}

TEST_CASE("tiny lambda flattens toward uniform") {
    std::mt19937_64 rng(9);
    ReplayBuffer buffer(100, ReplayMode::Weighted, 1e-9);
    std::uniform_real_distribution<double> delta(0.0, 10.0);
    for (int i = 0; i < 100; ++i)
        buffer.push(tr(i), delta(rng));
    auto p = buffer.probabilities();
    for (double x : p)
        CHECK(std::abs(x - 0.01) < 1e-6);
}

TEST_CASE("csv dump has the documented columns") {
    ReplayBuffer buffer(4, ReplayMode::Weighted, 1.0);
    buffer.push(Transition{3, 2, 1.0, 7, true}, 0.25);
    std::ostringstream os;
    buffer.dump_csv(os);
    std::istringstream is(os.str());
    std::string header, row;
    std::getline(is, header);
    std::getline(is, row);
    CHECK(header == "slot,state,action,reward,next_state,done,td_error,weight");
    CHECK(row.substr(0, 14) == "0,3,2,1,7,1,0.");
    CHECK(std::count(row.begin(), row.end(), ',') == 7);
}

TEST_SUITE_END();
