#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <set>

#include "jigsawssl/permutation.hpp"

using namespace jigsawssl;

namespace {

// Independent position-wise comparison, kept separate from the library path.
int hamming_oracle(const Permutation& a, const Permutation& b) {
    int d = 0;
    for (std::size_t i = 0; i < a.order.size(); ++i) {
        if (a.order[i] != b.order[i]) ++d;
    }
    return d;
}

Permutation random_permutation(int n, Rng& rng) {
    Permutation p = identity_permutation(n);
    rng.shuffle(p.order);
    return p;
}

}  // namespace

TEST_SUITE("permset") {

TEST_CASE("hamming distance basics") {
    const auto id9 = identity_permutation(9);
    CHECK(hamming_distance(id9, id9) == 0);

    Permutation rev;
    rev.order = {8, 7, 6, 5, 4, 3, 2, 1, 0};
    CHECK(hamming_distance(id9, rev) == 8);  // the middle position is fixed

    Permutation short_p;
    short_p.order = {0, 1, 2};
    CHECK_THROWS_AS(hamming_distance(id9, short_p), std::invalid_argument);
}

TEST_CASE("hamming distance matches element-wise oracle on random pairs") {
    Rng rng(7);
    for (int trial = 0; trial < 200; ++trial) {
        const auto a = random_permutation(4, rng);
        const auto b = random_permutation(4, rng);
        CHECK(hamming_distance(a, b) == hamming_oracle(a, b));
        CHECK(hamming_distance(a, b) == hamming_distance(b, a));
    }
}

TEST_CASE("distance 1 is impossible between distinct permutations") {
    Rng rng(11);
    for (int trial = 0; trial < 300; ++trial) {
        const auto a = random_permutation(9, rng);
        const auto b = random_permutation(9, rng);
        const int d = hamming_distance(a, b);
        CHECK(d != 1);
        if (d == 0) CHECK(a == b);
    }
}

TEST_CASE("inverse composes to identity") {
    CHECK(inverse(identity_permutation(4)) == identity_permutation(4));

    Permutation p;
    p.order = {1, 2, 0};
    Permutation expected;
    expected.order = {2, 0, 1};
    CHECK(inverse(p) == expected);

    Rng rng(3);
    for (int trial = 0; trial < 50; ++trial) {
        const auto q = random_permutation(9, rng);
        CHECK(compose(inverse(q), q) == identity_permutation(9));
        CHECK(compose(q, inverse(q)) == identity_permutation(9));
    }
}

TEST_CASE("greedy selection attains the exhaustive optimum for G=2, P=3") {
    // All 23 non-identity permutations of 4 elements.
    Rng pool_rng(123);
    const auto pool = build_candidate_pool(2, 100, pool_rng);
    REQUIRE(pool.size() == 23);

    // Exhaustive search over all C(23,3) subsets for the max-min distance.
    int best = 0;
    for (std::size_t i = 0; i < pool.size(); ++i) {
        for (std::size_t j = i + 1; j < pool.size(); ++j) {
            for (std::size_t k = j + 1; k < pool.size(); ++k) {
                const int d = std::min({hamming_distance(pool[i], pool[j]),
                                        hamming_distance(pool[i], pool[k]),
                                        hamming_distance(pool[j], pool[k])});
                best = std::max(best, d);
            }
        }
    }

    for (std::uint64_t seed : {0ull, 1ull, 42ull, 1234ull}) {
        const auto set = generate_permutation_set(2, 3, 100, seed);
        CHECK(set.min_pairwise_hamming == best);
        CHECK(min_pairwise_hamming(set.scrambled) == best);
    }
}

TEST_CASE("paper-scale set: 30 distinct non-identity permutations") {
    const auto set = generate_permutation_set(3, 30, 10000, 0);
    REQUIRE(set.scrambled.size() == 30);
    CHECK(set.grid_size == 3);

    std::set<std::vector<int>> unique;
    for (const auto& p : set.scrambled) {
        CHECK(p.is_valid());
        CHECK_FALSE(p.is_identity());
        unique.insert(p.order);
    }
    CHECK(unique.size() == 30);
    CHECK(set.min_pairwise_hamming >= 2);

    // The recorded minimum is attained by some pair.
    int observed = 9;
    for (std::size_t i = 0; i < set.scrambled.size(); ++i) {
        for (std::size_t j = i + 1; j < set.scrambled.size(); ++j) {
            observed = std::min(observed, hamming_distance(set.scrambled[i], set.scrambled[j]));
        }
    }
    CHECK(observed == set.min_pairwise_hamming);
}

TEST_CASE("generation is deterministic in the seed") {
    const auto a = generate_permutation_set(3, 12, 2000, 99);
    const auto b = generate_permutation_set(3, 12, 2000, 99);
    CHECK(a.scrambled == b.scrambled);
    const auto c = generate_permutation_set(3, 12, 2000, 100);
    CHECK(a.scrambled != c.scrambled);
}

TEST_CASE("greedy audit: every pick maximized the min distance over its pool") {
    const std::uint64_t seed = 5;
    const int P = 20;
    const std::size_t pool_size = 3000;
    const auto set = generate_permutation_set(3, P, pool_size, seed);

    // Replay the construction with the same seed.
    Rng rng(seed);
    const auto pool = build_candidate_pool(3, pool_size, rng);

    std::set<std::vector<int>> chosen;
    for (int step = 1; step < P; ++step) {
        chosen.insert(set.scrambled[static_cast<std::size_t>(step) - 1].order);
        const auto& picked = set.scrambled[static_cast<std::size_t>(step)];

        const auto min_dist_to_chosen = [&](const Permutation& cand) {
            int best = 10;
            for (int prev = 0; prev < step; ++prev) {
                best = std::min(best,
                                hamming_distance(cand, set.scrambled[static_cast<std::size_t>(prev)]));
            }
            return best;
        };
        const int picked_dist = min_dist_to_chosen(picked);
        for (const auto& cand : pool) {
            if (chosen.count(cand.order)) continue;
            CHECK(min_dist_to_chosen(cand) <= picked_dist);
        }
    }
}

TEST_CASE("capacity errors") {
    CHECK_THROWS(generate_permutation_set(2, 24, 100, 0));  // only 23 available
    CHECK_THROWS(generate_permutation_set(2, 5, 3, 0));     // pool smaller than P
    CHECK_THROWS(generate_permutation_set(2, 0, 10, 0));
}

TEST_CASE("text serialization round trip") {
    const auto set = generate_permutation_set(3, 8, 500, 21);
    const auto text = to_text(set);
    const auto loaded = permutation_set_from_text(text);
    CHECK(loaded.grid_size == set.grid_size);
    CHECK(loaded.generation_seed == set.generation_seed);
    CHECK(loaded.scrambled == set.scrambled);
    CHECK(loaded.min_pairwise_hamming == set.min_pairwise_hamming);

    CHECK_THROWS(permutation_set_from_text(""));
    CHECK_THROWS(permutation_set_from_text("grid=3 P=1 seed=0\n0 1 2 3 4 5 6 7 8\n"));  // identity
    CHECK_THROWS(permutation_set_from_text("grid=3 P=2 seed=0\n1 0 2 3 4 5 6 7 8\n"));  // count
}

TEST_CASE("pseudo label space includes identity as label 0") {
    const auto set = generate_permutation_set(3, 5, 500, 2);
    CHECK(set.label_count() == 6);
    CHECK(set.permutation_for(0) == identity_permutation(9));
    CHECK(set.permutation_for(1) == set.scrambled[0]);
    CHECK_THROWS(set.permutation_for(6));
    CHECK_THROWS(set.permutation_for(-1));
}

}  // TEST_SUITE
