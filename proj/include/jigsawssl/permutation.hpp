#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "jigsawssl/rng.hpp"

namespace jigsawssl {

// A tile ordering: order[i] is the source tile placed at grid position i.
// Always a bijection on {0..n-1}.
struct Permutation {
    std::vector<int> order;

    bool operator==(const Permutation&) const = default;

    std::size_t size() const { return order.size(); }
    bool is_identity() const;
    bool is_valid() const;
};

Permutation identity_permutation(int n);

// Count of positions where the two orderings differ. Throws
// std::invalid_argument on length mismatch.
int hamming_distance(const Permutation& a, const Permutation& b);

// inverse(p).order[p.order[i]] == i.
Permutation inverse(const Permutation& p);

// compose(a, b).order[i] == a.order[b.order[i]].
Permutation compose(const Permutation& a, const Permutation& b);

// The pseudo-label space for the jigsaw task. Label 0 is the identity
// ordering; labels 1..P index the scrambled permutations.
struct PermutationSet {
    int grid_size = 3;
    std::vector<Permutation> scrambled;  // labels 1..P, in selection order
    std::uint64_t generation_seed = 0;
    int min_pairwise_hamming = 0;  // audit record over all scrambled pairs

    int tile_count() const { return grid_size * grid_size; }
    int label_count() const { return static_cast<int>(scrambled.size()) + 1; }

    // permutation_for(0) is the identity.
    Permutation permutation_for(int pseudo_label) const;
};

// The uniformly sampled candidate pool the greedy selection draws from.
// Identity is always excluded. When pool_size covers the whole symmetric
// group, the pool is the full set of non-identity permutations in
// lexicographic order; otherwise pool_size distinct random permutations.
// The same rng must be threaded through greedy_select for an exact replay.
std::vector<Permutation> build_candidate_pool(int grid_size, std::size_t pool_size, Rng& rng);

// Greedy max-min Hamming selection. The first pick is drawn uniformly from
// the pool; each later pick maximizes the minimum distance to everything
// already selected, breaking ties toward the lexicographically smallest
// candidate. Throws on count > pool.size().
std::vector<Permutation> greedy_select(const std::vector<Permutation>& pool, int count, Rng& rng);

// Pool construction plus greedy selection, deterministic for a fixed seed.
PermutationSet generate_permutation_set(int grid_size, int count, std::size_t pool_size,
                                        std::uint64_t seed);

int min_pairwise_hamming(const std::vector<Permutation>& perms);

// Plain-text serialization: header "grid=G P=P seed=S", then one permutation
// per line as space-separated indices, line order = label order 1..P.
std::string to_text(const PermutationSet& set);
PermutationSet permutation_set_from_text(const std::string& text);

void save_permutation_set(const PermutationSet& set, const std::string& path);
PermutationSet load_permutation_set(const std::string& path);

}  // namespace jigsawssl
