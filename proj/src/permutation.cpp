#include "jigsawssl/permutation.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>

namespace jigsawssl {

bool Permutation::is_identity() const {
    for (std::size_t i = 0; i < order.size(); ++i) {
        if (order[i] != static_cast<int>(i)) return false;
    }
    return true;
}

bool Permutation::is_valid() const {
    std::vector<bool> seen(order.size(), false);
    for (int v : order) {
        if (v < 0 || v >= static_cast<int>(order.size()) || seen[v]) return false;
        seen[v] = true;
    }
    return true;
}

Permutation identity_permutation(int n) {
    Permutation p;
    p.order.resize(n);
    std::iota(p.order.begin(), p.order.end(), 0);
    return p;
}

int hamming_distance(const Permutation& a, const Permutation& b) {
    if (a.order.size() != b.order.size()) {
        throw std::invalid_argument("hamming_distance: permutation lengths differ (" +
                                    std::to_string(a.order.size()) + " vs " +
                                    std::to_string(b.order.size()) + ")");
    }
    int d = 0;
    for (std::size_t i = 0; i < a.order.size(); ++i) {
        if (a.order[i] != b.order[i]) ++d;
    }
    return d;
}

Permutation inverse(const Permutation& p) {
    Permutation inv;
    inv.order.resize(p.order.size());
    for (std::size_t i = 0; i < p.order.size(); ++i) {
        inv.order[p.order[i]] = static_cast<int>(i);
    }
    return inv;
}

Permutation compose(const Permutation& a, const Permutation& b) {
    if (a.order.size() != b.order.size()) {
        throw std::invalid_argument("compose: permutation lengths differ");
    }
    Permutation c;
    c.order.resize(a.order.size());
    for (std::size_t i = 0; i < a.order.size(); ++i) {
        c.order[i] = a.order[b.order[i]];
    }
    return c;
}

Permutation PermutationSet::permutation_for(int pseudo_label) const {
    if (pseudo_label == 0) return identity_permutation(tile_count());
    if (pseudo_label < 0 || pseudo_label > static_cast<int>(scrambled.size())) {
        throw std::out_of_range("pseudo label " + std::to_string(pseudo_label) +
                                " outside {0.." + std::to_string(scrambled.size()) + "}");
    }
    return scrambled[static_cast<std::size_t>(pseudo_label) - 1];
}

namespace {

std::uint64_t factorial(int n) {
    std::uint64_t f = 1;
    for (int i = 2; i <= n; ++i) f *= static_cast<std::uint64_t>(i);
    return f;
}

}  // namespace

std::vector<Permutation> build_candidate_pool(int grid_size, std::size_t pool_size, Rng& rng) {
    const int n = grid_size * grid_size;
    if (n > 12) throw std::invalid_argument("grid too large for pool construction");
    const std::uint64_t available = factorial(n) - 1;  // identity excluded

    std::vector<Permutation> pool;
    if (pool_size >= available) {
        // Full enumeration, lexicographic order.
        Permutation p = identity_permutation(n);
        while (std::next_permutation(p.order.begin(), p.order.end())) {
            pool.push_back(p);
        }
        return pool;
    }

    std::set<std::vector<int>> seen;
    const Permutation id = identity_permutation(n);
    while (pool.size() < pool_size) {
        Permutation p = id;
        rng.shuffle(p.order);
        if (p.is_identity()) continue;
        if (seen.insert(p.order).second) pool.push_back(std::move(p));
    }
    return pool;
}

std::vector<Permutation> greedy_select(const std::vector<Permutation>& pool, int count, Rng& rng) {
    if (count < 1) throw std::invalid_argument("greedy_select: count must be >= 1");
    if (static_cast<std::size_t>(count) > pool.size()) {
        throw std::runtime_error("greedy_select: requested " + std::to_string(count) +
                                 " permutations but pool holds only " +
                                 std::to_string(pool.size()));
    }

    std::vector<bool> used(pool.size(), false);
    // min_dist[i]: minimum Hamming distance from pool[i] to the selected set.
    std::vector<int> min_dist(pool.size(), std::numeric_limits<int>::max());

    std::vector<Permutation> selected;
    selected.reserve(static_cast<std::size_t>(count));

    const auto first = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(pool.size()) - 1));
    selected.push_back(pool[first]);
    used[first] = true;

    while (selected.size() < static_cast<std::size_t>(count)) {
        for (std::size_t i = 0; i < pool.size(); ++i) {
            if (used[i]) continue;
            min_dist[i] = std::min(min_dist[i], hamming_distance(pool[i], selected.back()));
        }
        std::size_t best = pool.size();
        for (std::size_t i = 0; i < pool.size(); ++i) {
            if (used[i]) continue;
            if (best == pool.size() || min_dist[i] > min_dist[best] ||
                (min_dist[i] == min_dist[best] && pool[i].order < pool[best].order)) {
                best = i;
            }
        }
        selected.push_back(pool[best]);
        used[best] = true;
    }
    return selected;
}

int min_pairwise_hamming(const std::vector<Permutation>& perms) {
    int best = perms.empty() ? 0 : static_cast<int>(perms[0].size());
    for (std::size_t i = 0; i < perms.size(); ++i) {
        for (std::size_t j = i + 1; j < perms.size(); ++j) {
            best = std::min(best, hamming_distance(perms[i], perms[j]));
        }
    }
    return best;
}

PermutationSet generate_permutation_set(int grid_size, int count, std::size_t pool_size,
                                        std::uint64_t seed) {
    if (count < 1) throw std::invalid_argument("generate_permutation_set: P must be >= 1");
    const int n = grid_size * grid_size;
    const std::uint64_t available = factorial(n) - 1;
    if (static_cast<std::uint64_t>(count) > available) {
        throw std::runtime_error("P=" + std::to_string(count) + " exceeds the " +
                                 std::to_string(available) +
                                 " distinct non-identity permutations for grid " +
                                 std::to_string(grid_size));
    }
    if (pool_size < static_cast<std::size_t>(count)) {
        throw std::invalid_argument("pool_size must be >= P");
    }

    Rng rng(seed);
    PermutationSet set;
    set.grid_size = grid_size;
    set.generation_seed = seed;
    const auto pool = build_candidate_pool(grid_size, pool_size, rng);
    set.scrambled = greedy_select(pool, count, rng);
    set.min_pairwise_hamming =
        set.scrambled.size() > 1 ? min_pairwise_hamming(set.scrambled) : n;
    return set;
}

std::string to_text(const PermutationSet& set) {
    std::ostringstream out;
    out << "grid=" << set.grid_size << " P=" << set.scrambled.size()
        << " seed=" << set.generation_seed << "\n";
    for (const auto& p : set.scrambled) {
        for (std::size_t i = 0; i < p.order.size(); ++i) {
            if (i) out << ' ';
            out << p.order[i];
        }
        out << "\n";
    }
    return out.str();
}

PermutationSet permutation_set_from_text(const std::string& text) {
    std::istringstream in(text);
    std::string header;
    if (!std::getline(in, header)) throw std::runtime_error("permutation set: empty file");

    PermutationSet set;
    std::size_t p_count = 0;
    {
        std::istringstream hs(header);
        std::string tok;
        while (hs >> tok) {
            const auto eq = tok.find('=');
            if (eq == std::string::npos) throw std::runtime_error("permutation set: bad header token '" + tok + "'");
            const std::string key = tok.substr(0, eq);
            const std::string val = tok.substr(eq + 1);
            if (key == "grid") set.grid_size = std::stoi(val);
            else if (key == "P") p_count = static_cast<std::size_t>(std::stoul(val));
            else if (key == "seed") set.generation_seed = std::stoull(val);
            else throw std::runtime_error("permutation set: unknown header key '" + key + "'");
        }
    }

    const int n = set.tile_count();
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        Permutation p;
        int v;
        while (ls >> v) p.order.push_back(v);
        if (static_cast<int>(p.order.size()) != n || !p.is_valid()) {
            throw std::runtime_error("permutation set: invalid permutation line '" + line + "'");
        }
        if (p.is_identity()) throw std::runtime_error("permutation set: identity in scrambled list");
        set.scrambled.push_back(std::move(p));
    }
    if (set.scrambled.size() != p_count) {
        throw std::runtime_error("permutation set: header P=" + std::to_string(p_count) +
                                 " but file holds " + std::to_string(set.scrambled.size()));
    }
    set.min_pairwise_hamming =
        set.scrambled.size() > 1 ? min_pairwise_hamming(set.scrambled) : n;
    return set;
}

void save_permutation_set(const PermutationSet& set, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    out << to_text(set);
}

PermutationSet load_permutation_set(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return permutation_set_from_text(buf.str());
}

}  // namespace jigsawssl
