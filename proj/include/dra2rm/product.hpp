#pragma once

#include <algorithm>
#include <queue>
#include <stdexcept>
#include <utility>
#include <vector>

#include "dra2rm/model.hpp"

namespace dra2rm {

enum class ProductMode { Reachable, Exhaustive };

// Rabin pair lifted to product states, stored as membership masks.
struct PairMask {
    std::vector<char> acc;
    std::vector<char> rej;
};

/// MDP synchronized with a DRA. States are (s, q) pairs indexed in canonical
/// (s * |Q| + q) order; the automaton coordinate moves deterministically with
/// the transition label, so probabilities are carried over unchanged.
struct ProductMdp {
    Mdp mdp;
    std::vector<PairMask> pairs;
    std::vector<std::pair<int, int>> back; // v -> (s, q)
    int base_states = 0;
    int dra_states = 0;

    int state_of(int s, int q) const {
        auto key = std::make_pair(s, q);
        auto it = std::lower_bound(back.begin(), back.end(), key);
        if (it == back.end() || *it != key) return -1;
        return static_cast<int>(it - back.begin());
    }
};

/// MDP synchronized with a reward machine; transition rewards come from the
/// machine's reward table.
struct RmProductMdp {
    Mdp mdp;
    std::vector<std::vector<std::vector<double>>> reward; // aligned with mdp.rows
    std::vector<std::pair<int, int>> back;                // v -> (s, u)
    int base_states = 0;
    int rm_states = 0;

    int state_of(int s, int u) const {
        auto key = std::make_pair(s, u);
        auto it = std::lower_bound(back.begin(), back.end(), key);
        if (it == back.end() || *it != key) return -1;
        return static_cast<int>(it - back.begin());
    }

    double reward_of(int v, int a, int v_to) const {
        const int ai = mdp.enabled_index(v, a);
        const auto& row = mdp.rows[v][ai];
        for (std::size_t k = 0; k < row.size(); ++k)
            if (row[k].to == v_to) return reward[v][ai][k];
        throw std::out_of_range("no such product transition");
    }
};

namespace detail {

// Collects the canonical state list for a synchronized product: either all
// pairs, or the pairs reachable from the initial one under `succ`.
template <typename SuccFn>
inline std::vector<std::pair<int, int>> product_states(int n_left, int n_right,
                                                       std::pair<int, int> init, ProductMode mode,
                                                       SuccFn&& succ) {
    std::vector<std::pair<int, int>> out;
    if (mode == ProductMode::Exhaustive) {
        out.reserve(static_cast<std::size_t>(n_left) * n_right);
        for (int s = 0; s < n_left; ++s)
            for (int q = 0; q < n_right; ++q) out.emplace_back(s, q);
        return out;
    }
    std::vector<char> seen(static_cast<std::size_t>(n_left) * n_right, 0);
    auto idx = [n_right](std::pair<int, int> p) {
        return static_cast<std::size_t>(p.first) * n_right + p.second;
    };
    std::queue<std::pair<int, int>> bfs;
    seen[idx(init)] = 1;
    bfs.push(init);
    while (!bfs.empty()) {
        auto v = bfs.front();
        bfs.pop();
        out.push_back(v);
        succ(v, [&](std::pair<int, int> w) {
            if (!seen[idx(w)]) {
                seen[idx(w)] = 1;
                bfs.push(w);
            }
        });
    }
    std::sort(out.begin(), out.end());
    return out;
}

} // namespace detail

inline ProductMdp build_product(const Mdp& m, const Dra& d, ProductMode mode = ProductMode::Reachable) {
    if (static_cast<int>(m.ap.size()) != d.ap_count)
        throw std::invalid_argument("MDP and DRA use different alphabets");

    auto successors = [&](std::pair<int, int> v, auto&& push) {
        const auto [s, q] = v;
        for (std::size_t ai = 0; ai < m.enabled[s].size(); ++ai) {
            const int a = m.enabled[s][ai];
            for (const auto& t : m.rows[s][ai]) {
                if (t.prob <= 0.0) continue;
                push(std::make_pair(t.to, d.delta[q][m.label(s, a, t.to)]));
            }
        }
    };
    ProductMdp p;
    p.base_states = m.state_count();
    p.dra_states = d.state_count();
    p.back = detail::product_states(m.state_count(), d.state_count(),
                                    {m.initial, d.initial}, mode, successors);

    const int n = static_cast<int>(p.back.size());
    p.mdp.state_names.resize(n);
    p.mdp.action_names = m.action_names;
    p.mdp.ap = m.ap;
    p.mdp.enabled.resize(n);
    p.mdp.rows.resize(n);
    for (int v = 0; v < n; ++v) {
        const auto [s, q] = p.back[v];
        p.mdp.state_names[v] = m.state_names[s] + "@" + d.state_names[q];
        p.mdp.enabled[v] = m.enabled[s];
        p.mdp.rows[v].resize(m.enabled[s].size());
        for (std::size_t ai = 0; ai < m.enabled[s].size(); ++ai) {
            const int a = m.enabled[s][ai];
            for (const auto& t : m.rows[s][ai]) {
                if (t.prob <= 0.0) continue;
                const int q2 = d.delta[q][m.label(s, a, t.to)];
                const int w = p.state_of(t.to, q2);
                if (w >= 0) p.mdp.rows[v][ai].push_back({w, t.prob});
            }
        }
    }
    p.mdp.initial = p.state_of(m.initial, d.initial);
    p.mdp.finalize();

    p.pairs.resize(d.pairs.size());
    for (std::size_t i = 0; i < d.pairs.size(); ++i) {
        p.pairs[i].acc.assign(n, 0);
        p.pairs[i].rej.assign(n, 0);
        std::vector<char> in_acc(d.state_count(), 0), in_rej(d.state_count(), 0);
        for (int q : d.pairs[i].acc) in_acc[q] = 1;
        for (int q : d.pairs[i].rej) in_rej[q] = 1;
        for (int v = 0; v < n; ++v) {
            p.pairs[i].acc[v] = in_acc[p.back[v].second];
            p.pairs[i].rej[v] = in_rej[p.back[v].second];
        }
    }
    return p;
}

inline RmProductMdp build_rm_product(const Mdp& m, const RewardMachine& r,
                                     ProductMode mode = ProductMode::Reachable) {
    if (!m.finalized()) throw std::invalid_argument("MDP not finalized");
    {
        const ValidationReport rep = validate_rm(r, m);
        if (!rep.ok()) throw std::invalid_argument("reward machine does not cover the MDP domain");
    }

    auto successors = [&](std::pair<int, int> v, auto&& push) {
        const auto [s, u] = v;
        for (std::size_t ai = 0; ai < m.enabled[s].size(); ++ai) {
            const int a = m.enabled[s][ai];
            for (const auto& t : m.rows[s][ai]) {
                if (t.prob <= 0.0) continue;
                push(std::make_pair(t.to, r.update[u][m.edge_id(s, a, t.to)]));
            }
        }
    };
    RmProductMdp p;
    p.base_states = m.state_count();
    p.rm_states = r.state_count();
    p.back = detail::product_states(m.state_count(), r.state_count(),
                                    {m.initial, r.initial}, mode, successors);

    const int n = static_cast<int>(p.back.size());
    p.mdp.state_names.resize(n);
    p.mdp.action_names = m.action_names;
    p.mdp.ap = m.ap;
    p.mdp.enabled.resize(n);
    p.mdp.rows.resize(n);
    p.reward.resize(n);
    for (int v = 0; v < n; ++v) {
        const auto [s, u] = p.back[v];
        p.mdp.state_names[v] = m.state_names[s] + "@" + r.state_names[u];
        p.mdp.enabled[v] = m.enabled[s];
        p.mdp.rows[v].resize(m.enabled[s].size());
        p.reward[v].resize(m.enabled[s].size());
        for (std::size_t ai = 0; ai < m.enabled[s].size(); ++ai) {
            const int a = m.enabled[s][ai];
            for (const auto& t : m.rows[s][ai]) {
                if (t.prob <= 0.0) continue;
                const int e = m.edge_id(s, a, t.to);
                const int w = p.state_of(t.to, r.update[u][e]);
                if (w < 0) continue;
                p.mdp.rows[v][ai].push_back({w, t.prob});
                p.reward[v][ai].push_back(r.reward[u][e]);
            }
        }
    }
    p.mdp.initial = p.state_of(m.initial, r.initial);
    p.mdp.finalize();
    return p;
}

// ---------------------------------------------------------------------------
// policy lifting

namespace detail {

template <typename BackMap>
inline FiniteMemoryPolicy lift_policy_impl(const MemorylessPolicy& p, const Mdp& product_mdp,
                                           const BackMap& back, const Mdp& base, int memory_count,
                                           int memory_initial,
                                           const std::function<int(int, int)>& memory_step) {
    if (static_cast<int>(p.action.size()) != product_mdp.state_count())
        throw std::invalid_argument("policy not total on the product");
    for (int v = 0; v < product_mdp.state_count(); ++v)
        if (!product_mdp.is_enabled(v, p.action[v]))
            throw std::invalid_argument("policy picks a disabled action");

    FiniteMemoryPolicy out;
    out.memory_count = memory_count;
    out.memory_initial = memory_initial;
    out.choice.assign(base.state_count(), std::vector<int>(memory_count, -1));
    for (int v = 0; v < product_mdp.state_count(); ++v)
        out.choice[back[v].first][back[v].second] = p.action[v];
    // Pairs that were never materialized cannot be visited; keep the table
    // total anyway.
    for (int s = 0; s < base.state_count(); ++s)
        for (int mem = 0; mem < memory_count; ++mem)
            if (out.choice[s][mem] < 0) out.choice[s][mem] = base.enabled[s][0];

    out.memory_next.assign(memory_count, std::vector<int>(base.edge_count(), 0));
    for (int mem = 0; mem < memory_count; ++mem)
        for (int e = 0; e < base.edge_count(); ++e) out.memory_next[mem][e] = memory_step(mem, e);
    return out;
}

} // namespace detail

/// Turns a memoryless product policy into a finite-memory base policy whose
/// memory is the DRA state.
inline FiniteMemoryPolicy lift_policy(const MemorylessPolicy& p, const ProductMdp& prod,
                                      const Mdp& base, const Dra& d) {
    return detail::lift_policy_impl(
        p, prod.mdp, prod.back, base, d.state_count(), d.initial, [&](int q, int e) {
            const EdgeRef t = base.edge(e);
            return d.delta[q][base.label(t.from, t.action, t.to)];
        });
}

/// Same, with the reward machine as memory.
inline FiniteMemoryPolicy lift_policy(const MemorylessPolicy& p, const RmProductMdp& prod,
                                      const Mdp& base, const RewardMachine& r) {
    return detail::lift_policy_impl(p, prod.mdp, prod.back, base, r.state_count(), r.initial,
                                    [&](int u, int e) { return r.update[u][e]; });
}

} // namespace dra2rm
