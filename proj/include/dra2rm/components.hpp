#pragma once

#include <algorithm>
#include <functional>
#include <queue>
#include <stdexcept>
#include <vector>

#include "dra2rm/model.hpp"
#include "dra2rm/product.hpp"

namespace dra2rm {

/// Sub-MDP (T, act): a state set with one nonempty retained action set per
/// member. Qualifies as an end component when it is transition-closed and
/// strongly connected.
struct EndComponent {
    std::vector<int> states;               // ascending
    std::vector<std::vector<int>> actions; // aligned with states, ascending

    int index_of(int v) const {
        auto it = std::lower_bound(states.begin(), states.end(), v);
        if (it == states.end() || *it != v) return -1;
        return static_cast<int>(it - states.begin());
    }
    bool contains(int v) const { return index_of(v) >= 0; }
    bool is_simple() const {
        for (const auto& a : actions)
            if (a.size() != 1) return false;
        return true;
    }
    std::size_t size() const {
        std::size_t n = 0;
        for (const auto& a : actions) n += a.size();
        return n;
    }
    bool operator==(const EndComponent& o) const {
        return states == o.states && actions == o.actions;
    }
};

// ---------------------------------------------------------------------------
// strongly connected components (iterative Tarjan)

inline std::vector<std::vector<int>> strongly_connected_components(
    const std::vector<std::vector<int>>& adj) {
    const int n = static_cast<int>(adj.size());
    std::vector<int> index(n, -1), low(n, 0), on_stack(n, 0);
    std::vector<int> stack;
    std::vector<std::vector<int>> sccs;
    int counter = 0;

    struct Frame {
        int v;
        std::size_t edge;
    };
    std::vector<Frame> call;
    for (int root = 0; root < n; ++root) {
        if (index[root] >= 0) continue;
        call.push_back({root, 0});
        index[root] = low[root] = counter++;
        stack.push_back(root);
        on_stack[root] = 1;
        while (!call.empty()) {
            Frame& f = call.back();
            if (f.edge < adj[f.v].size()) {
                const int w = adj[f.v][f.edge++];
                if (index[w] < 0) {
                    index[w] = low[w] = counter++;
                    stack.push_back(w);
                    on_stack[w] = 1;
                    call.push_back({w, 0});
                } else if (on_stack[w]) {
                    low[f.v] = std::min(low[f.v], index[w]);
                }
            } else {
                if (low[f.v] == index[f.v]) {
                    std::vector<int> scc;
                    while (true) {
                        const int w = stack.back();
                        stack.pop_back();
                        on_stack[w] = 0;
                        scc.push_back(w);
                        if (w == f.v) break;
                    }
                    std::sort(scc.begin(), scc.end());
                    sccs.push_back(std::move(scc));
                }
                const int v = f.v;
                call.pop_back();
                if (!call.empty()) low[call.back().v] = std::min(low[call.back().v], low[v]);
            }
        }
    }
    return sccs;
}

// ---------------------------------------------------------------------------
// end-component predicates

/// Closure plus strong connectivity, exactly as defined for products.
inline bool is_end_component(const Mdp& m, const EndComponent& c) {
    if (c.states.empty()) return false;
    const int k = static_cast<int>(c.states.size());
    std::vector<std::vector<int>> adj(k);
    for (int i = 0; i < k; ++i) {
        const int v = c.states[i];
        if (c.actions[i].empty()) return false;
        for (int a : c.actions[i]) {
            if (!m.is_enabled(v, a)) return false;
            double inside = 0.0;
            for (const auto& t : m.row(v, a)) {
                const int j = c.index_of(t.to);
                if (j >= 0) {
                    inside += t.prob;
                    if (t.prob > 0.0) adj[i].push_back(j);
                }
            }
            if (std::fabs(inside - 1.0) > kStochasticTol) return false;
        }
    }
    const auto sccs = strongly_connected_components(adj);
    return sccs.size() == 1 && static_cast<int>(sccs[0].size()) == k;
}

/// Rabin check on the component's state set; returns the smallest witnessing
/// pair index, or (false, -1).
inline std::pair<bool, int> is_accepting(const EndComponent& c, const std::vector<PairMask>& pairs) {
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        bool hit = false, banned = false;
        for (int v : c.states) {
            if (pairs[i].acc[v]) hit = true;
            if (pairs[i].rej[v]) banned = true;
        }
        if (hit && !banned) return {true, static_cast<int>(i)};
    }
    return {false, -1};
}

// ---------------------------------------------------------------------------
// maximal end components

/// Maximal end components of the sub-MDP spanned by `state_mask` and
/// `keep_action`. Iterates SCC decomposition and pruning to a fixpoint: an
/// action is dropped when it can leave its SCC, a state when it loses all
/// actions.
inline std::vector<EndComponent> mec_decomposition(
    const Mdp& m, const std::vector<char>& state_mask,
    const std::function<bool(int, int)>& keep_action) {
    const int n = m.state_count();
    std::vector<char> alive(state_mask.begin(), state_mask.end());
    std::vector<std::vector<int>> act(n);
    for (int s = 0; s < n; ++s) {
        if (!alive[s]) continue;
        for (int a : m.enabled[s])
            if (keep_action(s, a)) act[s].push_back(a);
        if (act[s].empty()) alive[s] = 0;
    }

    while (true) {
        // component ids over the retained graph
        std::vector<std::vector<int>> adj(n);
        for (int s = 0; s < n; ++s) {
            if (!alive[s]) continue;
            for (int a : act[s])
                for (const auto& t : m.row(s, a))
                    if (t.prob > 0.0 && alive[t.to]) adj[s].push_back(t.to);
        }
        const auto sccs = strongly_connected_components(adj);
        std::vector<int> comp(n, -1);
        for (std::size_t i = 0; i < sccs.size(); ++i)
            for (int v : sccs[i])
                if (alive[v]) comp[v] = static_cast<int>(i);

        bool changed = false;
        for (int s = 0; s < n; ++s) {
            if (!alive[s]) continue;
            auto& as = act[s];
            for (std::size_t i = 0; i < as.size();) {
                bool leaves = false;
                for (const auto& t : m.row(s, as[i]))
                    if (t.prob > 0.0 && (!alive[t.to] || comp[t.to] != comp[s])) {
                        leaves = true;
                        break;
                    }
                if (leaves) {
                    as.erase(as.begin() + static_cast<std::ptrdiff_t>(i));
                    changed = true;
                } else {
                    ++i;
                }
            }
            if (as.empty()) {
                alive[s] = 0;
                changed = true;
            }
        }
        if (!changed) {
            // self-loop-free singleton SCCs are not components of their own
            std::vector<std::vector<int>> groups;
            for (const auto& scc : sccs) {
                std::vector<int> g;
                for (int v : scc)
                    if (alive[v]) g.push_back(v);
                if (g.empty()) continue;
                if (g.size() == 1) {
                    bool self = false;
                    for (int a : act[g[0]])
                        for (const auto& t : m.row(g[0], a))
                            if (t.to == g[0] && t.prob > 0.0) self = true;
                    if (!self) continue;
                }
                groups.push_back(std::move(g));
            }
            std::sort(groups.begin(), groups.end(),
                      [](const auto& x, const auto& y) { return x.front() < y.front(); });
            std::vector<EndComponent> out;
            for (auto& g : groups) {
                EndComponent c;
                c.states = std::move(g);
                for (int v : c.states) c.actions.push_back(act[v]);
                out.push_back(std::move(c));
            }
            return out;
        }
    }
}

inline std::vector<EndComponent> mec_decomposition(const Mdp& m) {
    return mec_decomposition(m, std::vector<char>(m.state_count(), 1),
                             [](int, int) { return true; });
}

inline std::vector<EndComponent> mec_decomposition(const ProductMdp& p) {
    return mec_decomposition(p.mdp);
}

/// Maximal accepting ECs, one batch per Rabin pair: restrict the product to
/// states outside R_i (dropping actions that can reach R_i), decompose, and
/// keep the components that touch A_i. Every AEC is contained in one of
/// these, which is what the covering construction needs.
inline std::vector<std::pair<EndComponent, int>> maximal_accepting_ecs(const ProductMdp& p) {
    std::vector<std::pair<EndComponent, int>> out;
    const int n = p.mdp.state_count();
    for (std::size_t i = 0; i < p.pairs.size(); ++i) {
        std::vector<char> mask(n);
        for (int v = 0; v < n; ++v) mask[v] = !p.pairs[i].rej[v];
        auto keep = [&](int s, int a) {
            for (const auto& t : p.mdp.row(s, a))
                if (t.prob > 0.0 && p.pairs[i].rej[t.to]) return false;
            return true;
        };
        for (auto& mec : mec_decomposition(p.mdp, mask, keep)) {
            bool hits = false;
            for (int v : mec.states)
                if (p.pairs[i].acc[v]) hits = true;
            if (hits) out.emplace_back(std::move(mec), static_cast<int>(i));
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// accepting simple end components

/// Shrinks an accepting EC to an accepting simple EC it contains. While some
/// state has more than one action, keep the first action of a shortest path
/// to an accepting state, drop the lexicographically largest other action,
/// and restrict to what stays reachable. size() strictly decreases, so this
/// terminates.
inline EndComponent extract_asec(const Mdp& m, const std::vector<PairMask>& pairs,
                                 EndComponent c) {
    auto [ok, pair_idx] = is_accepting(c, pairs);
    if (!ok) throw std::invalid_argument("end component is not accepting");

    while (!c.is_simple()) {
        int vi = -1;
        for (std::size_t i = 0; i < c.states.size(); ++i)
            if (c.actions[i].size() > 1) {
                vi = static_cast<int>(i);
                break;
            }
        const int v = c.states[vi];

        int keep_action = -1;
        if (!pairs[pair_idx].acc[c.states[vi]]) {
            // BFS over (T, ->act) from v to the nearest accepting state;
            // record the first action of the path.
            const int k = static_cast<int>(c.states.size());
            std::vector<int> first_action(k, -1);
            std::vector<char> seen(k, 0);
            std::queue<int> bfs;
            seen[vi] = 1;
            int found = -1;
            for (int a : c.actions[vi]) {
                for (const auto& t : m.row(v, a)) {
                    if (t.prob <= 0.0) continue;
                    const int j = c.index_of(t.to);
                    if (j < 0 || seen[j]) continue;
                    seen[j] = 1;
                    first_action[j] = a;
                    if (pairs[pair_idx].acc[c.states[j]]) found = j;
                    bfs.push(j);
                }
                if (found >= 0) break;
            }
            while (found < 0 && !bfs.empty()) {
                const int i = bfs.front();
                bfs.pop();
                for (int a : c.actions[i])
                    for (const auto& t : m.row(c.states[i], a)) {
                        if (t.prob <= 0.0) continue;
                        const int j = c.index_of(t.to);
                        if (j < 0 || seen[j]) continue;
                        seen[j] = 1;
                        first_action[j] = first_action[i];
                        if (found < 0 && pairs[pair_idx].acc[c.states[j]]) found = j;
                        bfs.push(j);
                    }
            }
            if (found >= 0) keep_action = first_action[found];
        }

        // remove the largest action other than the one the path needs
        int removed = -1;
        for (auto it = c.actions[vi].rbegin(); it != c.actions[vi].rend(); ++it)
            if (*it != keep_action) {
                removed = *it;
                break;
            }
        c.actions[vi].erase(std::find(c.actions[vi].begin(), c.actions[vi].end(), removed));

        // restrict to states reachable from v; closure survives because a
        // retained state's successors are reachable through it
        const int k = static_cast<int>(c.states.size());
        std::vector<char> reach(k, 0);
        std::queue<int> bfs;
        reach[vi] = 1;
        bfs.push(vi);
        while (!bfs.empty()) {
            const int i = bfs.front();
            bfs.pop();
            for (int a : c.actions[i])
                for (const auto& t : m.row(c.states[i], a)) {
                    if (t.prob <= 0.0) continue;
                    const int j = c.index_of(t.to);
                    if (j >= 0 && !reach[j]) {
                        reach[j] = 1;
                        bfs.push(j);
                    }
                }
        }
        EndComponent next;
        for (int i = 0; i < k; ++i)
            if (reach[i]) {
                next.states.push_back(c.states[i]);
                next.actions.push_back(c.actions[i]);
            }
        c = std::move(next);
    }
    return c;
}

inline EndComponent extract_asec(const ProductMdp& p, const EndComponent& c) {
    return extract_asec(p.mdp, p.pairs, c);
}

// ---------------------------------------------------------------------------
// covering collections

enum class CoveringMode { Efficient, Naive };

constexpr int kNaiveCoveringCap = 12;

/// Ordered list C_1..C_n of accepting simple ECs; cover_index maps each
/// covered product state to the 1-based index of the first member containing
/// it (0 = uncovered).
struct CoveringCollection {
    std::vector<EndComponent> members;
    std::vector<int> cover_index;

    bool covered(int v) const { return cover_index[v] != 0; }
    const EndComponent& member_of(int v) const { return members[cover_index[v] - 1]; }
    /// The single retained action of C_(s,q) at a covered state.
    int action_of(int v) const {
        const EndComponent& c = member_of(v);
        return c.actions[c.index_of(v)][0];
    }
};

namespace detail {

inline CoveringCollection assemble_covering(std::vector<EndComponent> candidates, int n_states) {
    CoveringCollection cov;
    cov.cover_index.assign(n_states, 0);
    for (auto& c : candidates) {
        bool fresh = false;
        for (int v : c.states)
            if (cov.cover_index[v] == 0) fresh = true;
        if (!fresh) continue; // adds no coverage; dropping it keeps n <= |V|
        cov.members.push_back(std::move(c));
        for (int v : cov.members.back().states)
            if (cov.cover_index[v] == 0)
                cov.cover_index[v] = static_cast<int>(cov.members.size());
    }
    return cov;
}

// Exponential oracle: enumerate every (subset, one-action-per-state) choice
// and keep those that are accepting simple ECs, in canonical order.
inline std::vector<EndComponent> all_asecs_brute_force(const ProductMdp& p) {
    const int n = p.mdp.state_count();
    if (n > kNaiveCoveringCap) throw cap_exceeded_error("naive covering cap exceeded");
    std::vector<EndComponent> found;
    for (std::uint32_t bits = 1; bits < (1u << n); ++bits) {
        std::vector<int> states;
        for (int v = 0; v < n; ++v)
            if (bits & (1u << v)) states.push_back(v);

        std::vector<std::size_t> pick(states.size(), 0);
        while (true) {
            EndComponent c;
            c.states = states;
            for (std::size_t i = 0; i < states.size(); ++i)
                c.actions.push_back({p.mdp.enabled[states[i]][pick[i]]});
            if (is_end_component(p.mdp, c) && is_accepting(c, p.pairs).first)
                found.push_back(std::move(c));

            std::size_t i = 0;
            for (; i < pick.size(); ++i) {
                if (++pick[i] < p.mdp.enabled[states[i]].size()) break;
                pick[i] = 0;
            }
            if (i == pick.size()) break;
        }
    }
    return found;
}

} // namespace detail

/// Efficient mode: an ASEC inside every maximal accepting EC (polynomial).
/// Naive mode: greedy selection from the full brute-force ASEC enumeration,
/// covering every state that lies in any ASEC (oracle only, exponential).
inline CoveringCollection covering_asecs(const ProductMdp& p, CoveringMode mode) {
    std::vector<EndComponent> candidates;
    if (mode == CoveringMode::Efficient) {
        for (auto& [aec, pair_idx] : maximal_accepting_ecs(p)) {
            (void)pair_idx;
            candidates.push_back(extract_asec(p, aec));
        }
    } else {
        candidates = detail::all_asecs_brute_force(p);
    }
    return detail::assemble_covering(std::move(candidates), p.mdp.state_count());
}

// ---------------------------------------------------------------------------
// induced chains

/// Recurrent classes of the chain a memoryless policy induces, restricted to
/// the part reachable from the initial state. Each class is returned as a
/// simple EC; classes are pairwise disjoint.
inline std::vector<EndComponent> induced_chain_ecs(const Mdp& m, const MemorylessPolicy& p) {
    const int n = m.state_count();
    std::vector<char> reach(n, 0);
    std::queue<int> bfs;
    reach[m.initial] = 1;
    bfs.push(m.initial);
    std::vector<std::vector<int>> adj(n);
    while (!bfs.empty()) {
        const int s = bfs.front();
        bfs.pop();
        for (const auto& t : m.row(s, p.action[s])) {
            if (t.prob <= 0.0) continue;
            adj[s].push_back(t.to);
            if (!reach[t.to]) {
                reach[t.to] = 1;
                bfs.push(t.to);
            }
        }
    }
    std::vector<EndComponent> out;
    for (const auto& scc : strongly_connected_components(adj)) {
        if (!reach[scc.front()]) continue;
        bool exits = false;
        bool self = false;
        for (int v : scc)
            for (int w : adj[v]) {
                if (!std::binary_search(scc.begin(), scc.end(), w)) exits = true;
                if (w == v) self = true;
            }
        if (exits) continue;
        if (scc.size() == 1 && !self) continue; // unreachable in the chain sense
        EndComponent c;
        c.states = scc;
        for (int v : c.states) c.actions.push_back({p.action[v]});
        out.push_back(std::move(c));
    }
    std::sort(out.begin(), out.end(),
              [](const EndComponent& a, const EndComponent& b) { return a.states.front() < b.states.front(); });
    return out;
}

} // namespace dra2rm
