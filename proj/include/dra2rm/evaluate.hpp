#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <queue>
#include <stdexcept>
#include <utility>
#include <vector>

#include "dra2rm/components.hpp"
#include "dra2rm/linalg.hpp"
#include "dra2rm/model.hpp"
#include "dra2rm/product.hpp"

namespace dra2rm {

/// MDP with a transition reward tensor aligned with its sparse rows.
struct RewardedMdp {
    Mdp mdp;
    std::vector<std::vector<std::vector<double>>> reward;

    double reward_of(int s, int a, int to) const {
        const int ai = mdp.enabled_index(s, a);
        const auto& row = mdp.rows[s][ai];
        for (std::size_t k = 0; k < row.size(); ++k)
            if (row[k].to == to) return reward[s][ai][k];
        return 0.0;
    }
};

inline RewardedMdp as_rewarded(const RmProductMdp& p) { return {p.mdp, p.reward}; }

// ---------------------------------------------------------------------------
// reachability under a fixed policy

/// Probability of ever hitting `target` from each state in the chain induced
/// by `p`. States outside the backward closure of the target are pinned to 0,
/// target states to 1, and the rest solved by direct elimination.
inline std::vector<double> reach_probability(const Mdp& m, const MemorylessPolicy& p,
                                             const std::vector<int>& target) {
    const int n = m.state_count();
    std::vector<char> is_target(n, 0);
    for (int v : target) is_target[v] = 1;

    std::vector<std::vector<int>> radj(n);
    for (int s = 0; s < n; ++s)
        for (const auto& t : m.row(s, p.action[s]))
            if (t.prob > 0.0) radj[t.to].push_back(s);

    std::vector<char> pre(n, 0);
    std::queue<int> bfs;
    for (int v : target)
        if (!pre[v]) {
            pre[v] = 1;
            bfs.push(v);
        }
    while (!bfs.empty()) {
        const int v = bfs.front();
        bfs.pop();
        for (int w : radj[v])
            if (!pre[w]) {
                pre[w] = 1;
                bfs.push(w);
            }
    }

    std::vector<int> sys; // transient unknowns
    std::vector<int> pos(n, -1);
    for (int s = 0; s < n; ++s)
        if (pre[s] && !is_target[s]) {
            pos[s] = static_cast<int>(sys.size());
            sys.push_back(s);
        }

    std::vector<double> x(n, 0.0);
    for (int v : target) x[v] = 1.0;
    if (!sys.empty()) {
        const int k = static_cast<int>(sys.size());
        std::vector<double> a(static_cast<std::size_t>(k) * k, 0.0), b(k, 0.0);
        for (int i = 0; i < k; ++i) {
            a[static_cast<std::size_t>(i) * k + i] = 1.0;
            for (const auto& t : m.row(sys[i], p.action[sys[i]])) {
                if (t.prob <= 0.0) continue;
                if (is_target[t.to]) b[i] += t.prob;
                else if (pos[t.to] >= 0) a[static_cast<std::size_t>(i) * k + pos[t.to]] -= t.prob;
            }
        }
        if (!lu_solve_inplace(a, b, k))
            throw std::runtime_error("reachability system singular");
        for (int i = 0; i < k; ++i) x[sys[i]] = b[i];
    }
    return x;
}

// ---------------------------------------------------------------------------
// gain and bias of a recurrent class

/// Solves the gain/bias equations of a unichain class: anchor w_0 = 0, then
/// w_t + y = r_t + sum_j P(t,j) w_j with r_t the expected one-step reward.
/// Returns (y, w).
inline std::pair<double, std::vector<double>> gain_of_ec_expected(
    const Mdp& m, const MemorylessPolicy& p, const EndComponent& c,
    const std::vector<double>& expected_reward) {
    const int k = static_cast<int>(c.states.size());
    const int n = k + 1; // unknowns: w_0..w_{k-1}, y
    std::vector<double> a(static_cast<std::size_t>(n) * n, 0.0), b(n, 0.0);
    a[0] = 1.0; // w_0 = 0
    for (int t = 0; t < k; ++t) {
        const int row = t + 1;
        a[static_cast<std::size_t>(row) * n + t] += 1.0;
        a[static_cast<std::size_t>(row) * n + k] = 1.0;
        for (const auto& tr : m.row(c.states[t], p.action[c.states[t]])) {
            if (tr.prob <= 0.0) continue;
            const int j = c.index_of(tr.to);
            if (j < 0) throw std::invalid_argument("class is not closed under the policy");
            a[static_cast<std::size_t>(row) * n + j] -= tr.prob;
        }
        b[row] = expected_reward[t];
    }
    std::vector<double> sol = lu_solve(std::move(a), std::move(b), n);
    std::vector<double> w(sol.begin(), sol.begin() + k);
    return {sol[k], std::move(w)};
}

inline std::pair<double, std::vector<double>> gain_of_ec(
    const Mdp& m, const MemorylessPolicy& p, const EndComponent& c,
    const std::function<double(int, int, int)>& reward) {
    std::vector<double> r(c.states.size(), 0.0);
    for (std::size_t t = 0; t < c.states.size(); ++t) {
        const int s = c.states[t];
        for (const auto& tr : m.row(s, p.action[s]))
            if (tr.prob > 0.0) r[t] += tr.prob * reward(s, p.action[s], tr.to);
    }
    return gain_of_ec_expected(m, p, c, r);
}

// ---------------------------------------------------------------------------
// limit-average value of a policy

struct GainReport {
    std::vector<EndComponent> classes;
    std::vector<double> reach;             // x_i from the initial state
    std::vector<double> gain;              // y_i
    std::vector<std::vector<double>> bias; // w per class
    double total = 0.0;                    // sum x_i * y_i
};

inline GainReport limit_average(const Mdp& m,
                                const std::vector<std::vector<std::vector<double>>>& reward,
                                const MemorylessPolicy& p) {
    GainReport rep;
    rep.classes = induced_chain_ecs(m, p);
    for (const auto& c : rep.classes) {
        std::vector<double> r(c.states.size(), 0.0);
        for (std::size_t t = 0; t < c.states.size(); ++t) {
            const int s = c.states[t];
            const int ai = m.enabled_index(s, p.action[s]);
            const auto& row = m.rows[s][ai];
            for (std::size_t k = 0; k < row.size(); ++k)
                r[t] += row[k].prob * reward[s][ai][k];
        }
        auto [y, w] = gain_of_ec_expected(m, p, c, r);
        rep.gain.push_back(y);
        rep.bias.push_back(std::move(w));
        rep.reach.push_back(reach_probability(m, p, c.states)[m.initial]);
    }
    for (std::size_t i = 0; i < rep.classes.size(); ++i) rep.total += rep.reach[i] * rep.gain[i];
    return rep;
}

inline GainReport limit_average(const RewardedMdp& m, const MemorylessPolicy& p) {
    return limit_average(m.mdp, m.reward, p);
}

inline GainReport limit_average(const RmProductMdp& m, const MemorylessPolicy& p) {
    return limit_average(m.mdp, m.reward, p);
}

// ---------------------------------------------------------------------------
// acceptance probability of a policy

/// Probability that a run under a finite-memory policy is accepted by the
/// DRA: build the joint (state, memory, automaton) chain, classify its
/// recurrent classes with the Rabin condition, and add up the absorption
/// probabilities of the accepting ones.
inline double acceptance_probability(const Mdp& m, const Dra& d, const FiniteMemoryPolicy& fp) {
    struct Key {
        int s, mem, q;
    };
    const int nm = fp.memory_count, nq = d.state_count();
    auto pack = [&](int s, int mem, int q) { return (s * nm + mem) * nq + q; };

    std::vector<int> id(static_cast<std::size_t>(m.state_count()) * nm * nq, -1);
    std::vector<Key> states;
    std::queue<int> bfs;
    auto intern = [&](int s, int mem, int q) {
        int& slot = id[pack(s, mem, q)];
        if (slot < 0) {
            slot = static_cast<int>(states.size());
            states.push_back({s, mem, q});
            bfs.push(slot);
        }
        return slot;
    };
    intern(m.initial, fp.memory_initial, d.initial);

    std::vector<std::vector<Outcome>> rows;
    while (!bfs.empty()) {
        const int v = bfs.front();
        bfs.pop();
        const Key k = states[v];
        const int a = fp.choice[k.s][k.mem];
        std::vector<Outcome> row;
        for (const auto& t : m.row(k.s, a)) {
            if (t.prob <= 0.0) continue;
            const int e = m.edge_id(k.s, a, t.to);
            row.push_back({intern(t.to, fp.memory_next[k.mem][e], d.delta[k.q][m.label(k.s, a, t.to)]),
                           t.prob});
        }
        if (static_cast<int>(rows.size()) <= v) rows.resize(v + 1);
        rows[v] = std::move(row);
    }
    rows.resize(states.size());

    const int n = static_cast<int>(states.size());
    std::vector<std::vector<int>> adj(n);
    for (int v = 0; v < n; ++v)
        for (const auto& t : rows[v]) adj[v].push_back(t.to);
    const auto sccs = strongly_connected_components(adj);

    std::vector<int> accepting_states;
    for (const auto& scc : sccs) {
        bool exits = false;
        for (int v : scc)
            for (int w : adj[v])
                if (!std::binary_search(scc.begin(), scc.end(), w)) exits = true;
        if (exits) continue;
        std::vector<char> inf_q(nq, 0);
        for (int v : scc) inf_q[states[v].q] = 1;
        for (const auto& pair : d.pairs) {
            bool hit = false, banned = false;
            for (int q : pair.acc)
                if (inf_q[q]) hit = true;
            for (int q : pair.rej)
                if (inf_q[q]) banned = true;
            if (hit && !banned) {
                for (int v : scc) accepting_states.push_back(v);
                break;
            }
        }
    }
    if (accepting_states.empty()) return 0.0;

    // absorption probability from the joint initial state
    Mdp chain;
    chain.initial = 0;
    chain.state_names.resize(n);
    chain.action_names = {"-"};
    chain.enabled.assign(n, {0});
    chain.rows.resize(n);
    for (int v = 0; v < n; ++v) chain.rows[v] = {rows[v]};
    chain.finalize();
    MemorylessPolicy chain_policy{std::vector<int>(n, 0)};
    return reach_probability(chain, chain_policy, accepting_states)[0];
}

/// Acceptance probability of a memoryless policy on the DRA product.
inline double acceptance_probability(const ProductMdp& prod, const MemorylessPolicy& p) {
    std::vector<int> accepting_states;
    for (const auto& c : induced_chain_ecs(prod.mdp, p))
        if (is_accepting(c, prod.pairs).first)
            for (int v : c.states) accepting_states.push_back(v);
    if (accepting_states.empty()) return 0.0;
    return reach_probability(prod.mdp, p, accepting_states)[prod.mdp.initial];
}

// ---------------------------------------------------------------------------
// discounted values

inline std::vector<double> discounted_value(const Mdp& m,
                                            const std::vector<std::vector<std::vector<double>>>& reward,
                                            const MemorylessPolicy& p, double gamma) {
    if (!(gamma > 0.0 && gamma < 1.0)) throw std::invalid_argument("gamma must be in (0,1)");
    const int n = m.state_count();
    std::vector<double> a(static_cast<std::size_t>(n) * n, 0.0), b(n, 0.0);
    for (int s = 0; s < n; ++s) {
        a[static_cast<std::size_t>(s) * n + s] = 1.0;
        const int ai = m.enabled_index(s, p.action[s]);
        const auto& row = m.rows[s][ai];
        for (std::size_t k = 0; k < row.size(); ++k) {
            a[static_cast<std::size_t>(s) * n + row[k].to] -= gamma * row[k].prob;
            b[s] += row[k].prob * reward[s][ai][k];
        }
    }
    return lu_solve(std::move(a), std::move(b), n);
}

inline std::vector<double> discounted_value(const RewardedMdp& m, const MemorylessPolicy& p,
                                            double gamma) {
    return discounted_value(m.mdp, m.reward, p, gamma);
}

/// Value iteration to sup-norm residual eps*(1-gamma)/(2*gamma), then the
/// greedy policy; the standard stopping rule makes it eps-optimal.
inline MemorylessPolicy optimal_discounted(const Mdp& m,
                                           const std::vector<std::vector<std::vector<double>>>& reward,
                                           double gamma, double eps) {
    if (!(gamma > 0.0 && gamma < 1.0)) throw std::invalid_argument("gamma must be in (0,1)");
    if (!(eps > 0.0)) throw std::invalid_argument("eps must be positive");
    const int n = m.state_count();
    const double stop = eps * (1.0 - gamma) / (2.0 * gamma);
    std::vector<double> v(n, 0.0), next(n, 0.0);
    while (true) {
        double residual = 0.0;
        for (int s = 0; s < n; ++s) {
            double best = -std::numeric_limits<double>::infinity();
            for (std::size_t ai = 0; ai < m.enabled[s].size(); ++ai) {
                double q = 0.0;
                const auto& row = m.rows[s][ai];
                for (std::size_t k = 0; k < row.size(); ++k)
                    q += row[k].prob * (reward[s][ai][k] + gamma * v[row[k].to]);
                if (q > best) best = q;
            }
            next[s] = best;
            residual = std::max(residual, std::fabs(next[s] - v[s]));
        }
        v.swap(next);
        if (residual <= stop) break;
    }
    MemorylessPolicy p;
    p.action.resize(n);
    for (int s = 0; s < n; ++s) {
        double best = -std::numeric_limits<double>::infinity();
        int best_a = m.enabled[s][0];
        for (std::size_t ai = 0; ai < m.enabled[s].size(); ++ai) {
            double q = 0.0;
            const auto& row = m.rows[s][ai];
            for (std::size_t k = 0; k < row.size(); ++k)
                q += row[k].prob * (reward[s][ai][k] + gamma * v[row[k].to]);
            if (q > best + 1e-12) {
                best = q;
                best_a = m.enabled[s][ai];
            }
        }
        p.action[s] = best_a;
    }
    return p;
}

inline MemorylessPolicy optimal_discounted(const RewardedMdp& m, double gamma, double eps) {
    return optimal_discounted(m.mdp, m.reward, gamma, eps);
}

// ---------------------------------------------------------------------------
// brute-force limit-average oracle

struct OracleResult {
    double optimal_gain = 0.0;
    std::vector<MemorylessPolicy> optimal_set; // every optimal behavior, as a total table
    long enumerated = 0;
};

namespace detail {

// Enumerates deterministic memoryless policies by distinct reachable
// behavior: choices are assigned only at states discovered under the partial
// assignment, in discovery order. Two tables with the same reachable
// behavior have the same gain, so this is exhaustive for value and argmax
// purposes while skipping redundant off-path permutations.
template <typename Eval>
inline long enumerate_behaviors(const Mdp& m, long cap, Eval&& eval) {
    std::vector<int> order{m.initial};
    std::vector<int> choice; // enabled-index per discovered state, aligned with order
    std::vector<int> seen_at(m.state_count(), -1);
    seen_at[m.initial] = 0;
    long count = 0;

    std::function<void(std::size_t)> walk = [&](std::size_t depth) {
        if (depth == order.size()) {
            if (++count > cap) throw cap_exceeded_error("policy enumeration cap exceeded");
            MemorylessPolicy p;
            p.action.assign(m.state_count(), -1);
            for (std::size_t i = 0; i < order.size(); ++i)
                p.action[order[i]] = m.enabled[order[i]][choice[i]];
            for (int s = 0; s < m.state_count(); ++s)
                if (p.action[s] < 0) p.action[s] = m.enabled[s][0];
            eval(p);
            return;
        }
        const int s = order[depth];
        for (std::size_t ai = 0; ai < m.enabled[s].size(); ++ai) {
            choice.push_back(static_cast<int>(ai));
            const std::size_t rollback = order.size();
            for (const auto& t : m.rows[s][ai])
                if (t.prob > 0.0 && seen_at[t.to] < 0) {
                    seen_at[t.to] = static_cast<int>(order.size());
                    order.push_back(t.to);
                }
            walk(depth + 1);
            for (std::size_t i = rollback; i < order.size(); ++i) seen_at[order[i]] = -1;
            order.resize(rollback);
            choice.pop_back();
        }
    };
    walk(0);
    return count;
}

} // namespace detail

inline OracleResult brute_force_optimal_average(
    const Mdp& m, const std::vector<std::vector<std::vector<double>>>& reward,
    long max_policies = 1'000'000) {
    double guard = 1.0;
    for (int s = 0; s < m.state_count(); ++s) {
        guard *= static_cast<double>(m.enabled[s].size());
        if (guard > static_cast<double>(max_policies)) break;
    }
    if (guard > static_cast<double>(max_policies))
        throw cap_exceeded_error("policy enumeration cap exceeded");

    OracleResult res;
    res.optimal_gain = -std::numeric_limits<double>::infinity();
    res.enumerated = detail::enumerate_behaviors(m, max_policies, [&](const MemorylessPolicy& p) {
        const double j = limit_average(m, reward, p).total;
        if (j > res.optimal_gain + 1e-9) {
            res.optimal_gain = j;
            res.optimal_set.clear();
            res.optimal_set.push_back(p);
        } else if (j >= res.optimal_gain - 1e-9) {
            res.optimal_gain = std::max(res.optimal_gain, j);
            res.optimal_set.push_back(p);
        }
    });
    return res;
}

inline OracleResult brute_force_optimal_average(const RewardedMdp& m, long max_policies = 1'000'000) {
    return brute_force_optimal_average(m.mdp, m.reward, max_policies);
}

inline OracleResult brute_force_optimal_average(const RmProductMdp& m, long max_policies = 1'000'000) {
    return brute_force_optimal_average(m.mdp, m.reward, max_policies);
}

// ---------------------------------------------------------------------------
// mixing times

/// Ergodic eps-mixing time of an irreducible chain: lazify to (M+I)/2, find
/// the stationary distribution, and count steps until the worst-start total
/// variation distance drops to eps.
inline long ergodic_mixing_time(const std::vector<std::vector<double>>& chain, double eps,
                                long cap = 1'000'000) {
    const int n = static_cast<int>(chain.size());
    {
        std::vector<std::vector<int>> adj(n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                if (chain[i][j] > 0.0) adj[i].push_back(j);
        if (strongly_connected_components(adj).size() != 1)
            throw std::invalid_argument("chain is not irreducible");
    }

    std::vector<double> lazy(static_cast<std::size_t>(n) * n, 0.0);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) lazy[static_cast<std::size_t>(i) * n + j] = 0.5 * chain[i][j];
        lazy[static_cast<std::size_t>(i) * n + i] += 0.5;
    }

    // stationary distribution: pi (M - I) = 0 with sum(pi) = 1
    std::vector<double> a(static_cast<std::size_t>(n) * n, 0.0), b(n, 0.0);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            a[static_cast<std::size_t>(i) * n + j] = lazy[static_cast<std::size_t>(j) * n + i] - (i == j ? 1.0 : 0.0);
    for (int j = 0; j < n; ++j) a[static_cast<std::size_t>(n - 1) * n + j] = 1.0;
    b[n - 1] = 1.0;
    const std::vector<double> pi = lu_solve(std::move(a), std::move(b), n);

    std::vector<double> pw(static_cast<std::size_t>(n) * n, 0.0);
    for (int i = 0; i < n; ++i) pw[static_cast<std::size_t>(i) * n + i] = 1.0; // t = 0
    for (long t = 0; t <= cap; ++t) {
        double d = 0.0;
        for (int i = 0; i < n; ++i) {
            double tv = 0.0;
            for (int j = 0; j < n; ++j) tv += std::fabs(pw[static_cast<std::size_t>(i) * n + j] - pi[j]);
            d = std::max(d, 0.5 * tv);
        }
        if (d <= eps) return t;
        pw = mat_mul(pw, lazy, n);
    }
    throw cap_exceeded_error("mixing time cap exceeded");
}

namespace detail {

// Absorption values of a finite chain. Entries of `values` that are >= 0 pin
// a state (absorbing boundary); every other state gets the expected pinned
// value at absorption. Recurrent classes without pinned states score 0.
// Solved exactly block by block along the SCC condensation, which Tarjan
// emits sinks-first, so each block sees finished downstream values.
inline void chain_absorption(const std::vector<std::vector<Outcome>>& rows,
                             std::vector<std::vector<double>>& values) {
    const int n = static_cast<int>(rows.size());
    std::vector<std::vector<int>> adj(n);
    for (int v = 0; v < n; ++v)
        for (const auto& t : rows[v])
            if (t.prob > 0.0) adj[v].push_back(t.to);
    const auto sccs = strongly_connected_components(adj);
    std::vector<int> comp(n, -1);
    std::vector<int> pos_(n, -1);
    {
        int i = 0;
        for (const auto& scc : sccs) {
            for (int v : scc) comp[v] = i;
            ++i;
        }
    }
    for (const auto& scc : sccs) {
        std::vector<int> open; // not pinned
        for (int v : scc)
            if (values[0][v] < 0.0) open.push_back(v);
        if (open.empty()) continue;
        bool leaves = false;
        for (int v : open)
            for (const auto& t : rows[v])
                if (comp[t.to] != comp[v] || values[0][t.to] >= 0.0) leaves = true;
        if (!leaves) { // recurrent, no boundary reachable
            for (auto& val : values)
                for (int v : open) val[v] = 0.0;
            continue;
        }
        const int k = static_cast<int>(open.size());
        for (int i = 0; i < k; ++i) pos_[open[i]] = i;
        for (auto& val : values) {
            std::vector<double> a(static_cast<std::size_t>(k) * k, 0.0), b(k, 0.0);
            for (int i = 0; i < k; ++i) {
                a[static_cast<std::size_t>(i) * k + i] = 1.0;
                for (const auto& t : rows[open[i]]) {
                    if (t.prob <= 0.0) continue;
                    if (pos_[t.to] >= 0)
                        a[static_cast<std::size_t>(i) * k + pos_[t.to]] -= t.prob;
                    else // pinned, or an earlier (downstream) block
                        b[i] += t.prob * val[t.to];
                }
            }
            if (!lu_solve_inplace(a, b, k))
                throw std::runtime_error("absorption system singular");
            for (int i = 0; i < k; ++i) val[open[i]] = b[i];
        }
        for (int v : open) pos_[v] = -1;
    }
}

} // namespace detail

// ---------------------------------------------------------------------------
// maximal reachability (exact)

/// Maximal probability of reaching `target`, over all policies, per state.
/// Maximal end components are collapsed first (the quotient has no end
/// components left, so policy iteration with exact evaluation and
/// strict-improvement switching terminates at the optimum).
inline std::vector<double> max_reach_probability(const Mdp& m, const std::vector<int>& target) {
    const int n = m.state_count();
    std::vector<char> is_target(n, 0);
    for (int v : target) is_target[v] = 1;

    const auto mecs = mec_decomposition(m);
    std::vector<int> node_of(n, -1);
    int nodes = 0;
    std::vector<char> node_target;
    for (const auto& c : mecs) {
        bool hit = false;
        for (int v : c.states) {
            node_of[v] = nodes;
            if (is_target[v]) hit = true;
        }
        node_target.push_back(hit ? 1 : 0);
        ++nodes;
    }
    for (int s = 0; s < n; ++s)
        if (node_of[s] < 0) {
            node_of[s] = nodes++;
            node_target.push_back(is_target[s] ? 1 : 0);
        }

    // moves per node: (state, action) pairs; MEC nodes only keep leaving pairs
    std::vector<std::vector<std::pair<int, int>>> moves(nodes);
    std::vector<char> in_mec(n, 0);
    for (const auto& c : mecs)
        for (std::size_t i = 0; i < c.states.size(); ++i) in_mec[c.states[i]] = 1;
    for (int s = 0; s < n; ++s) {
        const int nd = node_of[s];
        if (node_target[nd]) continue; // absorbing
        for (int a : m.enabled[s]) {
            bool leaves = !in_mec[s];
            if (in_mec[s])
                for (const auto& t : m.row(s, a))
                    if (t.prob > 0.0 && node_of[t.to] != nd) leaves = true;
            if (leaves) moves[nd].emplace_back(s, a);
        }
    }

    std::vector<int> sigma(nodes, -1);
    for (int v = 0; v < nodes; ++v)
        if (!node_target[v] && !moves[v].empty()) sigma[v] = 0;

    auto evaluate = [&](const std::vector<int>& pol) {
        // chain over nodes; target pins at 1, dead nodes at 0
        std::vector<std::vector<Outcome>> rows(nodes);
        std::vector<std::vector<double>> values(1, std::vector<double>(nodes, -1.0));
        std::vector<double> mass(nodes, 0.0);
        for (int v = 0; v < nodes; ++v) {
            if (node_target[v]) {
                values[0][v] = 1.0;
                continue;
            }
            if (pol[v] < 0) {
                values[0][v] = 0.0;
                continue;
            }
            const auto [s, a] = moves[v][pol[v]];
            for (const auto& t : m.row(s, a))
                if (t.prob > 0.0) mass[node_of[t.to]] += t.prob;
            for (int w = 0; w < nodes; ++w)
                if (mass[w] > 0.0) {
                    rows[v].push_back({w, mass[w]});
                    mass[w] = 0.0;
                }
        }
        detail::chain_absorption(rows, values);
        return values[0];
    };

    std::vector<double> value = evaluate(sigma);
    while (true) {
        bool improved = false;
        for (int v = 0; v < nodes; ++v) {
            if (node_target[v] || moves[v].empty()) continue;
            double best_q = value[v] + 1e-12;
            int best_mi = -1;
            for (std::size_t mi = 0; mi < moves[v].size(); ++mi) {
                const auto [s, a] = moves[v][mi];
                double q = 0.0;
                for (const auto& t : m.row(s, a))
                    if (t.prob > 0.0) q += t.prob * value[node_of[t.to]];
                if (q > best_q) {
                    best_q = q;
                    best_mi = static_cast<int>(mi);
                }
            }
            if (best_mi >= 0) {
                sigma[v] = best_mi;
                improved = true;
            }
        }
        if (!improved) break;
        value = evaluate(sigma);
    }

    std::vector<double> out(n, 0.0);
    for (int s = 0; s < n; ++s) out[s] = value[node_of[s]];
    return out;
}

/// Maximal acceptance probability on a DRA product: maximal probability of
/// reaching a state of some maximal accepting EC.
inline double max_acceptance_probability(const ProductMdp& p) {
    std::vector<char> mark(p.mdp.state_count(), 0);
    for (const auto& [aec, pair_idx] : maximal_accepting_ecs(p)) {
        (void)pair_idx;
        for (int v : aec.states) mark[v] = 1;
    }
    std::vector<int> target;
    for (int v = 0; v < p.mdp.state_count(); ++v)
        if (mark[v]) target.push_back(v);
    if (target.empty()) return 0.0;
    return max_reach_probability(p.mdp, target)[p.mdp.initial];
}

} // namespace dra2rm
