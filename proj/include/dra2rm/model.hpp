#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <queue>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace dra2rm {

constexpr double kStochasticTol = 1e-9;
constexpr int kMaxAtomicPropositions = 16;

// Label sets are bitmasks over the instance's ordered AP list.
using Label = std::uint32_t;

// Raised when an enumeration or materialization guard trips. The CLI maps it
// to its own exit code so callers can tell "too big" from "wrong".
struct cap_exceeded_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ValidationIssue {
    std::string kind;
    std::string where;
};

struct ValidationReport {
    std::vector<ValidationIssue> issues;
    bool ok() const { return issues.empty(); }
    void add(std::string kind, std::string where) {
        issues.push_back({std::move(kind), std::move(where)});
    }
    bool has(const std::string& kind) const {
        for (const auto& i : issues)
            if (i.kind == kind) return true;
        return false;
    }
};

struct Outcome {
    int to = 0;
    double prob = 0.0;
};

// Base transition (s, a, s') with a drawn from the global action list.
struct EdgeRef {
    int from = 0;
    int action = 0;
    int to = 0;
    bool operator==(const EdgeRef& o) const {
        return from == o.from && action == o.action && to == o.to;
    }
};

/// Finite MDP with per-state enabled actions, sparse stochastic rows and a
/// transition label function. An action/state pair that is not enabled is a
/// domain error, not a zero-probability row.
///
/// The "edge domain" is the ordered list of all syntactically possible
/// transitions (s, a, s') with a enabled at s; reward machines and policy
/// memory updates are tabulated over it. Call finalize() after mutating the
/// structure so edge ids stay consistent.
struct Mdp {
    int initial = 0;
    std::vector<std::string> state_names;
    std::vector<std::string> action_names;
    std::vector<std::string> ap;
    std::vector<std::vector<int>> enabled;              // ascending action ids per state
    std::vector<std::vector<std::vector<Outcome>>> rows; // rows[s][ai], aligned with enabled[s]

    int state_count() const { return static_cast<int>(state_names.size()); }
    int action_count() const { return static_cast<int>(action_names.size()); }

    int enabled_index(int s, int a) const {
        const auto& e = enabled[s];
        auto it = std::lower_bound(e.begin(), e.end(), a);
        if (it == e.end() || *it != a) return -1;
        return static_cast<int>(it - e.begin());
    }
    bool is_enabled(int s, int a) const { return enabled_index(s, a) >= 0; }

    const std::vector<Outcome>& row(int s, int a) const {
        const int ai = enabled_index(s, a);
        if (ai < 0) throw std::out_of_range("action not enabled at state");
        return rows[s][ai];
    }

    double prob(int s, int a, int to) const {
        for (const auto& t : row(s, a))
            if (t.to == to) return t.prob;
        return 0.0;
    }

    void set_label(int s, int a, int to, Label l) {
        labels_[pack(s, a, to)] = l;
    }
    bool label_declared(int s, int a, int to) const {
        return labels_.count(pack(s, a, to)) > 0;
    }
    Label label(int s, int a, int to) const {
        auto it = labels_.find(pack(s, a, to));
        return it == labels_.end() ? 0u : it->second;
    }
    const std::unordered_map<std::int64_t, Label>& declared_labels() const { return labels_; }

    // -- edge domain ---------------------------------------------------------

    void finalize() {
        edge_base_.assign(state_names.size() + 1, 0);
        for (int s = 0; s < state_count(); ++s)
            edge_base_[s + 1] = edge_base_[s] + static_cast<int>(enabled[s].size()) * state_count();
    }
    bool finalized() const { return edge_base_.size() == state_names.size() + 1; }

    int edge_count() const { return edge_base_.back(); }

    int edge_id(int s, int a, int to) const {
        const int ai = enabled_index(s, a);
        if (ai < 0) return -1;
        return edge_base_[s] + ai * state_count() + to;
    }

    EdgeRef edge(int id) const {
        const int s = static_cast<int>(
            std::upper_bound(edge_base_.begin(), edge_base_.end(), id) - edge_base_.begin() - 1);
        const int rem = id - edge_base_[s];
        return {s, enabled[s][rem / state_count()], rem % state_count()};
    }

  private:
    static std::int64_t pack(int s, int a, int to) {
        return (static_cast<std::int64_t>(s) << 40) | (static_cast<std::int64_t>(a) << 20) | to;
    }
    std::unordered_map<std::int64_t, Label> labels_;
    std::vector<int> edge_base_;
};

struct RabinPair {
    std::vector<int> acc; // A_i
    std::vector<int> rej; // R_i
};

/// Deterministic Rabin automaton over the alphabet 2^AP (letters are Label
/// bitmasks). delta must be total: delta[q][letter] for every letter below
/// 1 << ap_count.
struct Dra {
    int initial = 0;
    int ap_count = 0;
    std::vector<std::string> state_names;
    std::vector<std::vector<int>> delta; // -1 marks a gap (invalid automaton)
    std::vector<RabinPair> pairs;

    int state_count() const { return static_cast<int>(state_names.size()); }
    int letter_count() const { return 1 << ap_count; }

    int step(int q, Label letter) const {
        const int q2 = delta[q][letter];
        if (q2 < 0) throw std::out_of_range("DRA transition not defined");
        return q2;
    }
};

/// Finite-state reward transducer over the base MDP's edge domain. update and
/// reward are total tables; rewards are normalized to [0,1].
struct RewardMachine {
    int initial = 0;
    std::vector<std::string> state_names;
    std::vector<std::vector<int>> update;    // [u][edge_id] -> u'
    std::vector<std::vector<double>> reward; // [u][edge_id]

    int state_count() const { return static_cast<int>(state_names.size()); }
};

/// Deterministic memoryless policy: one enabled action per state of whatever
/// MDP it was built against.
struct MemorylessPolicy {
    std::vector<int> action;
};

/// Deterministic finite-memory policy on a base MDP. The memory automaton
/// steps on base transitions, which covers both DRA-tracking memory
/// (m' = delta(m, label(e))) and reward-machine memory (m' = update(m, e)).
struct FiniteMemoryPolicy {
    int memory_count = 0;
    int memory_initial = 0;
    std::vector<std::vector<int>> choice;      // [s][m] -> action id
    std::vector<std::vector<int>> memory_next; // [m][edge_id] -> m'
};

/// Finite presentation of an infinite word prefix . cycle^omega.
struct UltimatelyPeriodicWord {
    std::vector<Label> prefix;
    std::vector<Label> cycle;
};

// ---------------------------------------------------------------------------
// validation

inline ValidationReport validate_mdp(const Mdp& m) {
    ValidationReport rep;
    if (static_cast<int>(m.ap.size()) > kMaxAtomicPropositions)
        rep.add("too many atomic propositions", "");
    const Label ap_mask = (1u << std::min<std::size_t>(m.ap.size(), kMaxAtomicPropositions)) - 1u;
    if (m.initial < 0 || m.initial >= m.state_count()) rep.add("initial out of range", "");
    for (int s = 0; s < m.state_count(); ++s) {
        if (m.enabled[s].empty()) rep.add("no enabled action", m.state_names[s]);
        for (std::size_t ai = 0; ai < m.enabled[s].size(); ++ai) {
            double sum = 0.0;
            bool bad_entry = false;
            for (const auto& t : m.rows[s][ai]) {
                sum += t.prob;
                if (t.prob < 0.0 || t.prob > 1.0 + kStochasticTol) bad_entry = true;
                if (t.to < 0 || t.to >= m.state_count()) bad_entry = true;
            }
            const std::string where =
                m.state_names[s] + "," + m.action_names[m.enabled[s][ai]];
            if (bad_entry) rep.add("probability out of range", where);
            if (std::fabs(sum - 1.0) > kStochasticTol) rep.add("row-sum", where);
        }
    }
    for (const auto& [key, label] : m.declared_labels()) {
        (void)key;
        if ((label & ~ap_mask) != 0) rep.add("label outside alphabet", "");
    }
    return rep;
}

inline ValidationReport validate_dra(const Dra& d, int ap_count) {
    ValidationReport rep;
    if (d.ap_count != ap_count) rep.add("alphabet mismatch", "");
    if (d.initial < 0 || d.initial >= d.state_count()) rep.add("initial out of range", "");
    const int letters = 1 << ap_count;
    for (int q = 0; q < d.state_count(); ++q) {
        if (static_cast<int>(d.delta[q].size()) != letters) {
            rep.add("partial delta", d.state_names[q]);
            continue;
        }
        for (int l = 0; l < letters; ++l) {
            const int q2 = d.delta[q][l];
            if (q2 < 0) rep.add("partial delta", d.state_names[q]);
            else if (q2 >= d.state_count()) rep.add("delta out of range", d.state_names[q]);
        }
    }
    for (std::size_t i = 0; i < d.pairs.size(); ++i) {
        for (int q : d.pairs[i].acc)
            if (q < 0 || q >= d.state_count()) rep.add("pair out of range", "pair " + std::to_string(i));
        for (int q : d.pairs[i].rej)
            if (q < 0 || q >= d.state_count()) rep.add("pair out of range", "pair " + std::to_string(i));
    }
    return rep;
}

inline ValidationReport validate_rm(const RewardMachine& r, const Mdp& m) {
    ValidationReport rep;
    const int e = m.edge_count();
    if (r.initial < 0 || r.initial >= r.state_count()) rep.add("initial out of range", "");
    for (int u = 0; u < r.state_count(); ++u) {
        if (static_cast<int>(r.update[u].size()) != e ||
            static_cast<int>(r.reward[u].size()) != e) {
            rep.add("update/reward not total", r.state_names[u]);
            continue;
        }
        for (int i = 0; i < e; ++i) {
            if (r.update[u][i] < 0 || r.update[u][i] >= r.state_count())
                rep.add("update out of range", r.state_names[u]);
            if (r.reward[u][i] < 0.0 || r.reward[u][i] > 1.0)
                rep.add("reward outside [0,1]", r.state_names[u]);
        }
    }
    return rep;
}

inline ValidationReport validate_policy(const MemorylessPolicy& p, const Mdp& m) {
    ValidationReport rep;
    if (static_cast<int>(p.action.size()) != m.state_count()) {
        rep.add("policy not total", "");
        return rep;
    }
    for (int s = 0; s < m.state_count(); ++s)
        if (!m.is_enabled(s, p.action[s])) rep.add("action not enabled", m.state_names[s]);
    return rep;
}

// ---------------------------------------------------------------------------
// stepping semantics

/// Runs the DRA on prefix . cycle^omega and checks the Rabin condition on the
/// states visited infinitely often (the loop the cycle eventually closes).
inline bool dra_accepts(const Dra& d, const UltimatelyPeriodicWord& w) {
    if (w.cycle.empty()) throw std::invalid_argument("cycle must be nonempty");
    int q = d.initial;
    for (Label l : w.prefix) q = d.step(q, l);

    const int n = static_cast<int>(w.cycle.size());
    // (state, cycle position) pairs repeat after at most |Q| * n steps
    std::map<std::pair<int, int>, int> seen;
    std::vector<int> trace;
    int pos = 0;
    int step_idx = 0;
    while (true) {
        auto key = std::make_pair(q, pos);
        auto it = seen.find(key);
        if (it != seen.end()) {
            std::vector<bool> inf(d.state_count(), false);
            for (std::size_t t = static_cast<std::size_t>(it->second); t < trace.size(); ++t)
                inf[trace[t]] = true;
            for (const auto& pair : d.pairs) {
                bool hit = false, banned = false;
                for (int a : pair.acc)
                    if (inf[a]) hit = true;
                for (int r : pair.rej)
                    if (inf[r]) banned = true;
                if (hit && !banned) return true;
            }
            return false;
        }
        seen.emplace(key, step_idx);
        trace.push_back(q);
        q = d.step(q, w.cycle[pos]);
        pos = (pos + 1) % n;
        ++step_idx;
    }
}

/// One transducer step: (update(u, e), reward(u, e)).
inline std::pair<int, double> rm_step(const RewardMachine& r, const Mdp& m, int u, int s, int a,
                                      int to) {
    const int e = m.edge_id(s, a, to);
    if (e < 0) throw std::out_of_range("transition not in domain");
    if (u < 0 || u >= r.state_count()) throw std::out_of_range("reward machine state out of range");
    return {r.update[u][e], r.reward[u][e]};
}

// ---------------------------------------------------------------------------
// reward machine utilities

/// Drops states unreachable from the initial state via the edge domain.
inline RewardMachine rm_prune_unreachable(const RewardMachine& r, const Mdp& m) {
    const int e = m.edge_count();
    std::vector<int> remap(r.state_count(), -1);
    std::vector<int> order;
    std::queue<int> bfs;
    remap[r.initial] = 0;
    order.push_back(r.initial);
    bfs.push(r.initial);
    while (!bfs.empty()) {
        const int u = bfs.front();
        bfs.pop();
        for (int i = 0; i < e; ++i) {
            const int v = r.update[u][i];
            if (remap[v] < 0) {
                remap[v] = static_cast<int>(order.size());
                order.push_back(v);
                bfs.push(v);
            }
        }
    }
    RewardMachine out;
    out.initial = 0;
    for (int u : order) {
        out.state_names.push_back(r.state_names[u]);
        std::vector<int> up(r.update[u]);
        for (int& v : up) v = remap[v];
        out.update.push_back(std::move(up));
        out.reward.push_back(r.reward[u]);
    }
    return out;
}

/// True when the reachable parts of the two machines are identical up to a
/// renaming of states (lockstep walk over the edge domain).
inline bool rm_isomorphic(const RewardMachine& lhs, const RewardMachine& rhs, const Mdp& m,
                          double reward_tol = 0.0) {
    const RewardMachine a = rm_prune_unreachable(lhs, m);
    const RewardMachine b = rm_prune_unreachable(rhs, m);
    if (a.state_count() != b.state_count()) return false;
    const int e = m.edge_count();
    std::vector<int> match(a.state_count(), -1);
    std::vector<bool> used(b.state_count(), false);
    match[a.initial] = b.initial;
    used[b.initial] = true;
    std::queue<int> bfs;
    bfs.push(a.initial);
    while (!bfs.empty()) {
        const int u = bfs.front();
        bfs.pop();
        const int v = match[u];
        for (int i = 0; i < e; ++i) {
            if (std::fabs(a.reward[u][i] - b.reward[v][i]) > reward_tol) return false;
            const int u2 = a.update[u][i];
            const int v2 = b.update[v][i];
            if (match[u2] < 0) {
                if (used[v2]) return false;
                match[u2] = v2;
                used[v2] = true;
                bfs.push(u2);
            } else if (match[u2] != v2) {
                return false;
            }
        }
    }
    return true;
}

} // namespace dra2rm
