#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <queue>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "dra2rm/components.hpp"
#include "dra2rm/evaluate.hpp"
#include "dra2rm/model.hpp"
#include "dra2rm/product.hpp"
#include "dra2rm/rng.hpp"

namespace dra2rm {

/// Set of base transitions known to have positive probability, kept as a
/// mask over the MDP's edge domain.
struct SupportSet {
    std::vector<char> edge_mask;

    bool contains(int edge_id) const { return edge_id >= 0 && edge_mask[edge_id]; }
    int count() const {
        int n = 0;
        for (char c : edge_mask) n += c;
        return n;
    }

    static SupportSet from_probs(const Mdp& m) {
        SupportSet s;
        s.edge_mask.assign(m.edge_count(), 0);
        for (int st = 0; st < m.state_count(); ++st)
            for (std::size_t ai = 0; ai < m.enabled[st].size(); ++ai)
                for (const auto& t : m.rows[st][ai])
                    if (t.prob > 0.0) s.edge_mask[m.edge_id(st, m.enabled[st][ai], t.to)] = 1;
        return s;
    }

    static SupportSet full(const Mdp& m) {
        SupportSet s;
        s.edge_mask.assign(m.edge_count(), 1);
        return s;
    }
};

namespace detail {

// Exhaustive S x Q product of a support graph: transition magnitudes are
// irrelevant for end components, so support successors get uniform mass.
// `has_edge(q, base_edge_id)` decides which product edges exist.
inline ProductMdp support_graph_product(const Mdp& m, const Dra& d,
                                        const std::function<bool(int, int)>& has_edge) {
    ProductMdp p;
    p.base_states = m.state_count();
    p.dra_states = d.state_count();
    const int nq = d.state_count();
    const int n = m.state_count() * nq;
    p.back.reserve(n);
    for (int s = 0; s < m.state_count(); ++s)
        for (int q = 0; q < nq; ++q) p.back.emplace_back(s, q);

    p.mdp.initial = m.initial * nq + d.initial;
    p.mdp.action_names = m.action_names;
    p.mdp.ap = m.ap;
    p.mdp.state_names.resize(n);
    p.mdp.enabled.resize(n);
    p.mdp.rows.resize(n);
    for (int v = 0; v < n; ++v) {
        const auto [s, q] = p.back[v];
        p.mdp.state_names[v] = m.state_names[s] + "@" + d.state_names[q];
        for (int a : m.enabled[s]) {
            std::vector<Outcome> row;
            for (int to = 0; to < m.state_count(); ++to)
                if (has_edge(q, m.edge_id(s, a, to)))
                    row.push_back({to * nq + d.delta[q][m.label(s, a, to)], 0.0});
            if (row.empty()) continue;
            for (auto& t : row) t.prob = 1.0 / static_cast<double>(row.size());
            p.mdp.enabled[v].push_back(a);
            p.mdp.rows[v].push_back(std::move(row));
        }
    }
    p.mdp.finalize();

    p.pairs.resize(d.pairs.size());
    for (std::size_t i = 0; i < d.pairs.size(); ++i) {
        p.pairs[i].acc.assign(n, 0);
        p.pairs[i].rej.assign(n, 0);
        for (int q : d.pairs[i].acc)
            for (int s = 0; s < m.state_count(); ++s) p.pairs[i].acc[s * nq + q] = 1;
        for (int q : d.pairs[i].rej)
            for (int s = 0; s < m.state_count(); ++s) p.pairs[i].rej[s * nq + q] = 1;
    }
    return p;
}

} // namespace detail

// ---------------------------------------------------------------------------
// known-support construction

/// Builds the limit-average reward machine for a known transition support:
/// states are the DRA states plus an absorbing sink. The machine tracks the
/// DRA, pays 1 while the current (state, DRA state) pair is covered by the
/// covering collection of accepting simple ECs, and falls into the sink once
/// an action deviates from the covered component's prescription.
inline RewardMachine translate_known_support(const Mdp& m, const Dra& d, const SupportSet& e) {
    if (static_cast<int>(m.ap.size()) != d.ap_count)
        throw std::invalid_argument("MDP and DRA use different alphabets");
    if (e.count() == 0) throw std::invalid_argument("support set is empty");
    for (int s = 0; s < m.state_count(); ++s)
        for (int a : m.enabled[s]) {
            bool any = false;
            for (int to = 0; to < m.state_count(); ++to) {
                const int id = m.edge_id(s, a, to);
                if (!e.contains(id)) continue;
                any = true;
                if (!m.label_declared(s, a, to))
                    throw std::invalid_argument("label missing on a support edge");
            }
            if (!any)
                throw std::invalid_argument("support omits every transition of an enabled action");
        }

    const ProductMdp support_product = detail::support_graph_product(
        m, d, [&](int, int edge_id) { return e.contains(edge_id); });
    const CoveringCollection cov = covering_asecs(support_product, CoveringMode::Efficient);

    const int nq = d.state_count();
    const int bot = nq;
    RewardMachine r;
    r.initial = d.initial;
    r.state_names = d.state_names;
    r.state_names.push_back("bot");
    r.update.assign(nq + 1, std::vector<int>(m.edge_count(), bot));
    r.reward.assign(nq + 1, std::vector<double>(m.edge_count(), 0.0));
    for (int u = 0; u < nq; ++u)
        for (int i = 0; i < m.edge_count(); ++i) {
            const EdgeRef t = m.edge(i);
            const int v = t.from * nq + u;
            const bool covered = cov.covered(v);
            if (covered && t.action != cov.action_of(v))
                r.update[u][i] = bot;
            else
                r.update[u][i] = d.delta[u][m.label(t.from, t.action, t.to)];
            r.reward[u][i] = covered ? 1.0 : 0.0;
        }
    return r;
}

// ---------------------------------------------------------------------------
// general construction (support discovered on the fly)

namespace detail {

struct BitSet {
    std::vector<std::uint64_t> words;
    bool operator==(const BitSet& o) const { return words == o.words; }
    bool test(int i) const { return (words[i >> 6] >> (i & 63)) & 1; }
    BitSet with(int i) const {
        BitSet out = *this;
        out.words[i >> 6] |= std::uint64_t{1} << (i & 63);
        return out;
    }
};

struct BitSetHash {
    std::size_t operator()(const BitSet& b) const {
        std::size_t h = 1469598103934665603ull;
        for (std::uint64_t w : b.words) {
            h ^= w;
            h *= 1099511628211ull;
        }
        return h;
    }
};

} // namespace detail

/// Lazy transducer of the general construction. States are interned
/// (DRA state, discovered-product-edge-set) pairs; the absorbing deviation
/// sink is reported as kSink. A product edge is (q, base edge): its
/// endpoint is determined by the label, so |Q| * |edges| bits span the
/// universe. Covering collections are memoized per discovered set.
class GeneralRmDriver {
  public:
    static constexpr int kSink = -1;

    GeneralRmDriver(const Mdp& m, const Dra& d, std::size_t max_states = 1'000'000)
        : m_(m), d_(d), max_states_(max_states) {
        detail::BitSet empty;
        empty.words.assign((static_cast<std::size_t>(universe_bits()) + 63) / 64, 0);
        set_ids_.emplace(empty, 0);
        sets_.push_back(std::move(empty));
        coverings_.emplace_back();
        coverings_[0].cover_index.assign(
            static_cast<std::size_t>(m.state_count()) * d.state_count(), 0);
        intern_node(d.initial, 0);
    }

    int initial() const { return 0; }
    std::size_t materialized() const { return nodes_.size(); }
    int dra_state(int u) const { return nodes_[u].q; }
    std::string name(int u) const {
        return d_.state_names[nodes_[u].q] + "#" + std::to_string(nodes_[u].eset);
    }

    /// One transducer step from a non-sink state over a base edge.
    std::pair<int, double> step(int u, int edge_id) {
        auto& memo = memo_[u];
        if (memo.empty()) memo.assign(m_.edge_count(), {-2, 0.0});
        auto& slot = memo[edge_id];
        if (slot.first != -2) return slot;

        const Node node = nodes_[u];
        const EdgeRef t = m_.edge(edge_id);
        const double pay = covered(node.eset, t.from, node.q) ? 1.0 : 0.0;
        const int grown = add_edge(node.eset, node.q, edge_id);
        int next;
        if (covered(grown, t.from, node.q) && covered_action(grown, t.from, node.q) != t.action) {
            next = kSink;
        } else {
            next = intern_node(d_.delta[node.q][m_.label(t.from, t.action, t.to)], grown);
        }
        slot = {next, pay};
        return slot;
    }

  private:
    struct Node {
        int q;
        int eset;
    };

    int universe_bits() const { return d_.state_count() * m_.edge_count(); }
    int pid(int q, int base_edge) const { return q * m_.edge_count() + base_edge; }

    int intern_set(const detail::BitSet& b) {
        auto it = set_ids_.find(b);
        if (it != set_ids_.end()) return it->second;
        const int id = static_cast<int>(sets_.size());
        set_ids_.emplace(b, id);
        sets_.push_back(b);
        coverings_.emplace_back();
        return id;
    }

    int add_edge(int set_id, int q, int base_edge) {
        const int bit = pid(q, base_edge);
        if (sets_[set_id].test(bit)) return set_id;
        return intern_set(sets_[set_id].with(bit));
    }

    int intern_node(int q, int eset) {
        const std::int64_t key =
            (static_cast<std::int64_t>(q) << 32) | static_cast<std::uint32_t>(eset);
        auto it = node_ids_.find(key);
        if (it != node_ids_.end()) return it->second;
        if (nodes_.size() >= max_states_)
            throw cap_exceeded_error("general construction state cap exceeded");
        const int id = static_cast<int>(nodes_.size());
        node_ids_.emplace(key, id);
        nodes_.push_back({q, eset});
        memo_.emplace_back();
        return id;
    }

    const CoveringCollection& covering(int set_id) {
        CoveringCollection& cov = coverings_[set_id];
        if (cov.cover_index.empty()) {
            const detail::BitSet& bits = sets_[set_id];
            const ProductMdp p = detail::support_graph_product(
                m_, d_,
                [&](int q, int edge_id) { return edge_id >= 0 && bits.test(pid(q, edge_id)); });
            cov = covering_asecs(p, CoveringMode::Efficient);
            if (cov.cover_index.empty()) // no members; keep the mark that it is computed
                cov.cover_index.assign(
                    static_cast<std::size_t>(m_.state_count()) * d_.state_count(), 0);
        }
        return cov;
    }

    bool covered(int set_id, int s, int q) {
        return covering(set_id).covered(s * d_.state_count() + q);
    }
    int covered_action(int set_id, int s, int q) {
        return covering(set_id).action_of(s * d_.state_count() + q);
    }

    const Mdp& m_;
    const Dra& d_;
    std::size_t max_states_;
    std::vector<detail::BitSet> sets_;
    std::unordered_map<detail::BitSet, int, detail::BitSetHash> set_ids_;
    std::vector<CoveringCollection> coverings_;
    std::vector<Node> nodes_;
    std::unordered_map<std::int64_t, int> node_ids_;
    std::vector<std::vector<std::pair<int, double>>> memo_;
};

/// Materializes the general construction as an explicit reward machine,
/// closing the state space over every syntactic base transition. Refuses
/// once more than `max_states` machine states appear.
inline RewardMachine translate_general(const Mdp& m, const Dra& d,
                                       std::size_t max_states = 1'000'000) {
    GeneralRmDriver driver(m, d, max_states);
    const int e = m.edge_count();
    std::vector<std::vector<int>> update;
    std::vector<std::vector<double>> reward;
    for (std::size_t u = 0; u < driver.materialized(); ++u) {
        update.emplace_back(e, 0);
        reward.emplace_back(e, 0.0);
        for (int i = 0; i < e; ++i) {
            const auto [next, pay] = driver.step(static_cast<int>(u), i);
            update[u][i] = next;
            reward[u][i] = pay;
        }
    }

    RewardMachine r;
    r.initial = driver.initial();
    const int bot = static_cast<int>(update.size());
    for (int u = 0; u < bot; ++u) r.state_names.push_back(driver.name(u));
    r.state_names.push_back("bot");
    r.update = std::move(update);
    r.reward = std::move(reward);
    for (auto& row : r.update)
        for (int& v : row)
            if (v == GeneralRmDriver::kSink) v = bot;
    r.update.emplace_back(e, bot);
    r.reward.emplace_back(e, 0.0);
    return r;
}

// ---------------------------------------------------------------------------
// certification

struct CertifyOptions {
    int max_joint_states = 14; // reachable (s, u, q) triples
    long max_policies = 1'000'000;
    double value_tol = 1e-7;  // cross-quantity comparisons
    double argmax_tol = 1e-9; // within-quantity argmax membership
};

struct CertificationReport {
    bool certified = false;
    double max_gain = 0.0;
    double max_acceptance = 0.0;
    long policies = 0;
    long joint_states = 0;
    bool max_values_match = false;    // max gain == max acceptance
    bool maximizers_transfer = false; // every gain maximizer maximizes acceptance
    bool sandwich_holds = false;      // gain <= acceptance per policy
    double worst_sandwich_gap = 0.0;  // max over policies of gain - acceptance
};

namespace detail {

// Joint unfolding of base MDP, reward machine and DRA. Machine states come
// from a step oracle so lazily constructed machines certify without being
// materialized; kSink (-1) is the absorbing zero-reward machine state.
// Policies are memoryless over the joint triples (s, u, q): acceptance is
// maximized over machine policies that may also track the automaton, which
// is what makes a reward-starved machine fail certification.
class JointSpace {
  public:
    using StepFn = std::function<std::pair<int, double>(int, int)>; // (u, edge) -> (u', reward)

    JointSpace(const Mdp& m, const Dra& d, int initial_u, const StepFn& step, int max_states)
        : m_(m), d_(d) {
        intern_triple(m.initial, initial_u, d.initial);
        for (std::size_t v = 0; v < triples_.size(); ++v) {
            if (static_cast<int>(triples_.size()) > max_states)
                throw cap_exceeded_error("certification joint-state cap exceeded");
            const Triple t = triples_[v];
            rows_.emplace_back();
            rew_.emplace_back();
            for (int a : m.enabled[t.s]) {
                std::vector<Outcome> row;
                std::vector<double> rw;
                for (const auto& out : m.row(t.s, a)) {
                    if (out.prob <= 0.0) continue;
                    const int e = m.edge_id(t.s, a, out.to);
                    int u2 = GeneralRmDriver::kSink;
                    double pay = 0.0;
                    if (t.u != GeneralRmDriver::kSink) {
                        const auto [uu, pp] = step(t.u, e);
                        u2 = uu;
                        pay = pp;
                    }
                    const int q2 = d.delta[t.q][m.label(t.s, a, out.to)];
                    row.push_back({intern_triple(out.to, u2, q2), out.prob});
                    rw.push_back(pay);
                }
                rows_[v].push_back(std::move(row));
                rew_[v].push_back(std::move(rw));
            }
        }
    }

    int slot_count() const { return static_cast<int>(triples_.size()); }
    long triple_count() const { return static_cast<long>(triples_.size()); }
    int slot_state(int slot) const { return triples_[slot].s; }

    // walks the triples reachable under a partial assignment; returns the
    // first reachable unassigned slot, or -1 when the assignment is closed
    int first_open_slot(const std::vector<int>& choice, const std::vector<char>& assigned) const {
        std::vector<char> seen(triples_.size(), 0);
        std::queue<int> bfs;
        seen[0] = 1;
        bfs.push(0);
        while (!bfs.empty()) {
            const int v = bfs.front();
            bfs.pop();
            if (!assigned[v]) return v;
            for (const auto& t : rows_[v][choice[v]])
                if (!seen[t.to]) {
                    seen[t.to] = 1;
                    bfs.push(t.to);
                }
        }
        return -1;
    }

    // exact gain and acceptance probability of a closed assignment: pin the
    // terminal classes (bias system for the gain, Rabin check on the q
    // coordinate for acceptance), then absorb
    std::pair<double, double> evaluate(const std::vector<int>& choice,
                                       const std::vector<PairMask>& lifted) const {
        const int n = static_cast<int>(triples_.size());
        std::vector<std::vector<Outcome>> rows(n);
        std::vector<std::vector<int>> adj(n);
        std::vector<char> reach(n, 0);
        std::queue<int> bfs;
        reach[0] = 1;
        bfs.push(0);
        while (!bfs.empty()) {
            const int v = bfs.front();
            bfs.pop();
            rows[v] = rows_[v][choice[v]];
            for (const auto& t : rows[v]) {
                adj[v].push_back(t.to);
                if (!reach[t.to]) {
                    reach[t.to] = 1;
                    bfs.push(t.to);
                }
            }
        }
        std::vector<std::vector<double>> values(2, std::vector<double>(n, -1.0));
        for (const auto& scc : strongly_connected_components(adj)) {
            if (!reach[scc.front()]) continue;
            bool exits = false;
            for (int v : scc)
                for (int w : adj[v])
                    if (!std::binary_search(scc.begin(), scc.end(), w)) exits = true;
            if (exits) continue;

            const int k = static_cast<int>(scc.size());
            std::vector<double> a(static_cast<std::size_t>(k + 1) * (k + 1), 0.0), b(k + 1, 0.0);
            a[0] = 1.0;
            for (int t = 0; t < k; ++t) {
                const int row = t + 1;
                a[static_cast<std::size_t>(row) * (k + 1) + t] += 1.0;
                a[static_cast<std::size_t>(row) * (k + 1) + k] = 1.0;
                const int v = scc[t];
                const auto& outs = rows_[v][choice[v]];
                const auto& rws = rew_[v][choice[v]];
                for (std::size_t j = 0; j < outs.size(); ++j) {
                    const int pos = static_cast<int>(
                        std::lower_bound(scc.begin(), scc.end(), outs[j].to) - scc.begin());
                    a[static_cast<std::size_t>(row) * (k + 1) + pos] -= outs[j].prob;
                    b[row] += outs[j].prob * rws[j];
                }
            }
            const double y = lu_solve(std::move(a), std::move(b), k + 1)[k];

            bool accepting = false;
            for (const auto& pair : lifted) {
                bool hit = false, banned = false;
                for (int v : scc) {
                    if (pair.acc[triples_[v].q]) hit = true;
                    if (pair.rej[triples_[v].q]) banned = true;
                }
                if (hit && !banned) accepting = true;
            }
            for (int v : scc) {
                values[0][v] = y;
                values[1][v] = accepting ? 1.0 : 0.0;
            }
        }
        chain_absorption(rows, values);
        return {values[0][0], values[1][0]};
    }

  private:
    struct Triple {
        int s, u, q;
    };

    int intern_triple(int s, int u, int q) {
        const std::int64_t key = ((static_cast<std::int64_t>(s) * 4096 + q) << 32) ^
                                 static_cast<std::uint32_t>(u + 1);
        auto it = triple_ids_.find(key);
        if (it != triple_ids_.end()) return it->second;
        const int id = static_cast<int>(triples_.size());
        triple_ids_.emplace(key, id);
        triples_.push_back({s, u, q});
        return id;
    }

    const Mdp& m_;
    const Dra& d_;
    std::vector<Triple> triples_;
    std::unordered_map<std::int64_t, int> triple_ids_;
    std::vector<std::vector<std::vector<Outcome>>> rows_;
    std::vector<std::vector<std::vector<double>>> rew_;
};

inline CertificationReport certify_joint(const Mdp& m, const Dra& d, JointSpace& joint,
                                         const CertifyOptions& opt) {
    std::vector<PairMask> lifted(d.pairs.size());
    for (std::size_t i = 0; i < d.pairs.size(); ++i) {
        lifted[i].acc.assign(d.state_count(), 0);
        lifted[i].rej.assign(d.state_count(), 0);
        for (int q : d.pairs[i].acc) lifted[i].acc[q] = 1;
        for (int q : d.pairs[i].rej) lifted[i].rej[q] = 1;
    }

    std::vector<int> choice(joint.slot_count(), 0);
    std::vector<char> assigned(joint.slot_count(), 0);
    std::vector<std::pair<double, double>> scores;

    std::function<void()> walk = [&]() {
        const int slot = joint.first_open_slot(choice, assigned);
        if (slot < 0) {
            if (static_cast<long>(scores.size()) >= opt.max_policies)
                throw cap_exceeded_error("certification policy cap exceeded");
            scores.push_back(joint.evaluate(choice, lifted));
            return;
        }
        const int s = joint.slot_state(slot);
        assigned[slot] = 1;
        for (std::size_t ai = 0; ai < m.enabled[s].size(); ++ai) {
            choice[slot] = static_cast<int>(ai);
            walk();
        }
        choice[slot] = 0;
        assigned[slot] = 0;
    };
    walk();

    CertificationReport rep;
    rep.policies = static_cast<long>(scores.size());
    rep.joint_states = joint.triple_count();
    rep.max_gain = -1.0;
    rep.max_acceptance = -1.0;
    for (const auto& [g, a] : scores) {
        rep.max_gain = std::max(rep.max_gain, g);
        rep.max_acceptance = std::max(rep.max_acceptance, a);
        rep.worst_sandwich_gap = std::max(rep.worst_sandwich_gap, g - a);
    }
    rep.max_values_match = std::fabs(rep.max_gain - rep.max_acceptance) <= opt.value_tol;
    rep.sandwich_holds = rep.worst_sandwich_gap <= opt.value_tol;
    rep.maximizers_transfer = true;
    for (const auto& [g, a] : scores)
        if (g >= rep.max_gain - opt.argmax_tol && a < rep.max_acceptance - opt.value_tol)
            rep.maximizers_transfer = false;
    rep.certified = rep.max_values_match && rep.sandwich_holds && rep.maximizers_transfer;
    return rep;
}

} // namespace detail

/// Exhaustively checks optimality preservation of a reward machine against
/// the DRA objective: enumerates deterministic memoryless policies of the
/// machine product (by distinct reachable behavior over (s, u) pairs) and
/// scores each with its exact gain and exact acceptance probability.
/// Certified means: max gain equals max acceptance, every gain maximizer is
/// an acceptance maximizer, and gain <= acceptance policy by policy.
inline CertificationReport certify_translation(const Mdp& m, const Dra& d, const RewardMachine& r,
                                               const CertifyOptions& opt = {}) {
    detail::JointSpace joint(
        m, d, r.initial,
        [&](int u, int e) { return std::make_pair(r.update[u][e], r.reward[u][e]); },
        opt.max_joint_states);
    return detail::certify_joint(m, d, joint, opt);
}

/// Same certification run directly against the lazy general construction,
/// so only run-consistent machine states ever materialize.
inline CertificationReport certify_translation_general(const Mdp& m, const Dra& d,
                                                       const CertifyOptions& opt = {},
                                                       std::size_t max_rm_states = 1'000'000) {
    GeneralRmDriver driver(m, d, max_rm_states);
    detail::JointSpace joint(
        m, d, driver.initial(), [&](int u, int e) { return driver.step(u, e); },
        opt.max_joint_states);
    return detail::certify_joint(m, d, joint, opt);
}

// ---------------------------------------------------------------------------
// value-level certification of the general construction

/// Run-consistent product of an MDP with the general construction: the
/// (s, u) pairs an actual run can visit, with the deviation sink expanded
/// per base state. The reward of a node's outgoing transitions depends only
/// on the node (coverage of (s, q) under the discovered edge set).
struct GeneralRmProduct {
    Mdp mdp;
    std::vector<double> reward_out;
    std::vector<int> node_dra; // q per node, -1 on the sink block
};

inline GeneralRmProduct materialize_general_rm_product(const Mdp& m, GeneralRmDriver& driver,
                                                       std::size_t max_nodes) {
    GeneralRmProduct p;
    struct Node {
        int s, u;
    };
    std::vector<Node> nodes;
    std::unordered_map<std::int64_t, int> ids;
    auto intern = [&](int s, int u) {
        const std::int64_t key = (static_cast<std::int64_t>(s) << 32) ^
                                 static_cast<std::uint32_t>(u + 1);
        auto it = ids.find(key);
        if (it != ids.end()) return it->second;
        const int id = static_cast<int>(nodes.size());
        ids.emplace(key, id);
        nodes.push_back({s, u});
        return id;
    };
    intern(m.initial, driver.initial());
    for (std::size_t v = 0; v < nodes.size(); ++v) {
        if (nodes.size() > max_nodes)
            throw cap_exceeded_error("general product node cap exceeded");
        const Node node = nodes[v];
        p.mdp.state_names.push_back(m.state_names[node.s] + "@" +
                                    (node.u == GeneralRmDriver::kSink ? std::string("bot")
                                                                      : driver.name(node.u)));
        p.mdp.enabled.push_back(m.enabled[node.s]);
        p.mdp.rows.emplace_back();
        double pay = 0.0;
        for (int a : m.enabled[node.s]) {
            std::vector<Outcome> row;
            for (const auto& out : m.row(node.s, a)) {
                if (out.prob <= 0.0) continue;
                int u2 = GeneralRmDriver::kSink;
                if (node.u != GeneralRmDriver::kSink) {
                    const auto [uu, pp] = driver.step(node.u, m.edge_id(node.s, a, out.to));
                    u2 = uu;
                    pay = pp;
                }
                row.push_back({intern(out.to, u2), out.prob});
            }
            p.mdp.rows.back().push_back(std::move(row));
        }
        p.reward_out.push_back(pay);
        p.node_dra.push_back(node.u == GeneralRmDriver::kSink ? -1 : driver.dra_state(node.u));
    }
    p.mdp.initial = 0;
    p.mdp.action_names = m.action_names;
    p.mdp.ap = m.ap;
    p.mdp.finalize();
    return p;
}

/// Highest limit-average reward the general construction admits on this
/// instance. Every end component of the product pays uniformly 0 or 1 (the
/// discovered edge set is constant inside a component and coverage is a
/// node property), so the optimum is the maximal probability of reaching a
/// component that pays 1.
inline double optimal_gain_general(const GeneralRmProduct& p) {
    std::vector<char> paying(p.mdp.state_count());
    for (int v = 0; v < p.mdp.state_count(); ++v) paying[v] = p.reward_out[v] == 1.0;
    std::vector<int> target;
    for (const auto& mec : mec_decomposition(p.mdp, std::vector<char>(paying.begin(), paying.end()),
                                             [](int, int) { return true; }))
        for (int v : mec.states) target.push_back(v);
    if (target.empty()) return 0.0;
    std::sort(target.begin(), target.end());
    return max_reach_probability(p.mdp, target)[p.mdp.initial];
}

struct GeneralCertification {
    bool certified = false;
    double optimal_gain = 0.0;
    double optimal_acceptance = 0.0;
    std::size_t product_nodes = 0;
    long joint_states = 0;
    int sampled_policies = 0;
    double worst_sandwich_gap = 0.0;
    bool values_match = false;
    bool sandwich_holds = false;
};

/// Certifies the general construction where policy enumeration is out of
/// reach: the optimal gain over the machine product is computed exactly and
/// compared with the optimal DRA acceptance probability, and the per-policy
/// bound gain <= acceptance is checked on seeded sampled policies. Together
/// with the value match, the sampled bound also transfers gain maximizers
/// to acceptance maximizers.
inline GeneralCertification certify_translation_general_values(const Mdp& m, const Dra& d,
                                                               int sampled_policies = 40,
                                                               std::uint64_t seed = 0,
                                                               std::size_t max_nodes = 200'000,
                                                               double value_tol = 1e-7) {
    GeneralRmDriver driver(m, d, max_nodes);
    GeneralCertification rep;
    {
        const GeneralRmProduct prod = materialize_general_rm_product(m, driver, max_nodes);
        rep.product_nodes = static_cast<std::size_t>(prod.mdp.state_count());
        rep.optimal_gain = optimal_gain_general(prod);
    }
    rep.optimal_acceptance = max_acceptance_probability(build_product(m, d));
    rep.values_match = std::fabs(rep.optimal_gain - rep.optimal_acceptance) <= value_tol;

    detail::JointSpace joint(
        m, d, driver.initial(), [&](int u, int e) { return driver.step(u, e); },
        static_cast<int>(2 * max_nodes + 16));
    rep.joint_states = joint.triple_count();
    std::vector<PairMask> lifted(d.pairs.size());
    for (std::size_t i = 0; i < d.pairs.size(); ++i) {
        lifted[i].acc.assign(d.state_count(), 0);
        lifted[i].rej.assign(d.state_count(), 0);
        for (int q : d.pairs[i].acc) lifted[i].acc[q] = 1;
        for (int q : d.pairs[i].rej) lifted[i].rej[q] = 1;
    }
    Rng rng(seed);
    std::vector<int> choice(joint.slot_count(), 0);
    for (int trial = 0; trial < sampled_policies; ++trial) {
        for (int slot = 0; slot < joint.slot_count(); ++slot) {
            const int s = joint.slot_state(slot);
            const int k = static_cast<int>(m.enabled[s].size());
            if (trial == 0) choice[slot] = 0;
            else if (trial == 1) choice[slot] = k - 1;
            else choice[slot] = rng.below(k);
        }
        const auto [g, a] = joint.evaluate(choice, lifted);
        rep.worst_sandwich_gap = std::max(rep.worst_sandwich_gap, g - a);
        ++rep.sampled_policies;
    }
    rep.sandwich_holds = rep.worst_sandwich_gap <= value_tol;
    rep.certified = rep.values_match && rep.sandwich_holds;
    return rep;
}

} // namespace dra2rm
