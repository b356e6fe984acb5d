#pragma once

#include <algorithm>
#include <initializer_list>
#include <map>
#include <string>
#include <vector>

#include "dra2rm/evaluate.hpp"
#include "dra2rm/model.hpp"
#include "dra2rm/product.hpp"

namespace fixtures {

using namespace dra2rm;

// Small programmatic builder so fixtures read like the drawings they encode.
class MdpBuilder {
  public:
    MdpBuilder(std::vector<std::string> states, std::vector<std::string> actions,
               std::vector<std::string> ap) {
        m_.state_names = std::move(states);
        m_.action_names = std::move(actions);
        m_.ap = std::move(ap);
        m_.enabled.resize(m_.state_names.size());
        rows_.resize(m_.state_names.size());
    }

    MdpBuilder& trans(const std::string& from, const std::string& action, const std::string& to,
                      double prob, std::initializer_list<const char*> props = {}) {
        const int s = state(from), a = this->action(action), t = state(to);
        rows_[s][a].push_back({t, prob});
        Label mask = 0;
        for (const char* p : props) mask |= 1u << ap(p);
        labels_.push_back({s, a, t, mask});
        return *this;
    }

    Mdp build(const std::string& initial) {
        Mdp m = m_;
        m.initial = state(initial);
        m.rows.resize(m.state_names.size());
        for (std::size_t s = 0; s < rows_.size(); ++s) {
            for (const auto& [a, outs] : rows_[s]) m.enabled[s].push_back(a);
            std::sort(m.enabled[s].begin(), m.enabled[s].end());
            for (int a : m.enabled[s]) {
                auto outs = rows_[s].at(a);
                std::sort(outs.begin(), outs.end(),
                          [](const Outcome& x, const Outcome& y) { return x.to < y.to; });
                m.rows[s].push_back(std::move(outs));
            }
        }
        for (const auto& l : labels_) m.set_label(l.s, l.a, l.t, l.mask);
        m.finalize();
        return m;
    }

    int state(const std::string& n) const { return find(m_.state_names, n); }
    int action(const std::string& n) const { return find(m_.action_names, n); }
    int ap(const std::string& n) const { return find(m_.ap, n); }

  private:
    static int find(const std::vector<std::string>& v, const std::string& n) {
        auto it = std::find(v.begin(), v.end(), n);
        if (it == v.end()) throw std::invalid_argument("unknown name: " + n);
        return static_cast<int>(it - v.begin());
    }
    struct DeclaredLabel {
        int s, a, t;
        Label mask;
    };
    Mdp m_;
    std::vector<std::map<int, std::vector<Outcome>>> rows_;
    std::vector<DeclaredLabel> labels_;
};

class DraBuilder {
  public:
    DraBuilder(std::vector<std::string> states, int ap_count) {
        d_.state_names = std::move(states);
        d_.ap_count = ap_count;
        d_.delta.assign(d_.state_names.size(), std::vector<int>(1 << ap_count, -1));
    }
    DraBuilder& edge(const std::string& from, Label letter, const std::string& to) {
        d_.delta[state(from)][letter] = state(to);
        return *this;
    }
    DraBuilder& edge_any(const std::string& from, const std::string& to) {
        for (int l = 0; l < d_.letter_count(); ++l) d_.delta[state(from)][l] = state(to);
        return *this;
    }
    DraBuilder& pair(std::initializer_list<const char*> acc, std::initializer_list<const char*> rej) {
        RabinPair p;
        for (const char* q : acc) p.acc.push_back(state(q));
        for (const char* q : rej) p.rej.push_back(state(q));
        d_.pairs.push_back(std::move(p));
        return *this;
    }
    Dra build(const std::string& initial) {
        Dra d = d_;
        d.initial = state(initial);
        return d;
    }
    int state(const std::string& n) const {
        auto it = std::find(d_.state_names.begin(), d_.state_names.end(), n);
        if (it == d_.state_names.end()) throw std::invalid_argument("unknown name: " + n);
        return static_cast<int>(it - d_.state_names.begin());
    }

  private:
    Dra d_;
};

// Two-state MDP where action b drives to the petrol station s1 (label {p})
// and a loops at s0; all transitions are deterministic.
inline Mdp refuel_mdp() {
    return MdpBuilder({"s0", "s1"}, {"a", "b"}, {"p"})
        .trans("s0", "a", "s0", 1.0)
        .trans("s0", "b", "s1", 1.0, {"p"})
        .trans("s1", "b", "s0", 1.0)
        .build("s0");
}

// Rabin automaton for "see p exactly once": loop at q1 accepts, a second p
// falls into the q2 sink.
inline Dra refuel_dra() {
    return DraBuilder({"q0", "q1", "q2"}, 1)
        .edge("q0", 0, "q0")
        .edge("q0", 1, "q1")
        .edge("q1", 0, "q1")
        .edge("q1", 1, "q2")
        .edge_any("q2", "q2")
        .pair({"q1"}, {})
        .build("q0");
}

// Hand-written reward machine counting visits to s1 (none / one / more);
// pays 1 on the a-loop at s0 after exactly one visit.
inline RewardMachine visit_counter_rm(const Mdp& m) {
    RewardMachine r;
    r.state_names = {"u0", "u1", "u2"};
    r.initial = 0;
    const int e = m.edge_count();
    r.update.assign(3, std::vector<int>(e, 0));
    r.reward.assign(3, std::vector<double>(e, 0.0));
    const int s1 = 1;
    for (int u = 0; u < 3; ++u)
        for (int i = 0; i < e; ++i) {
            const EdgeRef t = m.edge(i);
            r.update[u][i] = (t.to == s1) ? std::min(u + 1, 2) : u;
        }
    r.reward[1][m.edge_id(0, 0, 0)] = 1.0; // (s0, a, s0) after one visit
    return r;
}

// The reward machine the known-support construction should produce for the
// refuel instance: DRA states plus an absorbing deviation sink; reward flows
// while sitting in the covered state (s0 paired with q1).
inline RewardMachine refuel_reference_rm(const Mdp& m, const Dra& d) {
    RewardMachine r;
    r.state_names = {"q0", "q1", "q2", "bot"};
    r.initial = 0;
    const int bot = 3;
    const int e = m.edge_count();
    r.update.assign(4, std::vector<int>(e, bot));
    r.reward.assign(4, std::vector<double>(e, 0.0));
    for (int u = 0; u < 3; ++u)
        for (int i = 0; i < e; ++i) {
            const EdgeRef t = m.edge(i);
            const bool covered = (u == 1 && t.from == 0); // (s0, q1)
            if (covered && t.action != 0)                 // only a stays
                r.update[u][i] = bot;
            else
                r.update[u][i] = d.delta[u][m.label(t.from, t.action, t.to)];
            r.reward[u][i] = covered ? 1.0 : 0.0;
        }
    return r;
}

// Four-state MDP with two label loops (Fig-style prefix-independent
// counterexample): action a commits to one of two absorbing loops, action b
// cycles through s3 with label {c} on the way back.
inline Mdp two_loop_mdp(double p1, double p2) {
    MdpBuilder b({"s0", "s1", "s2", "s3"}, {"a", "b"}, {"c"});
    b.trans("s0", "a", "s1", p1).trans("s0", "a", "s2", 1.0 - p1);
    if (p2 > 0.0) b.trans("s0", "b", "s0", p2);
    b.trans("s0", "b", "s3", 1.0 - p2);
    b.trans("s1", "a", "s1", 1.0, {"c"});
    b.trans("s2", "a", "s2", 1.0);
    b.trans("s3", "b", "s0", 1.0, {"c"});
    return b.build("s0");
}

// DRA for "see c infinitely often".
inline Dra infinitely_often_dra() {
    return DraBuilder({"q0", "q1"}, 1)
        .edge("q0", 0, "q0")
        .edge("q0", 1, "q1")
        .edge("q1", 0, "q0")
        .edge("q1", 1, "q1")
        .pair({"q1"}, {})
        .build("q0");
}

// Product-level fixture: visiting s1 infinitely often, with a decoy b-loop
// at s0. The maximal accepting EC keeps both actions at s0.
inline std::pair<Mdp, std::vector<PairMask>> revisit_product() {
    Mdp m = MdpBuilder({"s0", "s1"}, {"a", "b"}, {})
                .trans("s0", "b", "s0", 1.0)
                .trans("s0", "a", "s1", 1.0)
                .trans("s1", "a", "s0", 1.0)
                .build("s0");
    PairMask pm;
    pm.acc = {0, 1};
    pm.rej = {0, 0};
    return {std::move(m), {pm}};
}

// Multichain fixture: one decision at h0 between a high-gain and a low-gain
// absorbing loop; every policy's chain has two recurrent classes.
inline RewardedMdp split_gain_mdp() {
    Mdp m = MdpBuilder({"h0", "h1", "h2"}, {"a", "b"}, {})
                .trans("h0", "a", "h1", 0.9)
                .trans("h0", "a", "h2", 0.1)
                .trans("h0", "b", "h2", 1.0)
                .trans("h1", "a", "h1", 1.0)
                .trans("h2", "a", "h2", 1.0)
                .build("h0");
    RewardedMdp r{std::move(m), {}};
    r.reward.resize(3);
    for (int s = 0; s < 3; ++s)
        for (std::size_t ai = 0; ai < r.mdp.enabled[s].size(); ++ai)
            r.reward[s].push_back(std::vector<double>(r.mdp.rows[s][ai].size(), 0.0));
    r.reward[1][0][0] = 1.0; // (h1, a, h1)
    r.reward[2][0][0] = 0.3; // (h2, a, h2)
    return r;
}

// Single-state reward machine that replays a fixed transition reward table,
// so a plain rewarded MDP can ride through RM-product interfaces.
inline RewardMachine constant_rm(const RewardedMdp& rm) {
    RewardMachine r;
    r.state_names = {"u0"};
    r.initial = 0;
    const int e = rm.mdp.edge_count();
    r.update.assign(1, std::vector<int>(e, 0));
    r.reward.assign(1, std::vector<double>(e, 0.0));
    for (int i = 0; i < e; ++i) {
        const EdgeRef t = rm.mdp.edge(i);
        const int ai = rm.mdp.enabled_index(t.from, t.action);
        const auto& row = rm.mdp.rows[t.from][ai];
        for (std::size_t k = 0; k < row.size(); ++k)
            if (row[k].to == t.to) r.reward[0][i] = rm.reward[t.from][ai][k];
    }
    return r;
}

inline RewardMachine zero_rm(const Mdp& m) {
    RewardMachine r;
    r.state_names = {"u0"};
    r.initial = 0;
    r.update.assign(1, std::vector<int>(m.edge_count(), 0));
    r.reward.assign(1, std::vector<double>(m.edge_count(), 0.0));
    return r;
}

} // namespace fixtures
