#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "dra2rm/model.hpp"
#include "dra2rm/translate.hpp"

namespace dra2rm {

using nlohmann::json;

/// Malformed or inconsistent input files. The CLI maps this to its
/// invalid-input exit code.
struct invalid_input_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Instance {
    Mdp mdp;
    Dra dra;
    std::optional<SupportSet> declared_support;
};

namespace io_detail {

inline int index_of(const std::vector<std::string>& names, const std::string& name,
                    const char* what) {
    for (std::size_t i = 0; i < names.size(); ++i)
        if (names[i] == name) return static_cast<int>(i);
    throw invalid_input_error(std::string("unknown ") + what + ": " + name);
}

inline void expect(bool ok, const std::string& message) {
    if (!ok) throw invalid_input_error(message);
}

inline std::vector<std::string> name_list(const json& j, const char* field) {
    expect(j.contains(field) && j[field].is_array(), std::string(field) + " must be an array");
    std::vector<std::string> names;
    for (const auto& x : j[field]) {
        expect(x.is_string(), std::string(field) + " entries must be strings");
        names.push_back(x.get<std::string>());
    }
    for (std::size_t i = 0; i < names.size(); ++i)
        for (std::size_t k = i + 1; k < names.size(); ++k)
            expect(names[i] != names[k], "duplicate name: " + names[i]);
    return names;
}

inline Label letter_mask(const json& letter, const std::vector<std::string>& ap) {
    expect(letter.is_array(), "letter must be a list of propositions");
    Label mask = 0;
    for (const auto& p : letter)
        mask |= 1u << index_of(ap, p.get<std::string>(), "proposition");
    return mask;
}

inline json letter_names(Label mask, const std::vector<std::string>& ap) {
    json out = json::array();
    for (std::size_t i = 0; i < ap.size(); ++i)
        if (mask & (1u << i)) out.push_back(ap[i]);
    return out;
}

} // namespace io_detail

// ---------------------------------------------------------------------------
// instance files

inline Instance load_instance(const json& j) {
    using namespace io_detail;
    expect(j.is_object(), "instance must be an object");
    expect(j.contains("mdp") && j.contains("dra"), "instance needs mdp and dra sections");
    const auto ap = name_list(j, "ap");
    expect(static_cast<int>(ap.size()) <= kMaxAtomicPropositions, "too many atomic propositions");

    Instance inst;
    const json& jm = j["mdp"];
    inst.mdp.state_names = name_list(jm, "states");
    inst.mdp.action_names = name_list(jm, "actions");
    inst.mdp.ap = ap;
    inst.mdp.initial = index_of(inst.mdp.state_names, jm.value("initial", ""), "state");
    inst.mdp.enabled.resize(inst.mdp.state_names.size());
    inst.mdp.rows.resize(inst.mdp.state_names.size());

    expect(jm.contains("transitions") && jm["transitions"].is_array(),
           "mdp.transitions must be an array");
    struct Parsed {
        int s, a, to;
        double prob;
        Label label;
    };
    std::vector<Parsed> parsed;
    for (const auto& t : jm["transitions"]) {
        Parsed p{};
        p.s = index_of(inst.mdp.state_names, t.value("from", ""), "state");
        p.a = index_of(inst.mdp.action_names, t.value("action", ""), "action");
        p.to = index_of(inst.mdp.state_names, t.value("to", ""), "state");
        expect(t.contains("prob") && t["prob"].is_number(), "transition needs a numeric prob");
        p.prob = t["prob"].get<double>();
        p.label = t.contains("labels") ? letter_mask(t["labels"], ap) : 0u;
        parsed.push_back(p);
    }
    for (const auto& p : parsed) {
        auto& en = inst.mdp.enabled[p.s];
        if (std::find(en.begin(), en.end(), p.a) == en.end()) en.push_back(p.a);
    }
    for (auto& en : inst.mdp.enabled) std::sort(en.begin(), en.end());
    for (std::size_t s = 0; s < inst.mdp.enabled.size(); ++s)
        inst.mdp.rows[s].resize(inst.mdp.enabled[s].size());
    for (const auto& p : parsed) {
        const int ai = inst.mdp.enabled_index(p.s, p.a);
        for (const auto& t : inst.mdp.rows[p.s][ai])
            expect(t.to != p.to, "duplicate transition entry");
        inst.mdp.rows[p.s][ai].push_back({p.to, p.prob});
        inst.mdp.set_label(p.s, p.a, p.to, p.label);
    }
    for (auto& rows : inst.mdp.rows)
        for (auto& row : rows)
            std::sort(row.begin(), row.end(),
                      [](const Outcome& x, const Outcome& y) { return x.to < y.to; });
    inst.mdp.finalize();

    const json& jd = j["dra"];
    inst.dra.state_names = name_list(jd, "states");
    inst.dra.ap_count = static_cast<int>(ap.size());
    inst.dra.initial = index_of(inst.dra.state_names, jd.value("initial", ""), "DRA state");
    inst.dra.delta.assign(inst.dra.state_names.size(),
                          std::vector<int>(1 << inst.dra.ap_count, -1));
    expect(jd.contains("delta") && jd["delta"].is_array(), "dra.delta must be an array");
    for (const auto& e : jd["delta"]) {
        const int q = index_of(inst.dra.state_names, e.value("from", ""), "DRA state");
        const int q2 = index_of(inst.dra.state_names, e.value("to", ""), "DRA state");
        expect(e.contains("letter"), "delta entry needs a letter");
        inst.dra.delta[q][letter_mask(e["letter"], ap)] = q2;
    }
    if (jd.contains("pairs"))
        for (const auto& p : jd["pairs"]) {
            RabinPair pair;
            for (const auto& q : p.value("acc", json::array()))
                pair.acc.push_back(index_of(inst.dra.state_names, q.get<std::string>(), "DRA state"));
            for (const auto& q : p.value("rej", json::array()))
                pair.rej.push_back(index_of(inst.dra.state_names, q.get<std::string>(), "DRA state"));
            inst.dra.pairs.push_back(std::move(pair));
        }

    if (j.contains("support")) {
        SupportSet sup;
        sup.edge_mask.assign(inst.mdp.edge_count(), 0);
        for (const auto& e : j["support"]) {
            const int s = index_of(inst.mdp.state_names, e.value("from", ""), "state");
            const int a = index_of(inst.mdp.action_names, e.value("action", ""), "action");
            const int to = index_of(inst.mdp.state_names, e.value("to", ""), "state");
            const int id = inst.mdp.edge_id(s, a, to);
            expect(id >= 0, "support references a disabled action");
            sup.edge_mask[id] = 1;
        }
        inst.declared_support = std::move(sup);
    }
    return inst;
}

inline json save_instance(const Instance& inst) {
    using namespace io_detail;
    json j;
    j["version"] = "1";
    j["ap"] = inst.mdp.ap;
    json jm;
    jm["states"] = inst.mdp.state_names;
    jm["actions"] = inst.mdp.action_names;
    jm["initial"] = inst.mdp.state_names[inst.mdp.initial];
    json trans = json::array();
    for (int s = 0; s < inst.mdp.state_count(); ++s)
        for (std::size_t ai = 0; ai < inst.mdp.enabled[s].size(); ++ai) {
            const int a = inst.mdp.enabled[s][ai];
            for (const auto& t : inst.mdp.rows[s][ai])
                trans.push_back({{"from", inst.mdp.state_names[s]},
                                 {"action", inst.mdp.action_names[a]},
                                 {"to", inst.mdp.state_names[t.to]},
                                 {"prob", t.prob},
                                 {"labels", letter_names(inst.mdp.label(s, a, t.to), inst.mdp.ap)}});
        }
    jm["transitions"] = std::move(trans);
    j["mdp"] = std::move(jm);

    json jd;
    jd["states"] = inst.dra.state_names;
    jd["initial"] = inst.dra.state_names[inst.dra.initial];
    json delta = json::array();
    for (int q = 0; q < inst.dra.state_count(); ++q)
        for (int l = 0; l < inst.dra.letter_count(); ++l)
            if (inst.dra.delta[q][l] >= 0)
                delta.push_back({{"from", inst.dra.state_names[q]},
                                 {"letter", letter_names(static_cast<Label>(l), inst.mdp.ap)},
                                 {"to", inst.dra.state_names[inst.dra.delta[q][l]]}});
    jd["delta"] = std::move(delta);
    json pairs = json::array();
    for (const auto& p : inst.dra.pairs) {
        json acc = json::array(), rej = json::array();
        for (int q : p.acc) acc.push_back(inst.dra.state_names[q]);
        for (int q : p.rej) rej.push_back(inst.dra.state_names[q]);
        pairs.push_back({{"acc", std::move(acc)}, {"rej", std::move(rej)}});
    }
    jd["pairs"] = std::move(pairs);
    j["dra"] = std::move(jd);

    if (inst.declared_support) {
        json sup = json::array();
        for (int i = 0; i < inst.mdp.edge_count(); ++i)
            if (inst.declared_support->edge_mask[i]) {
                const EdgeRef t = inst.mdp.edge(i);
                sup.push_back({{"from", inst.mdp.state_names[t.from]},
                               {"action", inst.mdp.action_names[t.action]},
                               {"to", inst.mdp.state_names[t.to]}});
            }
        j["support"] = std::move(sup);
    }
    return j;
}

// ---------------------------------------------------------------------------
// reward machine files

inline json save_rm(const RewardMachine& r, const Mdp& m) {
    json j;
    j["version"] = "1";
    j["states"] = r.state_names;
    j["initial"] = r.state_names[r.initial];
    json rules = json::array();
    for (int u = 0; u < r.state_count(); ++u)
        for (int i = 0; i < m.edge_count(); ++i) {
            const EdgeRef t = m.edge(i);
            rules.push_back({{"u", r.state_names[u]},
                             {"from", m.state_names[t.from]},
                             {"action", m.action_names[t.action]},
                             {"to", m.state_names[t.to]},
                             {"u_next", r.state_names[r.update[u][i]]},
                             {"reward", r.reward[u][i]}});
        }
    j["rules"] = std::move(rules);
    return j;
}

inline RewardMachine load_rm(const json& j, const Mdp& m) {
    using namespace io_detail;
    RewardMachine r;
    r.state_names = name_list(j, "states");
    r.initial = index_of(r.state_names, j.value("initial", ""), "machine state");
    r.update.assign(r.state_names.size(), std::vector<int>(m.edge_count(), -1));
    r.reward.assign(r.state_names.size(), std::vector<double>(m.edge_count(), 0.0));
    expect(j.contains("rules") && j["rules"].is_array(), "rules must be an array");
    for (const auto& rule : j["rules"]) {
        const int u = index_of(r.state_names, rule.value("u", ""), "machine state");
        const int s = index_of(m.state_names, rule.value("from", ""), "state");
        const int a = index_of(m.action_names, rule.value("action", ""), "action");
        const int to = index_of(m.state_names, rule.value("to", ""), "state");
        const int e = m.edge_id(s, a, to);
        expect(e >= 0, "rule references a disabled action");
        r.update[u][e] = index_of(r.state_names, rule.value("u_next", ""), "machine state");
        expect(rule.contains("reward") && rule["reward"].is_number(),
               "rule needs a numeric reward");
        r.reward[u][e] = rule["reward"].get<double>();
    }
    for (int u = 0; u < r.state_count(); ++u)
        for (int i = 0; i < m.edge_count(); ++i)
            expect(r.update[u][i] >= 0, "rules do not cover the transition domain");
    return r;
}

// ---------------------------------------------------------------------------
// policy files

inline json save_policy(const MemorylessPolicy& p, const Mdp& over) {
    json j;
    j["version"] = "1";
    j["kind"] = "memoryless";
    json entries = json::array();
    for (int s = 0; s < over.state_count(); ++s)
        entries.push_back({{"state", over.state_names[s]},
                           {"action", over.action_names[p.action[s]]}});
    j["entries"] = std::move(entries);
    return j;
}

inline MemorylessPolicy load_policy(const json& j, const Mdp& over) {
    using namespace io_detail;
    expect(j.value("kind", "") == "memoryless", "expected a memoryless policy");
    MemorylessPolicy p;
    p.action.assign(over.state_count(), -1);
    for (const auto& e : j["entries"]) {
        const int s = index_of(over.state_names, e.value("state", ""), "state");
        p.action[s] = index_of(over.action_names, e.value("action", ""), "action");
    }
    for (int s = 0; s < over.state_count(); ++s) {
        expect(p.action[s] >= 0, "policy misses state " + over.state_names[s]);
        expect(over.is_enabled(s, p.action[s]),
               "policy picks a disabled action at " + over.state_names[s]);
    }
    return p;
}

inline json save_policy(const FiniteMemoryPolicy& p, const Mdp& base,
                        const std::vector<std::string>& memory_names,
                        const std::string& memory_source) {
    json j;
    j["version"] = "1";
    j["kind"] = "finite-memory";
    j["memory_source"] = memory_source; // "rm" or "dra"
    j["memory_initial"] = memory_names[p.memory_initial];
    json entries = json::array();
    for (int s = 0; s < base.state_count(); ++s)
        for (int mem = 0; mem < p.memory_count; ++mem)
            entries.push_back({{"state", base.state_names[s]},
                               {"memory", memory_names[mem]},
                               {"action", base.action_names[p.choice[s][mem]]}});
    j["entries"] = std::move(entries);
    return j;
}

} // namespace dra2rm
