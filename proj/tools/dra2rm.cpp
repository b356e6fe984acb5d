// Command-line front end: translate omega-regular objectives (DRA over MDP
// transition labels) into limit-average reward machines, certify the
// translation, decompose products, evaluate policies, and run the learners.
//
// Exit codes: 0 ok, 1 check failed, 2 invalid input, 3 cap exceeded.

#include <chrono>
#include <fstream>
#include <future>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "dra2rm/components.hpp"
#include "dra2rm/evaluate.hpp"
#include "dra2rm/json_io.hpp"
#include "dra2rm/learn.hpp"
#include "dra2rm/model.hpp"
#include "dra2rm/product.hpp"
#include "dra2rm/translate.hpp"

using namespace dra2rm;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitCheckFailed = 1;
constexpr int kExitInvalidInput = 2;
constexpr int kExitCapExceeded = 3;

json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw invalid_input_error("cannot open " + path);
    try {
        return json::parse(in);
    } catch (const json::parse_error& ex) {
        throw invalid_input_error(path + ": " + ex.what());
    }
}

void write_output(const json& j, const std::string& path) {
    if (path.empty() || path == "-") {
        std::cout << j.dump(2) << "\n";
        return;
    }
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << j.dump(2) << "\n";
}

Instance load_validated_instance(const std::string& path) {
    const Instance inst = load_instance(read_json_file(path));
    const ValidationReport vm = validate_mdp(inst.mdp);
    const ValidationReport vd = validate_dra(inst.dra, static_cast<int>(inst.mdp.ap.size()));
    if (!vm.ok() || !vd.ok()) {
        std::string msg = path + " failed validation:";
        for (const auto& i : vm.issues) msg += " [mdp " + i.kind + " @ " + i.where + "]";
        for (const auto& i : vd.issues) msg += " [dra " + i.kind + " @ " + i.where + "]";
        throw invalid_input_error(msg);
    }
    return inst;
}

struct Stopwatch {
    std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
    double ms() const {
        return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start)
            .count();
    }
};

json report_skeleton(const std::string& command) {
    json j;
    j["version"] = "1";
    j["command"] = command;
    j["checks"] = json::array();
    return j;
}

json ec_to_json(const EndComponent& c, const Mdp& product_mdp) {
    json states = json::array(), actions = json::array();
    for (std::size_t i = 0; i < c.states.size(); ++i) {
        states.push_back(product_mdp.state_names[c.states[i]]);
        json acts = json::array();
        for (int a : c.actions[i]) acts.push_back(product_mdp.action_names[a]);
        actions.push_back(std::move(acts));
    }
    return {{"states", std::move(states)}, {"actions", std::move(actions)}};
}

// ---------------------------------------------------------------------------

int cmd_validate(const std::string& instance_path, const std::string& output) {
    Stopwatch timer;
    json rep = report_skeleton("validate");
    rep["args"] = {{"instance", instance_path}};
    const Instance inst = load_instance(read_json_file(instance_path));
    const ValidationReport vm = validate_mdp(inst.mdp);
    const ValidationReport vd = validate_dra(inst.dra, static_cast<int>(inst.mdp.ap.size()));
    json issues = json::array();
    for (const auto& i : vm.issues) issues.push_back({{"part", "mdp"}, {"kind", i.kind}, {"where", i.where}});
    for (const auto& i : vd.issues) issues.push_back({{"part", "dra"}, {"kind", i.kind}, {"where", i.where}});
    rep["results"] = {{"issues", issues}, {"valid", vm.ok() && vd.ok()}};
    rep["checks"].push_back({{"name", "instance valid"}, {"pass", vm.ok() && vd.ok()}});
    rep["elapsed_ms"] = timer.ms();
    write_output(rep, output);
    return vm.ok() && vd.ok() ? kExitOk : kExitInvalidInput;
}

int cmd_translate(const std::string& instance_path, const std::string& mode,
                  const std::string& support_mode, std::size_t max_rm_states,
                  const std::string& output) {
    const Instance inst = load_validated_instance(instance_path);
    RewardMachine rm;
    if (mode == "general") {
        rm = translate_general(inst.mdp, inst.dra, max_rm_states);
    } else {
        SupportSet support;
        if (support_mode == "declared") {
            if (!inst.declared_support)
                throw invalid_input_error("--support declared needs a support section");
            support = *inst.declared_support;
        } else {
            support = SupportSet::from_probs(inst.mdp);
        }
        rm = translate_known_support(inst.mdp, inst.dra, support);
    }
    bool any_reward = false;
    for (const auto& row : rm.reward)
        for (double x : row) any_reward |= x != 0.0;
    if (!any_reward)
        std::cerr << "warning: the machine never pays a reward "
                     "(no accepting component is reachable)\n";
    write_output(save_rm(rm, inst.mdp), output);
    return kExitOk;
}

int cmd_certify(const std::string& instance_path, const std::string& rm_path, int max_states,
                long max_policies, const std::string& output) {
    Stopwatch timer;
    const Instance inst = load_validated_instance(instance_path);
    const RewardMachine rm = load_rm(read_json_file(rm_path), inst.mdp);
    CertifyOptions opt;
    opt.max_joint_states = max_states;
    opt.max_policies = max_policies;
    const CertificationReport cert = certify_translation(inst.mdp, inst.dra, rm, opt);

    json rep = report_skeleton("certify");
    rep["args"] = {{"instance", instance_path}, {"rm", rm_path}, {"max_states", max_states}};
    rep["results"] = {{"max_gain", cert.max_gain},
                      {"max_acceptance", cert.max_acceptance},
                      {"policies", cert.policies},
                      {"joint_states", cert.joint_states},
                      {"worst_sandwich_gap", cert.worst_sandwich_gap},
                      {"certified", cert.certified}};
    rep["checks"].push_back({{"name", "max gain equals max acceptance"}, {"pass", cert.max_values_match}});
    rep["checks"].push_back(
        {{"name", "gain maximizers maximize acceptance"}, {"pass", cert.maximizers_transfer}});
    rep["checks"].push_back(
        {{"name", "gain bounded by acceptance per policy"}, {"pass", cert.sandwich_holds}});
    rep["elapsed_ms"] = timer.ms();
    write_output(rep, output);
    return cert.certified ? kExitOk : kExitCheckFailed;
}

int cmd_decompose(const std::string& instance_path, bool exhaustive, const std::string& output) {
    Stopwatch timer;
    const Instance inst = load_validated_instance(instance_path);
    const ProductMdp p = build_product(inst.mdp, inst.dra,
                                       exhaustive ? ProductMode::Exhaustive : ProductMode::Reachable);
    json rep = report_skeleton("decompose");
    rep["args"] = {{"instance", instance_path}, {"exhaustive", exhaustive}};

    json mecs = json::array();
    for (const auto& mec : mec_decomposition(p)) {
        json entry = ec_to_json(mec, p.mdp);
        const auto [ok, pair] = is_accepting(mec, p.pairs);
        entry["accepting"] = ok;
        if (ok) entry["witness_pair"] = pair;
        mecs.push_back(std::move(entry));
    }
    rep["results"]["mecs"] = std::move(mecs);

    json maximal = json::array();
    for (const auto& [aec, pair] : maximal_accepting_ecs(p)) {
        json entry = ec_to_json(aec, p.mdp);
        entry["witness_pair"] = pair;
        maximal.push_back(std::move(entry));
    }
    rep["results"]["maximal_accepting_ecs"] = std::move(maximal);

    const CoveringCollection cov = covering_asecs(p, CoveringMode::Efficient);
    json members = json::array();
    for (const auto& c : cov.members) members.push_back(ec_to_json(c, p.mdp));
    json cover = json::object();
    for (int v = 0; v < p.mdp.state_count(); ++v)
        if (cov.covered(v)) cover[p.mdp.state_names[v]] = cov.cover_index[v];
    rep["results"]["covering"] = {{"members", std::move(members)}, {"cover_index", std::move(cover)}};
    rep["results"]["product_states"] = p.mdp.state_count();
    rep["elapsed_ms"] = timer.ms();
    write_output(rep, output);
    return kExitOk;
}

int cmd_evaluate(const std::string& instance_path, const std::string& rm_path,
                 const std::string& policy_path, const std::string& output) {
    Stopwatch timer;
    const Instance inst = load_validated_instance(instance_path);
    const RewardMachine rm = load_rm(read_json_file(rm_path), inst.mdp);
    const RmProductMdp prod = build_rm_product(inst.mdp, rm);
    const MemorylessPolicy policy = load_policy(read_json_file(policy_path), prod.mdp);

    const GainReport gain = limit_average(prod, policy);
    const FiniteMemoryPolicy lifted = lift_policy(policy, prod, inst.mdp, rm);
    const double acceptance = acceptance_probability(inst.mdp, inst.dra, lifted);

    json rep = report_skeleton("evaluate");
    rep["args"] = {{"instance", instance_path}, {"rm", rm_path}, {"policy", policy_path}};
    json classes = json::array();
    for (std::size_t i = 0; i < gain.classes.size(); ++i) {
        json entry = ec_to_json(gain.classes[i], prod.mdp);
        entry["reach_probability"] = gain.reach[i];
        entry["gain"] = gain.gain[i];
        entry["bias"] = gain.bias[i];
        classes.push_back(std::move(entry));
    }
    rep["results"] = {{"gain", gain.total},
                      {"acceptance_probability", acceptance},
                      {"classes", std::move(classes)},
                      {"product_states", prod.mdp.state_count()}};
    rep["elapsed_ms"] = timer.ms();
    write_output(rep, output);
    return kExitOk;
}

json run_solver_trial(const std::string& alg, const Instance& inst, const RewardMachine& rm,
                      std::uint64_t seed, int kmax, double gamma, double eps, double delta,
                      double beta) {
    const RmProductMdp prod = build_rm_product(inst.mdp, rm);
    json trial;
    trial["seed"] = seed;
    if (alg == "alg1") {
        const Algorithm1Result res = run_algorithm1(inst.mdp, rm, kmax, seed);
        trial["oracle_gain"] = res.oracle_gain;
        trial["stabilized_at"] = res.stabilized_at;
        json iters = json::array();
        for (const auto& e : res.entries)
            iters.push_back({{"k", e.k},
                             {"gamma", e.gamma},
                             {"eps", e.eps},
                             {"delta", e.delta},
                             {"samples_per_pair", e.samples_per_pair},
                             {"exact_gain", e.exact_gain},
                             {"optimal", e.optimal}});
        trial["iterations"] = std::move(iters);
    } else if (alg == "omega-pac") {
        const OmegaPacResult res = omega_pac(inst.mdp, rm, beta, eps, delta, seed);
        trial["delta_prime"] = res.delta_prime;
        trial["samples_per_pair"] = res.samples_per_pair;
        trial["estimate_gain"] = res.estimate_gain;
        trial["exact_gain"] = limit_average(prod, res.product_policy).total;
        trial["policy"] = save_policy(res.product_policy, prod.mdp);
    } else { // discounted
        Simulator sim(prod.mdp, seed);
        const MemorylessPolicy p = discounted_pac(
            sim, [&](int v, int a, int to) { return prod.reward_of(v, a, to); }, gamma, eps, delta);
        trial["samples_per_pair"] = discounted_pac_sample_size(
            prod.mdp.state_count(), prod.mdp.action_count(), gamma, eps, delta);
        trial["exact_gain"] = limit_average(prod, p).total;
        trial["discounted_value"] = discounted_value(as_rewarded(prod), p, gamma)[prod.mdp.initial];
        trial["policy"] = save_policy(p, prod.mdp);
    }
    return trial;
}

int cmd_solve(const std::string& instance_path, const std::string& rm_path, const std::string& alg,
              std::uint64_t seed, int kmax, double gamma, double eps, double delta, double beta,
              int trials, int jobs, const std::string& output) {
    Stopwatch timer;
    const Instance inst = load_validated_instance(instance_path);
    const RewardMachine rm = load_rm(read_json_file(rm_path), inst.mdp);

    json rep = report_skeleton("solve");
    rep["args"] = {{"instance", instance_path}, {"rm", rm_path},   {"alg", alg},
                   {"kmax", kmax},              {"gamma", gamma},  {"eps", eps},
                   {"delta", delta},            {"beta", beta},    {"trials", trials},
                   {"jobs", jobs}};
    rep["seed"] = seed;

    std::vector<json> results(trials);
    if (jobs > 1) {
        std::vector<std::future<json>> futures;
        for (int t = 0; t < trials; ++t)
            futures.push_back(std::async(std::launch::async, [&, t] {
                return run_solver_trial(alg, inst, rm, seed + t, kmax, gamma, eps, delta, beta);
            }));
        for (int t = 0; t < trials; ++t) results[t] = futures[t].get();
    } else {
        for (int t = 0; t < trials; ++t)
            results[t] = run_solver_trial(alg, inst, rm, seed + t, kmax, gamma, eps, delta, beta);
    }
    rep["results"]["trials"] = results;
    rep["elapsed_ms"] = timer.ms();
    write_output(rep, output);
    return kExitOk;
}

int cmd_simulate(const std::string& instance_path, const std::string& rm_path,
                 const std::string& policy_path, bool uniform, long steps, std::uint64_t seed,
                 const std::string& output) {
    Stopwatch timer;
    const Instance inst = load_validated_instance(instance_path);
    std::optional<RewardMachine> rm;
    if (!rm_path.empty()) rm = load_rm(read_json_file(rm_path), inst.mdp);
    std::optional<MemorylessPolicy> policy;
    if (!policy_path.empty()) policy = load_policy(read_json_file(policy_path), inst.mdp);
    if (!policy && !uniform)
        throw invalid_input_error("simulate needs --policy or --uniform");

    Rng rng(seed);
    int s = inst.mdp.initial;
    int u = rm ? rm->initial : 0;
    double total_reward = 0.0;
    std::vector<long> visits(inst.mdp.state_count(), 0);
    for (long i = 0; i < steps; ++i) {
        ++visits[s];
        const auto& enabled = inst.mdp.enabled[s];
        const int a = policy ? policy->action[s]
                             : enabled[rng.below(static_cast<int>(enabled.size()))];
        const auto& row = inst.mdp.row(s, a);
        std::vector<double> w;
        for (const auto& t : row) w.push_back(t.prob);
        const int to = row[rng.discrete(w)].to;
        if (rm) {
            const auto [u2, pay] = rm_step(*rm, inst.mdp, u, s, a, to);
            total_reward += pay;
            u = u2;
        }
        s = to;
    }

    json rep = report_skeleton("simulate");
    rep["args"] = {{"instance", instance_path}, {"rm", rm_path},
                   {"policy", policy_path},     {"uniform", uniform},
                   {"steps", steps}};
    rep["seed"] = seed;
    json visit_json = json::object();
    for (int v = 0; v < inst.mdp.state_count(); ++v)
        visit_json[inst.mdp.state_names[v]] = visits[v];
    rep["results"] = {{"final_state", inst.mdp.state_names[s]},
                      {"visits", std::move(visit_json)},
                      {"average_reward", steps > 0 ? total_reward / static_cast<double>(steps) : 0.0}};
    if (rm) rep["results"]["final_machine_state"] = rm->state_names[u];
    rep["elapsed_ms"] = timer.ms();
    write_output(rep, output);
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"omega-regular objectives as limit-average reward machines"};
    app.require_subcommand(1);

    std::string instance, rm_path, policy_path, output = "-";
    std::string mode = "known-support", support = "from-instance", alg = "alg1";
    std::size_t max_rm_states = 1'000'000;
    int max_states = 14;
    long max_policies = 1'000'000;
    bool exhaustive = false, uniform = false;
    std::uint64_t seed = 0;
    int kmax = 30, trials = 1, jobs = 1;
    long steps = 10'000;
    double gamma = 0.99, eps = 0.1, delta = 0.1, beta = 0.5;

    auto* v = app.add_subcommand("validate", "check an instance file");
    v->add_option("--instance", instance)->required();
    v->add_option("--output", output);

    auto* t = app.add_subcommand("translate", "build a reward machine from an instance");
    t->add_option("--instance", instance)->required();
    t->add_option("--mode", mode)->check(CLI::IsMember({"known-support", "general"}));
    t->add_option("--support", support)->check(CLI::IsMember({"from-instance", "declared"}));
    t->add_option("--max-rm-states", max_rm_states);
    t->add_option("--output", output);

    auto* c = app.add_subcommand("certify", "certify optimality preservation of a machine");
    c->add_option("--instance", instance)->required();
    c->add_option("--rm", rm_path)->required();
    c->add_option("--max-states", max_states);
    c->add_option("--max-policies", max_policies);
    c->add_option("--output", output);

    auto* d = app.add_subcommand("decompose", "end components of the DRA product");
    d->add_option("--instance", instance)->required();
    d->add_flag("--exhaustive", exhaustive);
    d->add_option("--output", output);

    auto* e = app.add_subcommand("evaluate", "gain and acceptance of a product policy");
    e->add_option("--instance", instance)->required();
    e->add_option("--rm", rm_path)->required();
    e->add_option("--policy", policy_path)->required();
    e->add_option("--output", output);

    auto* s = app.add_subcommand("solve", "run a learner against the instance");
    s->add_option("--instance", instance)->required();
    s->add_option("--rm", rm_path)->required();
    s->add_option("--alg", alg)->check(CLI::IsMember({"alg1", "omega-pac", "discounted"}));
    s->add_option("--seed", seed)->required();
    s->add_option("--kmax", kmax);
    s->add_option("--gamma", gamma);
    s->add_option("--eps", eps);
    s->add_option("--delta", delta);
    s->add_option("--beta", beta);
    s->add_option("--trials", trials);
    s->add_option("--jobs", jobs);
    s->add_option("--output", output);

    auto* sim = app.add_subcommand("simulate", "roll out a policy on the base MDP");
    sim->add_option("--instance", instance)->required();
    sim->add_option("--rm", rm_path);
    sim->add_option("--policy", policy_path);
    sim->add_flag("--uniform", uniform);
    sim->add_option("--steps", steps);
    sim->add_option("--seed", seed)->required();
    sim->add_option("--output", output);

    CLI11_PARSE(app, argc, argv);

    try {
        if (v->parsed()) return cmd_validate(instance, output);
        if (t->parsed()) return cmd_translate(instance, mode, support, max_rm_states, output);
        if (c->parsed()) return cmd_certify(instance, rm_path, max_states, max_policies, output);
        if (d->parsed()) return cmd_decompose(instance, exhaustive, output);
        if (e->parsed()) return cmd_evaluate(instance, rm_path, policy_path, output);
        if (s->parsed())
            return cmd_solve(instance, rm_path, alg, seed, kmax, gamma, eps, delta, beta, trials,
                             jobs, output);
        if (sim->parsed())
            return cmd_simulate(instance, rm_path, policy_path, uniform, steps, seed, output);
    } catch (const cap_exceeded_error& ex) {
        std::cerr << "error: " << ex.what() << "\n";
        return kExitCapExceeded;
    } catch (const invalid_input_error& ex) {
        std::cerr << "error: " << ex.what() << "\n";
        return kExitInvalidInput;
    } catch (const std::invalid_argument& ex) {
        std::cerr << "error: " << ex.what() << "\n";
        return kExitInvalidInput;
    } catch (const std::exception& ex) {
        std::cerr << "error: " << ex.what() << "\n";
        return kExitInvalidInput;
    }
    return kExitOk;
}
