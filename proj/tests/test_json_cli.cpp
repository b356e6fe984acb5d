#include <doctest.h>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <string>

#include "dra2rm/json_io.hpp"
#include "dra2rm/translate.hpp"
#include "fixtures.hpp"
#include "generators.hpp"

using namespace dra2rm;

namespace {

Instance refuel_instance() {
    Instance inst;
    inst.mdp = fixtures::refuel_mdp();
    inst.dra = fixtures::refuel_dra();
    return inst;
}

struct CliRunner {
    std::string binary;
    std::string dir;

    static CliRunner make() {
        CliRunner r;
        const char* env = std::getenv("DRA2RM_CLI");
        r.binary = env ? env : "";
        r.dir = "/tmp/dra2rm_cli_test_" + std::to_string(::getpid());
        if (std::system(("mkdir -p " + r.dir).c_str()) != 0) r.binary.clear();
        return r;
    }
    bool available() const { return !binary.empty(); }

    int run(const std::string& args) const {
        const std::string cmd = binary + " " + args + " >/dev/null 2>&1";
        const int status = std::system(cmd.c_str());
        return WEXITSTATUS(status);
    }
    std::string path(const std::string& name) const { return dir + "/" + name; }
    void write(const std::string& name, const json& j) const {
        std::ofstream out(path(name));
        out << j.dump(2);
    }
    json read(const std::string& name) const {
        std::ifstream in(path(name));
        return json::parse(in);
    }
};

} // namespace

TEST_CASE("instance files round-trip") {
    Instance inst = refuel_instance();
    inst.declared_support = SupportSet::from_probs(inst.mdp);
    const Instance back = load_instance(save_instance(inst));

    CHECK(back.mdp.state_names == inst.mdp.state_names);
    CHECK(back.mdp.action_names == inst.mdp.action_names);
    CHECK(back.mdp.ap == inst.mdp.ap);
    CHECK(back.mdp.initial == inst.mdp.initial);
    CHECK(back.mdp.enabled == inst.mdp.enabled);
    for (int s = 0; s < inst.mdp.state_count(); ++s)
        for (int a : inst.mdp.enabled[s])
            for (const auto& t : inst.mdp.row(s, a)) {
                CHECK(back.mdp.prob(s, a, t.to) == t.prob);
                CHECK(back.mdp.label(s, a, t.to) == inst.mdp.label(s, a, t.to));
            }
    CHECK(back.dra.delta == inst.dra.delta);
    CHECK(back.dra.initial == inst.dra.initial);
    REQUIRE(back.dra.pairs.size() == inst.dra.pairs.size());
    CHECK(back.dra.pairs[0].acc == inst.dra.pairs[0].acc);
    REQUIRE(back.declared_support.has_value());
    CHECK(back.declared_support->edge_mask == inst.declared_support->edge_mask);
}

TEST_CASE("random instances survive the round-trip") {
    Rng rng(113);
    for (int trial = 0; trial < 10; ++trial) {
        Instance inst;
        inst.mdp = generators::random_mdp(rng);
        inst.dra = generators::random_dra(rng, 3, 1);
        const Instance back = load_instance(save_instance(inst));
        CHECK(back.mdp.enabled == inst.mdp.enabled);
        CHECK(back.dra.delta == inst.dra.delta);
        for (int s = 0; s < inst.mdp.state_count(); ++s)
            for (int a : inst.mdp.enabled[s])
                for (const auto& t : inst.mdp.row(s, a))
                    CHECK(back.mdp.prob(s, a, t.to) == doctest::Approx(t.prob).epsilon(1e-15));
    }
}

TEST_CASE("reward machine files round-trip") {
    const Instance inst = refuel_instance();
    const RewardMachine rm = translate_known_support(inst.mdp, inst.dra,
                                                     SupportSet::from_probs(inst.mdp));
    const RewardMachine back = load_rm(save_rm(rm, inst.mdp), inst.mdp);
    CHECK(back.state_names == rm.state_names);
    CHECK(back.initial == rm.initial);
    CHECK(back.update == rm.update);
    CHECK(back.reward == rm.reward);
}

TEST_CASE("policy files round-trip and validate") {
    const Instance inst = refuel_instance();
    const RmProductMdp prod =
        build_rm_product(inst.mdp, fixtures::refuel_reference_rm(inst.mdp, inst.dra));
    MemorylessPolicy p;
    p.action.resize(prod.mdp.state_count());
    for (int v = 0; v < prod.mdp.state_count(); ++v) p.action[v] = prod.mdp.enabled[v][0];
    const MemorylessPolicy back = load_policy(save_policy(p, prod.mdp), prod.mdp);
    CHECK(back.action == p.action);

    json broken = save_policy(p, prod.mdp);
    broken["entries"].erase(0);
    CHECK_THROWS_AS(load_policy(broken, prod.mdp), invalid_input_error);
}

TEST_CASE("incomplete reward machine files are rejected") {
    const Instance inst = refuel_instance();
    json j = save_rm(fixtures::zero_rm(inst.mdp), inst.mdp);
    j["rules"].erase(2);
    CHECK_THROWS_AS(load_rm(j, inst.mdp), invalid_input_error);
}

TEST_CASE("cli pipeline: validate, translate, certify, evaluate") {
    const CliRunner cli = CliRunner::make();
    if (!cli.available()) {
        MESSAGE("DRA2RM_CLI not set; skipping subprocess checks");
        return;
    }
    Instance inst = refuel_instance();
    cli.write("refuel.json", save_instance(inst));

    CHECK(cli.run("validate --instance " + cli.path("refuel.json")) == 0);
    CHECK(cli.run("translate --instance " + cli.path("refuel.json") + " --output " +
                  cli.path("rm.json")) == 0);
    CHECK(cli.run("certify --instance " + cli.path("refuel.json") + " --rm " +
                  cli.path("rm.json") + " --output " + cli.path("cert.json")) == 0);
    const json cert = cli.read("cert.json");
    CHECK(cert["results"]["certified"] == true);
    CHECK(cert["results"]["max_gain"].get<double>() == doctest::Approx(1.0));

    // the optimal policy scores gain 1 and acceptance 1
    const RewardMachine rm = load_rm(cli.read("rm.json"), inst.mdp);
    const RmProductMdp prod = build_rm_product(inst.mdp, rm);
    MemorylessPolicy pistar;
    pistar.action.resize(prod.mdp.state_count());
    for (int v = 0; v < prod.mdp.state_count(); ++v) {
        const auto [s, u] = prod.back[v];
        pistar.action[v] = (s == 0 && u == 0) ? 1 : inst.mdp.enabled[s][0];
    }
    cli.write("pistar.json", save_policy(pistar, prod.mdp));
    CHECK(cli.run("evaluate --instance " + cli.path("refuel.json") + " --rm " +
                  cli.path("rm.json") + " --policy " + cli.path("pistar.json") + " --output " +
                  cli.path("eval.json")) == 0);
    const json eval = cli.read("eval.json");
    CHECK(eval["results"]["gain"].get<double>() == doctest::Approx(1.0));
    CHECK(eval["results"]["acceptance_probability"].get<double>() == doctest::Approx(1.0));

    CHECK(cli.run("decompose --instance " + cli.path("refuel.json") + " --exhaustive --output " +
                  cli.path("dec.json")) == 0);
    const json dec = cli.read("dec.json");
    CHECK(dec["results"]["mecs"].size() == 3);
    CHECK(dec["results"]["covering"]["members"].size() == 1);

    CHECK(cli.run("simulate --instance " + cli.path("refuel.json") + " --rm " +
                  cli.path("rm.json") + " --policy-missing-ok --uniform --steps 500 --seed 5 "
                  "--output " + cli.path("simu.json")) != 0); // unknown flag is an error
    CHECK(cli.run("simulate --instance " + cli.path("refuel.json") + " --rm " +
                  cli.path("rm.json") + " --uniform --steps 500 --seed 5 --output " +
                  cli.path("simu.json")) == 0);
    CHECK(cli.read("simu.json")["results"].contains("average_reward"));
}

TEST_CASE("cli exit codes distinguish failure modes") {
    const CliRunner cli = CliRunner::make();
    if (!cli.available()) {
        MESSAGE("DRA2RM_CLI not set; skipping subprocess checks");
        return;
    }
    Instance inst = refuel_instance();
    cli.write("refuel.json", save_instance(inst));
    cli.write("rm.json", save_rm(fixtures::refuel_reference_rm(inst.mdp, inst.dra), inst.mdp));
    cli.write("zero.json", save_rm(fixtures::zero_rm(inst.mdp), inst.mdp));
    {
        std::ofstream bad(cli.path("bad.json"));
        bad << "{ not json";
    }

    // malformed input
    CHECK(cli.run("translate --instance " + cli.path("bad.json")) == 2);
    // a machine that fails certification
    CHECK(cli.run("certify --instance " + cli.path("refuel.json") + " --rm " +
                  cli.path("zero.json")) == 1);
    // caps
    CHECK(cli.run("certify --instance " + cli.path("refuel.json") + " --rm " +
                  cli.path("rm.json") + " --max-states 3") == 3);
    CHECK(cli.run("translate --instance " + cli.path("refuel.json") +
                  " --mode general --max-rm-states 5") == 3);
    // empty accepting pairs still translate (warning only)
    json no_pairs = save_instance(inst);
    no_pairs["dra"]["pairs"] = json::array();
    cli.write("nopairs.json", no_pairs);
    CHECK(cli.run("translate --instance " + cli.path("nopairs.json")) == 0);
}

TEST_CASE("cli solve report echoes the seed and parameters") {
    const CliRunner cli = CliRunner::make();
    if (!cli.available()) {
        MESSAGE("DRA2RM_CLI not set; skipping subprocess checks");
        return;
    }
    Instance inst = refuel_instance();
    cli.write("refuel.json", save_instance(inst));
    cli.write("rm.json", save_rm(fixtures::refuel_reference_rm(inst.mdp, inst.dra), inst.mdp));
    CHECK(cli.run("solve --instance " + cli.path("refuel.json") + " --rm " + cli.path("rm.json") +
                  " --alg alg1 --kmax 8 --seed 17 --output " + cli.path("solve.json")) == 0);
    const json rep = cli.read("solve.json");
    CHECK(rep["seed"] == 17);
    CHECK(rep["results"]["trials"].size() == 1);
    CHECK(rep["results"]["trials"][0]["stabilized_at"].get<int>() >= 2);
    // rerunning with the same seed reproduces the log
    CHECK(cli.run("solve --instance " + cli.path("refuel.json") + " --rm " + cli.path("rm.json") +
                  " --alg alg1 --kmax 8 --seed 17 --output " + cli.path("solve2.json")) == 0);
    json a = cli.read("solve.json"), b = cli.read("solve2.json");
    a.erase("elapsed_ms");
    b.erase("elapsed_ms");
    CHECK(a == b);

    // independent trials, run in parallel, still seeded individually
    CHECK(cli.run("solve --instance " + cli.path("refuel.json") + " --rm " + cli.path("rm.json") +
                  " --alg omega-pac --beta 0.5 --eps 0.2 --delta 0.2 --seed 30 --trials 2 "
                  "--jobs 2 --output " + cli.path("solve3.json")) == 0);
    const json par = cli.read("solve3.json");
    REQUIRE(par["results"]["trials"].size() == 2);
    CHECK(par["results"]["trials"][0]["seed"] == 30);
    CHECK(par["results"]["trials"][1]["seed"] == 31);
}
