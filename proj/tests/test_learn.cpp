#include <doctest.h>

#include <cmath>

#include "dra2rm/learn.hpp"
#include "dra2rm/translate.hpp"
#include "fixtures.hpp"
#include "generators.hpp"

using namespace dra2rm;

namespace {

template <typename Fn>
void for_each_policy(const Mdp& m, Fn&& fn) {
    MemorylessPolicy p;
    p.action.assign(m.state_count(), 0);
    std::function<void(int)> rec = [&](int s) {
        if (s == m.state_count()) {
            fn(p);
            return;
        }
        for (int a : m.enabled[s]) {
            p.action[s] = a;
            rec(s + 1);
        }
    };
    rec(0);
}

RmProductMdp refuel_product() {
    const Mdp m = fixtures::refuel_mdp();
    const Dra d = fixtures::refuel_dra();
    return build_rm_product(m, fixtures::refuel_reference_rm(m, d));
}

} // namespace

TEST_CASE("required_samples evaluates the prescription") {
    CHECK(required_samples(0.1, 0.1, 0.2, 2, 2) == 508.0);
    CHECK(required_samples(0.5, 0.5, 1.0, 1, 1) == 6.0);
    // shrinking delta never lowers the prescription
    double prev = 0.0;
    for (double delta : {0.5, 0.25, 0.1, 0.05, 0.01}) {
        const double n = required_samples(delta, 0.1, 1.0, 3, 2);
        CHECK(n >= prev);
        prev = n;
    }
}

TEST_CASE("simulators are reproducible and frequency-consistent") {
    const Mdp m = fixtures::two_loop_mdp(0.9, 0.5);
    Simulator a(m, 42), b(m, 42);
    for (int i = 0; i < 1000; ++i) REQUIRE(a.sample(0, 0) == b.sample(0, 0));
    CHECK(a.total_samples() == 1000.0);
    CHECK(a.pair_samples(0, 0) == 1000.0);

    // batched frequencies renormalize and respect the support
    Simulator c(m, 7);
    for (double n : {1000.0, 1e9, 1e30}) {
        const auto freq = c.sample_frequencies(0, 0, n);
        double total = 0.0;
        for (double f : freq) {
            CHECK(f >= 0.0);
            total += f;
        }
        CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("estimates of deterministic models are exact") {
    const Mdp m = fixtures::refuel_mdp();
    Simulator sim(m, 1);
    const MdpEstimate est = estimate_mdp(sim, 1.0);
    for (int s = 0; s < m.state_count(); ++s)
        for (int a : m.enabled[s])
            for (const auto& t : m.row(s, a)) CHECK(est.mdp.prob(s, a, t.to) == t.prob);
    CHECK(is_delta_estimate(est, m, 1e-12));
}

TEST_CASE("estimate support never exceeds the hidden support") {
    Rng rng(107);
    for (int trial = 0; trial < 20; ++trial) {
        const Mdp m = generators::random_mdp(rng);
        Simulator sim(m, 3000 + trial);
        const MdpEstimate est = estimate_mdp(sim, 3.0); // tiny sample on purpose
        for (int s = 0; s < m.state_count(); ++s)
            for (int a : m.enabled[s]) {
                double total = 0.0;
                for (const auto& t : est.mdp.row(s, a)) {
                    CHECK(m.prob(s, a, t.to) > 0.0);
                    total += t.prob;
                }
                CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
            }
    }
}

TEST_CASE("the sampling prescription delivers delta-estimates") {
    // hidden Bernoulli row (0.5, 0.5)
    const Mdp m = fixtures::MdpBuilder({"s0", "s1"}, {"a"}, {})
                      .trans("s0", "a", "s0", 0.5)
                      .trans("s0", "a", "s1", 0.5)
                      .trans("s1", "a", "s1", 1.0)
                      .build("s0");
    const double n = required_samples(0.1, 0.1, 0.5, 2, 1);
    CHECK(n == 439.0); // ceil(100 ln 80)
    int good = 0;
    const int trials = 200;
    for (int t = 0; t < trials; ++t) {
        Simulator sim(m, 5000 + t);
        if (is_delta_estimate(estimate_mdp(sim, n), m, 0.1)) ++good;
    }
    // guaranteed rate 0.9 minus binomial 3 sigma
    const double bound = 0.9 - 3.0 * std::sqrt(0.9 * 0.1 / trials);
    CHECK(good >= static_cast<int>(bound * trials));
}

TEST_CASE("accurate estimates pin down the support") {
    Rng rng(109);
    for (int trial = 0; trial < 10; ++trial) {
        const Mdp m = generators::random_mdp(rng);
        double p_min = 1.0;
        for (int s = 0; s < m.state_count(); ++s)
            for (int a : m.enabled[s])
                for (const auto& t : m.row(s, a))
                    if (t.prob > 0.0) p_min = std::min(p_min, t.prob);
        Simulator sim(m, 8000 + trial);
        const MdpEstimate est = estimate_mdp(sim, 1e7); // far beyond the bound
        double worst = 0.0;
        for (int s = 0; s < m.state_count(); ++s)
            for (int a : m.enabled[s])
                for (const auto& t : m.row(s, a))
                    worst = std::max(worst, std::fabs(est.mdp.prob(s, a, t.to) - t.prob));
        if (worst < p_min) CHECK(is_delta_estimate(est, m, p_min));
    }
}

TEST_CASE("discounted_pac is exact on deterministic models") {
    const Mdp m = fixtures::refuel_mdp();
    const Dra d = fixtures::refuel_dra();
    const RmProductMdp prod = build_rm_product(m, fixtures::refuel_reference_rm(m, d));
    Simulator sim(prod.mdp, 11);
    const MemorylessPolicy p = discounted_pac(
        sim, [&](int v, int a, int to) { return prod.reward_of(v, a, to); }, 0.9, 0.01, 0.1);
    // deterministic transitions make the estimate exact, so the policy is
    // the exact discounted optimum
    const RewardedMdp rm = as_rewarded(prod);
    double best = -1e18;
    for_each_policy(prod.mdp, [&](const MemorylessPolicy& q) {
        best = std::max(best, discounted_value(rm, q, 0.9)[prod.mdp.initial]);
    });
    CHECK(discounted_value(rm, p, 0.9)[prod.mdp.initial] == doctest::Approx(best).epsilon(1e-9));
}

TEST_CASE("discounted_pac hits its accuracy target on seeded trials") {
    const RmProductMdp prod = refuel_product();
    const RewardedMdp rm = as_rewarded(prod);
    const double gamma = 0.95, eps = 0.05;
    double best = -1e18;
    for_each_policy(prod.mdp, [&](const MemorylessPolicy& q) {
        best = std::max(best, discounted_value(rm, q, gamma)[prod.mdp.initial]);
    });
    int good = 0;
    const int trials = 50;
    for (int t = 0; t < trials; ++t) {
        Simulator sim(prod.mdp, 100 + t);
        const MemorylessPolicy p = discounted_pac(
            sim, [&](int v, int a, int to) { return prod.reward_of(v, a, to); }, gamma, eps, 0.1);
        if (discounted_value(rm, p, gamma)[prod.mdp.initial] >= best - eps) ++good;
    }
    CHECK(good >= 45); // 90 percent
}

TEST_CASE("discounted sample sizes grow towards gamma = 1") {
    double prev = 0.0;
    for (double gamma : {0.5, 0.9, 0.99, 0.999}) {
        const double n = discounted_pac_sample_size(4, 2, gamma, 0.1, 0.1);
        CHECK(n > prev);
        prev = n;
    }
}

TEST_CASE("the discount schedule stabilizes on the refuel product") {
    const Mdp m = fixtures::refuel_mdp();
    const Dra d = fixtures::refuel_dra();
    const RewardMachine rm = fixtures::refuel_reference_rm(m, d);
    const Algorithm1Result res = run_algorithm1(m, rm, 30, 0);
    CHECK(res.oracle_gain == doctest::Approx(1.0).epsilon(1e-9));
    REQUIRE(res.stabilized_at > 0);
    CHECK(res.stabilized_at <= 30);
    for (const auto& e : res.entries)
        if (e.k >= res.stabilized_at) CHECK(e.exact_gain == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("a single-policy model is optimal at every k") {
    RewardedMdp one = fixtures::split_gain_mdp();
    // strip the second action so only one policy exists
    one.mdp.enabled[0] = {0};
    one.mdp.rows[0].resize(1);
    one.reward[0].resize(1);
    one.mdp.finalize();
    const RewardMachine rm = fixtures::constant_rm(one);
    const Algorithm1Result res = run_algorithm1(one.mdp, rm, 10, 4);
    CHECK(res.stabilized_at == 2);
    for (const auto& e : res.entries) CHECK(e.optimal);
}

TEST_CASE("the schedule also stabilizes on a multichain instance") {
    const RewardedMdp split = fixtures::split_gain_mdp();
    const RewardMachine rm = fixtures::constant_rm(split);
    const Algorithm1Result res = run_algorithm1(split.mdp, rm, 30, 1);
    CHECK(res.oracle_gain == doctest::Approx(0.93).epsilon(1e-9));
    REQUIRE(res.stabilized_at > 0);
}

TEST_CASE("identical seeds reproduce the whole schedule") {
    const Mdp m = fixtures::refuel_mdp();
    const Dra d = fixtures::refuel_dra();
    const RewardMachine rm = fixtures::refuel_reference_rm(m, d);
    const Algorithm1Result a = run_algorithm1(m, rm, 8, 123);
    const Algorithm1Result b = run_algorithm1(m, rm, 8, 123);
    REQUIRE(a.entries.size() == b.entries.size());
    for (std::size_t i = 0; i < a.entries.size(); ++i) {
        CHECK(a.entries[i].policy.action == b.entries[i].policy.action);
        CHECK(a.entries[i].exact_gain == b.entries[i].exact_gain);
    }
}

TEST_CASE("schedule failures stay within the summable budget") {
    const RewardedMdp split = fixtures::split_gain_mdp();
    const RewardMachine rm = fixtures::constant_rm(split);
    const RmProductMdp prod = build_rm_product(split.mdp, rm);
    const RewardedMdp rewarded = as_rewarded(prod);

    int failures = 0;
    double budget = 0.0;
    const int trials = 3;
    for (int seed = 0; seed < trials; ++seed) {
        const Algorithm1Result res = run_algorithm1(split.mdp, rm, 30, seed);
        for (const auto& e : res.entries) {
            budget += e.delta;
            double best = -1e18;
            for_each_policy(prod.mdp, [&](const MemorylessPolicy& q) {
                best = std::max(best, discounted_value(rewarded, q, e.gamma)[prod.mdp.initial]);
            });
            const double got = discounted_value(rewarded, e.policy, e.gamma)[prod.mdp.initial];
            if (got < best - e.eps) ++failures;
        }
    }
    CHECK(failures <= static_cast<int>(3.0 * budget));
}

TEST_CASE("delta_for_accuracy is positive and monotone") {
    const double d = delta_for_accuracy(1.0, 2, 0.5);
    CHECK(d > 0.0);
    CHECK(d < 1.0);
    double prev = 0.0;
    for (double eps = 0.1; eps < 2.0; eps += 0.2) {
        const double cur = delta_for_accuracy(eps, 3, 0.5);
        CHECK(cur > 0.0);
        CHECK(cur >= prev);
        prev = cur;
    }
}

TEST_CASE("omega_pac is exact on deterministic models") {
    const Mdp m = fixtures::refuel_mdp();
    const Dra d = fixtures::refuel_dra();
    const RewardMachine rm = fixtures::refuel_reference_rm(m, d);
    const OmegaPacResult res = omega_pac(m, rm, 0.5, 0.2, 0.2, 9);
    const RmProductMdp prod = build_rm_product(m, rm);
    CHECK(limit_average(prod, res.product_policy).total == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(res.estimate_gain == doctest::Approx(1.0).epsilon(1e-9));
    // the lifted policy replays the product optimum on the base MDP
    CHECK(res.policy.memory_count == rm.state_count());
    CHECK(acceptance_probability(m, d, res.policy) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("omega_pac sample counts follow the prescriptions") {
    const Mdp m = fixtures::refuel_mdp();
    const Dra d = fixtures::refuel_dra();
    const RewardMachine rm = fixtures::refuel_reference_rm(m, d);
    const OmegaPacResult res = omega_pac(m, rm, 0.5, 0.2, 0.2, 10);
    const int full = m.state_count() * rm.state_count();
    CHECK(res.delta_prime == delta_for_accuracy(0.2, full, 0.5));
    CHECK(res.samples_per_pair ==
          required_samples(res.delta_prime, 0.2, 0.5, full, m.action_count()));
    // and halving delta at least doubles the sampling effort
    const OmegaPacResult tighter = omega_pac(m, rm, 0.5, 0.2, 0.1, 10);
    CHECK(tighter.samples_per_pair >= 2.0 * res.samples_per_pair);
}

TEST_CASE("omega_pac returns near-optimal policies across seeds") {
    const Mdp m = fixtures::refuel_mdp();
    const Dra d = fixtures::refuel_dra();
    const RewardMachine rm = fixtures::refuel_reference_rm(m, d);
    const RmProductMdp prod = build_rm_product(m, rm);
    const double oracle = brute_force_optimal_average(prod).optimal_gain;
    int good = 0;
    for (int seed = 0; seed < 5; ++seed) {
        const OmegaPacResult res = omega_pac(m, rm, 0.5, 0.2, 0.2, seed);
        if (limit_average(prod, res.product_policy).total >= oracle - 0.2) ++good;
    }
    CHECK(good >= 4);
}
