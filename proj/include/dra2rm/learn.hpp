#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "dra2rm/evaluate.hpp"
#include "dra2rm/model.hpp"
#include "dra2rm/product.hpp"
#include "dra2rm/rng.hpp"

namespace dra2rm {

/// Sampling access to a hidden MDP. A fixed seed pins down every draw.
/// Batches beyond the sequential limit use a Gaussian approximation of the
/// multinomial frequencies: the PAC sample prescriptions grow far past
/// anything a loop can execute, and at that scale the approximation error is
/// below double precision anyway.
class Simulator {
  public:
    static constexpr double kSequentialLimit = 1e6;

    Simulator(Mdp hidden, std::uint64_t seed) : mdp_(std::move(hidden)), rng_(seed) {
        counts_.resize(mdp_.state_count());
        for (int s = 0; s < mdp_.state_count(); ++s)
            counts_[s].assign(mdp_.enabled[s].size(), 0.0);
    }

    const Mdp& model() const { return mdp_; } // offline scoring only

    int sample(int s, int a) {
        const auto& row = mdp_.row(s, a);
        double r = rng_.u01();
        int pick = static_cast<int>(row.size()) - 1;
        for (std::size_t i = 0; i + 1 < row.size(); ++i) {
            r -= row[i].prob;
            if (r < 0.0) {
                pick = static_cast<int>(i);
                break;
            }
        }
        bump(s, a, 1.0);
        return row[pick].to;
    }

    /// Empirical frequencies of n draws from row (s, a), aligned with the
    /// row's outcomes.
    std::vector<double> sample_frequencies(int s, int a, double n) {
        if (n < 1.0) throw std::invalid_argument("need at least one draw");
        const auto& row = mdp_.row(s, a);
        std::vector<double> freq(row.size(), 0.0);
        if (n <= kSequentialLimit) {
            const long long draws = static_cast<long long>(n);
            for (long long i = 0; i < draws; ++i) {
                double r = rng_.u01();
                int pick = static_cast<int>(row.size()) - 1;
                for (std::size_t j = 0; j + 1 < row.size(); ++j) {
                    r -= row[j].prob;
                    if (r < 0.0) {
                        pick = static_cast<int>(j);
                        break;
                    }
                }
                freq[pick] += 1.0;
            }
            for (double& f : freq) f /= static_cast<double>(draws);
            bump(s, a, static_cast<double>(draws));
        } else {
            double total = 0.0;
            for (std::size_t j = 0; j < row.size(); ++j) {
                const double p = row[j].prob;
                const double sd = std::sqrt(p * (1.0 - p) / n);
                freq[j] = std::max(p + sd * rng_.gauss(), p > 0.0 ? p * 1e-9 : 0.0);
                total += freq[j];
            }
            for (double& f : freq) f /= total;
            bump(s, a, n);
        }
        return freq;
    }

    double total_samples() const { return total_; }
    double pair_samples(int s, int a) const { return counts_[s][mdp_.enabled_index(s, a)]; }

  private:
    void bump(int s, int a, double n) {
        counts_[s][mdp_.enabled_index(s, a)] += n;
        total_ += n;
    }
    Mdp mdp_;
    Rng rng_;
    std::vector<std::vector<double>> counts_;
    double total_ = 0.0;
};

// ---------------------------------------------------------------------------
// sample-size prescriptions

/// Draws per state-action pair to make the empirical model a
/// (M, delta)-estimate with probability 1 - eps:
/// ceil((1/delta'^2) ln(2 |A| |S|^2 / eps)) with delta' = min(delta, p_min).
/// Returned as a double: prescriptions routinely exceed any integer type.
inline double required_samples(double delta, double eps, double p_min, int n_states,
                               int n_actions) {
    if (!(delta > 0.0 && delta < 1.0) || !(eps > 0.0 && eps < 1.0) ||
        !(p_min > 0.0 && p_min <= 1.0))
        throw std::invalid_argument("delta, eps, p_min must lie in (0,1)");
    const double dp = std::min(delta, p_min);
    return std::ceil(std::log(2.0 * n_actions * static_cast<double>(n_states) * n_states / eps) /
                     (dp * dp));
}

/// Empirical MDP from exactly n draws per enabled state-action pair. Rows
/// keep only observed successors, so the estimate's support never exceeds
/// the hidden one.
struct MdpEstimate {
    Mdp mdp;
    std::vector<std::vector<double>> pair_counts; // aligned with enabled[s]
};

inline MdpEstimate estimate_mdp(Simulator& sim, double n_per_pair) {
    const Mdp& hidden = sim.model();
    MdpEstimate est;
    est.mdp = hidden;
    est.pair_counts.resize(hidden.state_count());
    for (int s = 0; s < hidden.state_count(); ++s) {
        est.pair_counts[s].assign(hidden.enabled[s].size(), n_per_pair);
        for (std::size_t ai = 0; ai < hidden.enabled[s].size(); ++ai) {
            const int a = hidden.enabled[s][ai];
            const auto freq = sim.sample_frequencies(s, a, n_per_pair);
            const auto& row = hidden.row(s, a);
            std::vector<Outcome> out;
            for (std::size_t j = 0; j < row.size(); ++j)
                if (freq[j] > 0.0) out.push_back({row[j].to, freq[j]});
            est.mdp.rows[s][ai] = std::move(out);
        }
    }
    est.mdp.finalize();
    return est;
}

/// True when est is entrywise within delta of the hidden model and has
/// exactly the same support.
inline bool is_delta_estimate(const MdpEstimate& est, const Mdp& hidden, double delta) {
    for (int s = 0; s < hidden.state_count(); ++s)
        for (std::size_t ai = 0; ai < hidden.enabled[s].size(); ++ai) {
            const int a = hidden.enabled[s][ai];
            for (const auto& t : hidden.rows[s][ai]) {
                const double p = est.mdp.prob(s, a, t.to);
                if (std::fabs(p - t.prob) >= delta) return false;
                if ((p > 0.0) != (t.prob > 0.0)) return false;
            }
            for (const auto& t : est.mdp.rows[s][ai])
                if (t.prob > 0.0 && hidden.prob(s, a, t.to) <= 0.0) return false;
        }
    return true;
}

// ---------------------------------------------------------------------------
// PAC solvers

inline RewardedMdp attach_rewards(const Mdp& m,
                                  const std::function<double(int, int, int)>& reward) {
    RewardedMdp r{m, {}};
    r.reward.resize(m.state_count());
    for (int s = 0; s < m.state_count(); ++s)
        for (std::size_t ai = 0; ai < m.enabled[s].size(); ++ai) {
            std::vector<double> rw;
            for (const auto& t : m.rows[s][ai]) rw.push_back(reward(s, m.enabled[s][ai], t.to));
            r.reward[s].push_back(std::move(rw));
        }
    return r;
}

/// Draws per pair the discounted PAC solver prescribes: per-entry model
/// accuracy eps (1-gamma)^2 / (4 |S|) pushed through the sampling bound.
inline double discounted_pac_sample_size(int n_states, int n_actions, double gamma, double eps,
                                         double delta) {
    const double alpha = eps * (1.0 - gamma) * (1.0 - gamma) / (4.0 * n_states);
    return required_samples(std::min(alpha, 0.999999), delta, 1.0, n_states, n_actions);
}

/// Model-based PAC solver for a discounted objective: estimate the model to
/// per-entry accuracy eps (1-gamma)^2 / (4 |S|) and plan on the estimate
/// with slack eps/2. With probability at least 1 - delta the result is
/// eps-optimal for discount gamma.
inline MemorylessPolicy discounted_pac(Simulator& sim,
                                       const std::function<double(int, int, int)>& reward,
                                       double gamma, double eps, double delta) {
    if (!(gamma > 0.0 && gamma < 1.0)) throw std::invalid_argument("gamma must be in (0,1)");
    const double draws = discounted_pac_sample_size(sim.model().state_count(),
                                                    sim.model().action_count(), gamma, eps, delta);
    const MdpEstimate est = estimate_mdp(sim, draws);
    return optimal_discounted(attach_rewards(est.mdp, reward), gamma, eps / 2.0);
}

// ---------------------------------------------------------------------------
// limit-average learning loop

struct ScheduleEntry {
    int k = 0;
    double gamma = 0.0, eps = 0.0, delta = 0.0;
    double samples_per_pair = 0.0;
    MemorylessPolicy policy; // over the machine product
    double exact_gain = 0.0; // offline score against the hidden model
    bool optimal = false;
};

struct Algorithm1Result {
    std::vector<ScheduleEntry> entries;
    double oracle_gain = 0.0;
    int stabilized_at = -1; // least k0 with every later policy optimal
};

/// Discount-schedule loop: for k = 2..k_max solve the discounted problem
/// with gamma = 1 - 1/k, eps = 1/k, delta = 1/k^2 on the machine product,
/// scoring each returned policy offline against the hidden model.
inline Algorithm1Result run_algorithm1(const Mdp& hidden, const RewardMachine& rm, int k_max,
                                       std::uint64_t seed, long oracle_cap = 1'000'000) {
    if (k_max < 2) throw std::invalid_argument("k_max must be at least 2");
    const RmProductMdp prod = build_rm_product(hidden, rm);
    auto reward = [&](int v, int a, int to) { return prod.reward_of(v, a, to); };

    Algorithm1Result res;
    res.oracle_gain = brute_force_optimal_average(prod, oracle_cap).optimal_gain;
    Simulator sim(prod.mdp, seed);
    for (int k = 2; k <= k_max; ++k) {
        ScheduleEntry e;
        e.k = k;
        e.gamma = 1.0 - 1.0 / k;
        e.eps = 1.0 / k;
        e.delta = 1.0 / (static_cast<double>(k) * k);
        e.samples_per_pair = discounted_pac_sample_size(
            prod.mdp.state_count(), prod.mdp.action_count(), e.gamma, e.eps, e.delta);
        e.policy = discounted_pac(sim, reward, e.gamma, e.eps, e.delta);
        e.exact_gain = limit_average(prod, e.policy).total;
        e.optimal = std::fabs(e.exact_gain - res.oracle_gain) <= 1e-9;
        res.entries.push_back(std::move(e));
    }
    for (int i = static_cast<int>(res.entries.size()) - 1; i >= 0; --i) {
        if (!res.entries[i].optimal) break;
        res.stabilized_at = res.entries[i].k;
    }
    return res;
}

// ---------------------------------------------------------------------------
// omega-PAC

/// Model accuracy needed so the optimal gains of the estimate and the truth
/// stay within eps. Both branches are positive: the numerator and
/// denominator logarithms of the reachability branch are negative together.
inline double delta_for_accuracy(double eps, int n_states, double beta) {
    if (!(eps > 0.0 && eps < 2.0)) throw std::invalid_argument("eps must be in (0,2)");
    if (!(beta > 0.0 && beta < 1.0)) throw std::invalid_argument("beta must be in (0,1)");
    const double eps1 = eps / (2.0 * n_states);
    const double delta1 = eps1 * std::log(1.0 - std::pow(beta, n_states)) /
                          (6.0 * n_states * n_states * std::log(eps1 / 6.0));
    const double mixing_bound = 1.0 / beta; // beta <= 1 / T_mix
    const double denom = 24.0 * n_states * std::ceil(std::log2(4.0 / eps1)) * mixing_bound;
    const double delta2 = std::pow(eps1 * eps1 / denom, 2.0);
    return std::min(delta1, delta2);
}

struct OmegaPacResult {
    FiniteMemoryPolicy policy;       // finite-memory on the hidden MDP
    MemorylessPolicy product_policy; // the same policy over the machine product
    double delta_prime = 0.0;        // model accuracy from delta_for_accuracy
    double samples_per_pair = 0.0;
    double estimate_gain = 0.0; // optimal gain of the estimated product
};

/// Model-based PAC procedure for the machine product: derive the model
/// accuracy from (|S x U|, delta, beta), sample every product pair that
/// often, solve the estimate exactly by enumeration, and lift the optimal
/// policy back to a finite-memory policy. With probability at least
/// 1 - eps the result is delta-optimal for the limit average.
inline OmegaPacResult omega_pac(const Mdp& hidden, const RewardMachine& rm, double beta,
                                double eps, double delta, std::uint64_t seed,
                                long oracle_cap = 1'000'000) {
    if (!(beta > 0.0 && beta <= 1.0)) throw std::invalid_argument("beta must be in (0,1]");
    if (!(delta > 0.0)) throw std::invalid_argument("delta must be positive");
    const RmProductMdp prod = build_rm_product(hidden, rm);
    const int full_product_states = hidden.state_count() * rm.state_count();

    OmegaPacResult res;
    res.delta_prime = delta_for_accuracy(std::min(delta, 1.999), full_product_states,
                                         std::min(beta, 0.999999));
    res.samples_per_pair = required_samples(res.delta_prime, eps, beta, full_product_states,
                                            hidden.action_count());

    Simulator sim(prod.mdp, seed);
    const MdpEstimate est = estimate_mdp(sim, res.samples_per_pair);
    const RewardedMdp planned =
        attach_rewards(est.mdp, [&](int v, int a, int to) { return prod.reward_of(v, a, to); });
    const OracleResult solved = brute_force_optimal_average(planned, oracle_cap);
    res.estimate_gain = solved.optimal_gain;
    res.product_policy = solved.optimal_set.front();
    res.policy = lift_policy(res.product_policy, prod, hidden, rm);
    return res;
}

} // namespace dra2rm
