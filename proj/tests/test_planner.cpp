#include <cmath>
#include <memory>
#include <random>

#include "doctest.h"
#include "kdp/environments.hpp"
#include "kdp/oracle.hpp"
#include "kdp/planner.hpp"

using namespace kdp;

namespace {

Vec vec1(double a) {
  Vec v(1);
  v << a;
  return v;
}

Mat line_coords(int n) {
  Mat c(n, 1);
  for (int i = 0; i < n; ++i) c(i, 0) = i;
  return c;
}

StateActionKernelConfig narrow_pair_kernel() {
  StateActionKernelConfig cfg;
  cfg.state.bandwidth = 0.1;
  cfg.action_kind = ActionKernelKind::kDelta;
  return cfg;
}

StateKernelConfig narrow_state_kernel() {
  StateKernelConfig cfg;
  cfg.bandwidth = 0.1;
  return cfg;
}

TabularMDP random_mdp(int n, int na, double gamma, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  TabularMDP mdp;
  mdp.gamma = gamma;
  mdp.rewards.resize(n, na);
  for (int a = 0; a < na; ++a) {
    Mat p(n, n);
    for (int x = 0; x < n; ++x) {
      // probabilities quantized to 1/20 so an exhaustive sample with
      // per_pair = 20 reproduces the rows exactly
      Vec raw(n);
      for (int y = 0; y < n; ++y) raw[y] = unif(rng);
      Eigen::VectorXi counts = Eigen::VectorXi::Zero(n);
      for (int c = 0; c < 20; ++c) {
        double u = unif(rng);
        double acc = 0.0;
        Index best = n - 1;
        for (int y = 0; y < n; ++y) {
          acc += raw[y] / raw.sum();
          if (u <= acc) {
            best = y;
            break;
          }
        }
        counts[best]++;
      }
      for (int y = 0; y < n; ++y) p(x, y) = counts[y] / 20.0;
      mdp.rewards(x, a) = unif(rng);
    }
    mdp.transitions.push_back(p);
  }
  mdp.validate();
  return mdp;
}

// exhaustive-sample embedding of a tabular MDP with kernel-orthogonal
// integer states
std::shared_ptr<const ConditionalEmbedding> tabular_embedding(
    const TabularMDP& mdp, int per_pair, double lambda) {
  TransitionSample s =
      exhaustive_sample(mdp, line_coords(int(mdp.num_states())), per_pair);
  return std::make_shared<const ConditionalEmbedding>(ConditionalEmbedding::fit(
      s, narrow_pair_kernel(), narrow_state_kernel(), lambda));
}

RewardFn tabular_reward(const TabularMDP& mdp) {
  return [&mdp](const Vec& x, double a) {
    return mdp.rewards(std::lround(x[0]), std::lround(a));
  };
}

std::vector<double> action_list(int na) {
  std::vector<double> a(na);
  for (int i = 0; i < na; ++i) a[i] = i;
  return a;
}

}  // namespace

TEST_CASE("policy evaluation") {
  TabularMDP mdp = random_mdp(5, 2, 0.9, 3);
  auto emb = tabular_embedding(mdp, 20, 1e-8);
  PolicyFn pi = [](const Vec& x) { return std::lround(x[0]) % 2 == 0 ? 0.0 : 1.0; };

  SUBCASE("gamma = 0 is a single reward sweep") {
    PlannerConfig cfg;
    cfg.gamma = 0.0;
    cfg.threshold = 1e-9;
    cfg.actions = action_list(2);
    ValueEstimate est = evaluate_policy(emb, pi, tabular_reward(mdp), cfg);
    CHECK(est.iterations() == 1);
    for (int x = 0; x < 5; ++x) {
      CHECK(est.value_at(vec1(x)) ==
            doctest::Approx(mdp.rewards(x, std::lround(pi(vec1(x)))))
                .epsilon(1e-12));
    }
  }

  SUBCASE("single self-loop reaches the geometric limit") {
    TabularMDP loop;
    loop.transitions = {Mat::Ones(1, 1)};
    loop.rewards = Mat::Ones(1, 1);
    loop.gamma = 0.9;
    // modest ridge keeps the duplicated-point gram well conditioned; the
    // normalized weights still sum to one exactly
    auto loop_emb = tabular_embedding(loop, 10, 1e-3);
    PlannerConfig cfg;
    cfg.gamma = 0.9;
    cfg.threshold = 1e-9;
    cfg.max_iters = 10000;
    cfg.actions = {0.0};
    ValueEstimate est = evaluate_policy(
        loop_emb, [](const Vec&) { return 0.0; }, tabular_reward(loop), cfg);
    CHECK(std::abs(est.value_at(vec1(0.0)) - 10.0) <= 1e-6);
  }

  SUBCASE("matches the exact policy value on a 5-state MDP") {
    PlannerConfig cfg;
    cfg.gamma = 0.9;
    cfg.threshold = 1e-10;
    cfg.max_iters = 10000;
    cfg.actions = action_list(2);
    ValueEstimate est = evaluate_policy(emb, pi, tabular_reward(mdp), cfg);
    Eigen::VectorXi pi_idx(5);
    for (int x = 0; x < 5; ++x) pi_idx[x] = x % 2;
    Vec truth = exact_policy_value(mdp, pi_idx);
    for (int x = 0; x < 5; ++x) {
      CHECK(std::abs(est.value_at(vec1(x)) - truth[x]) <= 1e-3);
    }
  }

  SUBCASE("policy using an unseen action aborts with the sample index") {
    PlannerConfig cfg;
    cfg.gamma = 0.5;
    cfg.threshold = 1e-6;
    cfg.actions = action_list(2);
    CHECK_THROWS_AS(
        evaluate_policy(
            emb, [](const Vec&) { return 7.0; },
            [](const Vec&, double) { return 0.0; }, cfg),
        UndefinedQueryError);
  }
}

TEST_CASE("value iteration") {
  TabularMDP mdp = random_mdp(5, 2, 0.9, 11);
  auto emb = tabular_embedding(mdp, 20, 1e-8);

  SUBCASE("gamma = 0 returns the max reward") {
    PlannerConfig cfg;
    cfg.gamma = 0.0;
    cfg.threshold = 1e-9;
    cfg.actions = action_list(2);
    ValueEstimate est = value_iteration(emb, tabular_reward(mdp), cfg);
    CHECK(est.iterations() == 1);
    for (int x = 0; x < 5; ++x) {
      CHECK(est.value_at(vec1(x)) ==
            doctest::Approx(mdp.rewards.row(x).maxCoeff()).epsilon(1e-12));
    }
  }

  SUBCASE("dominated action reduces to policy evaluation") {
    TabularMDP dom = mdp;
    // action 0 dominates everywhere; both actions share deterministic
    // cyclic dynamics
    Mat shift = Mat::Zero(5, 5);
    for (int x = 0; x < 5; ++x) shift(x, (x + 1) % 5) = 1.0;
    dom.transitions = {shift, shift};
    dom.rewards.col(0) = Vec::LinSpaced(5, 1.0, 2.0);
    dom.rewards.col(1) = dom.rewards.col(0).array() - 0.5;
    auto dom_emb = tabular_embedding(dom, 20, 1e-8);
    PlannerConfig cfg;
    cfg.gamma = 0.9;
    cfg.threshold = 1e-10;
    cfg.max_iters = 10000;
    cfg.actions = action_list(2);
    ValueEstimate vi = value_iteration(dom_emb, tabular_reward(dom), cfg);
    ValueEstimate pe = evaluate_policy(
        dom_emb, [](const Vec&) { return 0.0; }, tabular_reward(dom), cfg);
    for (int x = 0; x < 5; ++x) {
      CHECK(std::abs(vi.value_at(vec1(x)) - pe.value_at(vec1(x))) <= 1e-6);
    }
  }

  SUBCASE("matches oracle V star within 1e-3") {
    PlannerConfig cfg;
    cfg.gamma = 0.9;
    cfg.threshold = 1e-10;
    cfg.max_iters = 20000;
    cfg.actions = action_list(2);
    ValueEstimate est = value_iteration(emb, tabular_reward(mdp), cfg);
    ExactViResult star = exact_value_iteration(mdp, 1e-12);
    for (int x = 0; x < 5; ++x) {
      CHECK(std::abs(est.value_at(vec1(x)) - star.values[x]) <= 1e-3);
    }
  }

  SUBCASE("identical runs are bit-identical") {
    PlannerConfig cfg;
    cfg.gamma = 0.9;
    cfg.threshold = 1e-8;
    cfg.actions = action_list(2);
    ValueEstimate a = value_iteration(emb, tabular_reward(mdp), cfg);
    ValueEstimate b = value_iteration(emb, tabular_reward(mdp), cfg);
    CHECK((a.values() - b.values()).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("q values and greedy policy") {
  TabularMDP mdp = random_mdp(5, 3, 0.9, 23);
  auto emb = tabular_embedding(mdp, 20, 1e-8);
  PlannerConfig cfg;
  cfg.gamma = 0.9;
  cfg.threshold = 1e-10;
  cfg.max_iters = 20000;
  cfg.actions = action_list(3);

  SUBCASE("gamma = 0 reduces q to the reward") {
    PlannerConfig c0 = cfg;
    c0.gamma = 0.0;
    ValueEstimate est = value_iteration(emb, tabular_reward(mdp), c0);
    CHECK(q_value(est, vec1(2.0), 1.0) ==
          doctest::Approx(mdp.rewards(2, 1)).epsilon(1e-12));
  }

  SUBCASE("greedy argmax and tie-break") {
    // gamma = 0 with a fixed reward profile (0, 5, 1)
    PlannerConfig c0 = cfg;
    c0.gamma = 0.0;
    RewardFn profile = [](const Vec&, double a) {
      return a == 1.0 ? 5.0 : (a == 2.0 ? 1.0 : 0.0);
    };
    auto est = std::make_shared<const ValueEstimate>(
        value_iteration(emb, profile, c0));
    GreedyPolicy greedy(est);
    CHECK(greedy.action_index_at(vec1(0.0)) == 1);

    RewardFn tie = [](const Vec&, double a) { return a == 1.0 ? 0.0 : 3.0; };
    auto est_tie = std::make_shared<const ValueEstimate>(
        value_iteration(emb, tie, c0));
    CHECK(GreedyPolicy(est_tie).action_index_at(vec1(0.0)) == 0);
  }

  SUBCASE("converged q and greedy policy match the oracle") {
    ValueEstimate est = value_iteration(emb, tabular_reward(mdp), cfg);
    ExactViResult star = exact_value_iteration(mdp, 1e-12);
    Mat qs = q_star(mdp, star.values);
    for (int x = 0; x < 5; ++x) {
      for (int a = 0; a < 3; ++a) {
        CHECK(std::abs(q_value(est, vec1(x), a) - qs(x, a)) <= 1e-3);
      }
    }
    auto est_ptr = std::make_shared<const ValueEstimate>(est);
    GreedyPolicy greedy(est_ptr);
    Eigen::VectorXi batched = greedy.action_indices(line_coords(5));
    for (int x = 0; x < 5; ++x) {
      Vec row = qs.row(x);
      std::sort(row.data(), row.data() + row.size());
      double gap = row[2] - row[1];
      if (gap > 1e-2) {
        CHECK(greedy.action_index_at(vec1(x)) == star.policy[x]);
      }
      CHECK(batched[x] == greedy.action_index_at(vec1(x)));
    }
  }
}

TEST_CASE("contraction and convergence diagnostics") {
  GridworldSpec spec = GridworldSpec::with_side(6);
  TabularMDP mdp = gridworld_mdp(spec, 0.9);
  Mat coords = gridworld_state_coords(spec);
  TransitionSample s = sample_mdp(mdp, coords, 300, 2);
  StateActionKernelConfig kcfg;
  kcfg.state.bandwidth = 1.0;
  StateKernelConfig lcfg;
  lcfg.bandwidth = 1.0;
  auto emb = std::make_shared<const ConditionalEmbedding>(
      ConditionalEmbedding::fit(s, kcfg, lcfg, 1e-3));
  RewardFn reward = [&spec](const Vec& x, double) {
    return gridworld_reward(spec, x[0], x[1]);
  };
  PlannerConfig cfg;
  cfg.gamma = 0.9;
  cfg.threshold = 1e-8;
  cfg.max_iters = 1000;
  cfg.actions = action_list(4);

  SUBCASE("100 random pairs stay below gamma") {
    double ratio = contraction_check(emb, reward, cfg, 100, 7);
    CHECK(ratio <= cfg.gamma + 1e-9);
    CHECK(ratio > 0.0);
  }

  SUBCASE("sweep residuals satisfy the geometric bound") {
    ValueEstimate est = value_iteration(emb, reward, cfg);
    std::vector<double> trace = convergence_trace(est);
    REQUIRE(trace.size() >= 2);
    for (std::size_t k = 0; k < trace.size(); ++k) {
      CHECK(trace[k] <=
            std::pow(cfg.gamma, double(k)) * trace[0] * (1.0 + 1e-9));
    }
    CHECK(est.final_error() == trace.back());
  }

  SUBCASE("single self-loop residuals are exactly geometric") {
    TabularMDP loop;
    loop.transitions = {Mat::Ones(1, 1)};
    loop.rewards = Mat::Ones(1, 1);
    loop.gamma = 0.9;
    TransitionSample ls = exhaustive_sample(loop, line_coords(1), 10);
    auto loop_emb = std::make_shared<const ConditionalEmbedding>(
        ConditionalEmbedding::fit(ls, narrow_pair_kernel(),
                                  narrow_state_kernel(), 1e-3));
    PlannerConfig lcfg2;
    lcfg2.gamma = 0.9;
    lcfg2.threshold = 1e-6;
    lcfg2.max_iters = 100;
    lcfg2.actions = {0.0};
    ValueEstimate est = value_iteration(
        loop_emb, [](const Vec&, double) { return 1.0; }, lcfg2);
    std::vector<double> trace = convergence_trace(est);
    for (std::size_t k = 0; k < std::min<std::size_t>(trace.size(), 20); ++k) {
      CHECK(trace[k] ==
            doctest::Approx(std::pow(0.9, double(k))).epsilon(1e-6));
    }
  }

  SUBCASE("gamma = 0 trace is a single sweep") {
    PlannerConfig c0 = cfg;
    c0.gamma = 0.0;
    ValueEstimate est = value_iteration(emb, reward, c0);
    std::vector<double> trace = convergence_trace(est);
    CHECK(trace.size() == 1);
  }
}
