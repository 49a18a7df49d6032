#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "lapkit/envcore.hpp"
#include "lapkit/envs.hpp"
#include "lapkit/error.hpp"

namespace lapkit {
namespace {

template <typename F>
ErrorCode code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no lapkit::Error thrown";
  return ErrorCode::kIo;
}

TEST(Rng, EngineIsStandardMt19937_64) {
  // The 10000th output of a default-seeded mt19937_64 is fixed by the C++ standard.
  Rng rng(5489u);
  std::uint64_t x = 0;
  for (int i = 0; i < 10000; ++i) x = rng.next_u64();
  EXPECT_EQ(x, 9981545732273789042ULL);
}

TEST(Rng, UniformUsesTop53Bits) {
  Rng rng(42);
  std::mt19937_64 ref(42);
  for (int i = 0; i < 100; ++i) {
    EXPECT_EQ(rng.uniform(), static_cast<double>(ref() >> 11) / 9007199254740992.0);
  }
}

TEST(Rng, IndexAndNormalStatistics) {
  Rng rng(9);
  std::vector<int> counts(7, 0);
  for (int i = 0; i < 70000; ++i) ++counts[rng.index(7)];
  for (int c : counts) EXPECT_NEAR(c, 10000, 500);
  double sum = 0.0, sq = 0.0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const double v = rng.normal(3.0, 2.0);
    sum += v;
    sq += v * v;
  }
  const double mean = sum / n;
  EXPECT_NEAR(mean, 3.0, 0.03);
  EXPECT_NEAR(std::sqrt(sq / n - mean * mean), 2.0, 0.03);
}

TEST(Rng, SameSeedSameStream) {
  Rng a(123), b(123), c(124);
  bool differs = false;
  for (int i = 0; i < 50; ++i) {
    const double x = a.uniform(-1, 1);
    EXPECT_EQ(x, b.uniform(-1, 1));
    differs |= x != c.uniform(-1, 1);
  }
  EXPECT_TRUE(differs);
}

TEST(Reward, WeightedSumInSpecOrder) {
  RewardSpec spec{{{"a", 2.0}, {"b", -0.5}, {"c", 0.0}}};
  const Features f{{"c", 100.0}, {"b", 4.0}, {"a", 1.5}, {"extra", 9.0}};
  const RewardBreakdown r = compute_reward(f, spec);
  EXPECT_DOUBLE_EQ(r.reward, 2.0 * 1.5 - 0.5 * 4.0);
  ASSERT_EQ(r.terms.size(), 3u);
  EXPECT_EQ(r.terms[0], (Feature{"a", 3.0}));
  EXPECT_EQ(r.terms[1], (Feature{"b", -2.0}));
  EXPECT_EQ(r.terms[2], (Feature{"c", 0.0}));
}

TEST(Reward, MissingFeature) {
  RewardSpec spec{{{"a", 1.0}}};
  EXPECT_EQ(code_of([&] { compute_reward(Features{{"b", 1.0}}, spec); }), ErrorCode::kMissingFeature);
}

TEST(Reward, SpecValidation) {
  RewardSpec dup{{{"a", 1.0}, {"a", 2.0}}};
  EXPECT_EQ(code_of([&] { dup.validate(); }), ErrorCode::kInvalidConfig);
  RewardSpec nan{{{"a", std::nan("")}}};
  EXPECT_EQ(code_of([&] { nan.validate(); }), ErrorCode::kInvalidConfig);
  RewardSpec ok{{{"a", 1.0}}};
  ok.set_weight("a", -3.0);
  EXPECT_EQ(ok.terms[0].weight, -3.0);
  EXPECT_EQ(code_of([&] { ok.set_weight("zzz", 1.0); }), ErrorCode::kInvalidConfig);
}

TEST(Discrete, IndexLayout) {
  const double one[1] = {0.5};
  EXPECT_EQ(discretize_action(0, 3, one), (std::vector<double>{0, 0, 0}));
  EXPECT_EQ(discretize_action(1, 3, one), (std::vector<double>{0.5, 0, 0}));
  EXPECT_EQ(discretize_action(2, 3, one), (std::vector<double>{-0.5, 0, 0}));
  EXPECT_EQ(discretize_action(6, 3, one), (std::vector<double>{0, 0, -0.5}));
  const double per_axis[3] = {0.1, 0.2, 0.3};
  EXPECT_EQ(discretize_action(3, 3, per_axis), (std::vector<double>{0, 0.2, 0}));
  EXPECT_EQ(discrete_action_count(4), 9u);
  EXPECT_EQ(code_of([&] { discretize_action(7, 3, one); }), ErrorCode::kIndexOutOfRange);
  const double two[2] = {0.1, 0.2};
  EXPECT_EQ(code_of([&] { discretize_action(1, 3, two); }), ErrorCode::kInvalidConfig);
}

TEST(EnvIds, RoundTripAndUnknown) {
  for (EnvId id : all_env_ids()) EXPECT_EQ(env_id_from_string(to_string(id)), id);
  try {
    env_id_from_string("bogus");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kUnknownEnv);
    for (EnvId id : all_env_ids()) EXPECT_NE(std::string(e.what()).find(to_string(id)), std::string::npos);
  }
}

TEST(Lifecycle, StepBeforeResetAndAfterDone) {
  EnvConfig config = default_config(EnvId::kReach);
  config.sim.time_limit = 3;
  auto env = make_env(EnvId::kReach, config);
  const double a[3] = {0, 0, 0};
  EXPECT_EQ(code_of([&] { env->step(a); }), ErrorCode::kNotReset);
  env->reset(1);
  StepResult r;
  for (int i = 0; i < 3; ++i) {
    ASSERT_FALSE(env->done());
    r = env->step(a);
  }
  EXPECT_TRUE(r.truncated);
  EXPECT_FALSE(r.terminated);
  EXPECT_TRUE(env->done());
  EXPECT_EQ(env->step_count(), 3);
  EXPECT_DOUBLE_EQ(env->sim_time(), 0.30000000000000004);
  EXPECT_EQ(code_of([&] { env->step(a); }), ErrorCode::kNotReset);
  env->reset(1);
  EXPECT_FALSE(env->done());
  EXPECT_EQ(env->step_count(), 0);
}

TEST(Lifecycle, ActionShapeAndRange) {
  auto env = make_env(EnvId::kReach);
  env->reset(0);
  const double two[2] = {0, 0};
  EXPECT_EQ(code_of([&] { env->step(two); }), ErrorCode::kActionShapeMismatch);
  const double big[3] = {2, 0, 0};
  EXPECT_EQ(code_of([&] { env->step(big); }), ErrorCode::kInvalidAction);
  EXPECT_EQ(code_of([&] { env->step_discrete(0); }), ErrorCode::kActionShapeMismatch);
}

TEST(Lifecycle, DiscreteMode) {
  EnvConfig config = default_config(EnvId::kReach);
  config.action_mode = ActionMode::kDiscrete;
  config.discrete_step_size = {1.0};
  config.params = ReachParams{.randomize_start = false};
  auto env = make_env(EnvId::kReach, config);
  env->reset(4);
  auto& reach = dynamic_cast<ReachEnv&>(*env);
  const Vec3 before = reach.end_effector();
  env->step_discrete(1);  // +x at full speed for one interval
  EXPECT_NEAR(reach.end_effector().x() - before.x(), 30.0 * 0.1, 1e-12);
  EXPECT_EQ(code_of([&] { env->step_discrete(7); }), ErrorCode::kIndexOutOfRange);
}

TEST(Lifecycle, ConfigValidation) {
  EnvConfig c = default_config(EnvId::kReach);
  c.sim.frame_skip = 0;
  EXPECT_EQ(code_of([&] { make_env(EnvId::kReach, c); }), ErrorCode::kInvalidConfig);
  c = default_config(EnvId::kReach);
  c.resolution = 4;
  EXPECT_EQ(code_of([&] { make_env(EnvId::kReach, c); }), ErrorCode::kInvalidConfig);
  c = default_config(EnvId::kReach);
  c.discrete_step_size = {1.5};
  EXPECT_EQ(code_of([&] { make_env(EnvId::kReach, c); }), ErrorCode::kInvalidConfig);
  c = default_config(EnvId::kDeflectSpheres);
  EXPECT_EQ(code_of([&] { make_env(EnvId::kReach, c); }), ErrorCode::kInvalidConfig);
}

}  // namespace
}  // namespace lapkit
