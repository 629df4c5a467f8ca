#include <doctest.h>

#include <cmath>
#include <random>

#include "shift/defense.hpp"

using namespace shift;

TEST_CASE("clean stats: median and MAD of a small sample") {
  // sorted: 1 2 3 4 10 -> median 3; |x-3| sorted: 0 1 1 2 7 -> MAD 1
  defense::CleanStats st = defense::clean_stats({3, 1, 10, 2, 4});
  CHECK(st.median == 3.0);
  CHECK(st.mad == 1.0);
  CHECK(st.count == 5);

  // even count averages the middle pair
  defense::CleanStats ev = defense::clean_stats({1, 2, 3, 4});
  CHECK(ev.median == 2.5);
  CHECK(ev.mad == 1.0);  // deviations 1.5 0.5 0.5 1.5 -> (0.5+1.5)/2

  CHECK_THROWS_AS(defense::clean_stats({}), InsufficientDataError);
}

TEST_CASE("MAD rule: three consecutive exceedances flag, broken runs do not") {
  defense::CleanStats st{2.0, 0.5, 100};
  defense::DetectorConfig cfg;  // threshold 5 -> bound 2 + 5*0.5 = 4.5

  auto flags = defense::mad_detect({4.6, 4.7, 4.8}, st, cfg);
  REQUIRE(flags.size() == 3);
  CHECK_FALSE(flags[0]);
  CHECK_FALSE(flags[1]);
  CHECK(flags[2]);

  auto broken = defense::mad_detect({4.6, 4.2, 4.8}, st, cfg);
  CHECK(std::count(broken.begin(), broken.end(), true) == 0);

  // a longer run keeps flagging once the window fills
  auto run = defense::mad_detect({4.6, 4.7, 4.8, 4.9, 1.0, 4.6, 4.6}, st, cfg);
  CHECK(run == std::vector<bool>{false, false, true, true, false, false, false});

  auto shorter = defense::mad_detect({9.0, 9.0}, st, cfg);
  CHECK(std::count(shorter.begin(), shorter.end(), true) == 0);
}

TEST_CASE("MAD rule extremes: infinite threshold never flags, zero threshold flags any run") {
  defense::CleanStats st{2.0, 0.5, 100};
  std::vector<double> series{100, 200, 300, 400};

  defense::DetectorConfig lax;
  lax.mad_threshold = 1e18;
  auto none = defense::mad_detect(series, st, lax);
  CHECK(std::count(none.begin(), none.end(), true) == 0);

  defense::DetectorConfig strictest;
  strictest.mad_threshold = 0.0;  // bound = median
  auto all = defense::mad_detect({2.1, 2.1, 2.1}, st, strictest);
  CHECK(all[2]);
}

TEST_CASE("CUSUM: centered series never flags, sustained shift flags at the strict boundary") {
  defense::CleanStats st{5.0, 2.0, 100};
  defense::DetectorConfig cfg;  // drift 1.5, threshold 3

  CHECK_FALSE(defense::cusum_detect({5, 5, 5, 5, 5, 5}, st, cfg).has_value());

  // residual +3 per step: g = 1.5, 3.0, 4.5; 3.0 is not > 3, so index 2 flags
  defense::CleanStats unitized{0.0, 1.0, 100};
  auto hit = defense::cusum_detect({3, 3, 3, 3}, unitized, cfg);
  REQUIRE(hit.has_value());
  CHECK(*hit == 2);

  defense::CleanStats degenerate{5.0, 0.0, 100};
  CHECK_THROWS_AS(defense::cusum_detect({5, 5}, degenerate, cfg), DegenerateStatsError);
}

TEST_CASE("CUSUM resets below zero and ignores isolated spikes") {
  defense::CleanStats st{0.0, 1.0, 100};
  defense::DetectorConfig cfg;
  // single +4 spike: g = 2.5, then negatives drain it back to zero
  CHECK_FALSE(defense::cusum_detect({4, -1, -1, 0, 0, 0, 0}, st, cfg).has_value());
}

TEST_CASE("purify with zero noise is the identity; bad levels are rejected") {
  diffusion::NoiseParams np;
  auto m = diffusion::make_denoiser(np, 8, 2, 16, 16, 3);

  env::Frame obs = env::Frame::Random(8, 8).abs();
  obs = obs.cwiseMin(1.0);
  diffusion::HistoryWindow h;
  h.frames = {env::Frame::Zero(8, 8), env::Frame::Zero(8, 8)};
  h.actions = {0, 1};

  env::Frame same = defense::purify(m, obs, h, 0.0, 17);
  CHECK((same - obs).abs().maxCoeff() == 0.0);

  CHECK_THROWS_AS(defense::purify(m, obs, h, -1.0, 17), DomainError);
  CHECK_THROWS_AS(defense::purify(m, obs, h, np.sigma_max + 1.0, 17), DomainError);
}

TEST_CASE("purify is deterministic given its seed and bounded to [0,1]") {
  diffusion::NoiseParams np;
  auto m = diffusion::make_denoiser(np, 8, 2, 16, 16, 3);
  env::Frame obs = env::Frame::Constant(8, 8, 0.4);
  diffusion::HistoryWindow h;
  h.frames = {env::Frame::Zero(8, 8), env::Frame::Zero(8, 8)};
  h.actions = {2, 2};

  double sp = defense::default_sigma_partial(np);
  CHECK(sp == doctest::Approx(diffusion::sigma_schedule(np)[1]));

  env::Frame a = defense::purify(m, obs, h, sp, 99);
  env::Frame b = defense::purify(m, obs, h, sp, 99);
  env::Frame c = defense::purify(m, obs, h, sp, 100);
  CHECK((a - b).abs().maxCoeff() == 0.0);
  CHECK((a - c).abs().maxCoeff() > 0.0);  // different noise, different result
  CHECK(a.minCoeff() >= 0.0);
  CHECK(a.maxCoeff() <= 1.0);
}

TEST_CASE("detector config validation") {
  defense::DetectorConfig bad;
  bad.cusum_drift = 0.0;
  CHECK_THROWS_AS(defense::validate(bad), ConfigError);
  bad = {};
  bad.window = 0;
  CHECK_THROWS_AS(defense::validate(bad), ConfigError);
  bad = {};
  bad.mad_threshold = -0.1;
  CHECK_THROWS_AS(defense::validate(bad), ConfigError);
}
