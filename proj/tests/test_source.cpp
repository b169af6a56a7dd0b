// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdint>

#include "snspd/rng.hpp"
#include "snspd/source.hpp"

using namespace snspd;

namespace {

bool sorted_in_range(const PhotonStream& s) {
  return std::is_sorted(s.arrivals_ps.begin(), s.arrivals_ps.end()) &&
         (s.arrivals_ps.empty() ||
          (s.arrivals_ps.front() >= 0 && s.arrivals_ps.back() < s.duration_ps));
}

}  // namespace

TEST_CASE("cw stream count and order") {
  PhotonStream s = gen_cw(3e6, 1'000'000'000, 21);  // 1 ms, expect 3000
  CHECK(sorted_in_range(s));
  CHECK(std::fabs(double(s.arrivals_ps.size()) - 3000.0) < 3.0 * std::sqrt(3000.0));
}

TEST_CASE("cw inter-arrival mean within one percent at a million photons") {
  PhotonStream s = gen_cw(1e8, 10'000'000'000, 22);  // 10 ms, expect 1e6
  REQUIRE(s.arrivals_ps.size() > 900000);
  double mean_gap = double(s.arrivals_ps.back() - s.arrivals_ps.front()) /
                    double(s.arrivals_ps.size() - 1);
  CHECK(std::fabs(mean_gap - 10000.0) < 100.0);
}

TEST_CASE("cw generation is deterministic in the seed") {
  PhotonStream a = gen_cw(1e7, 1'000'000'000, 5);
  PhotonStream b = gen_cw(1e7, 1'000'000'000, 5);
  PhotonStream c = gen_cw(1e7, 1'000'000'000, 6);
  CHECK(a.arrivals_ps == b.arrivals_ps);
  CHECK(a.arrivals_ps != c.arrivals_ps);
}

TEST_CASE("pulsed photons sit on the pulse grid when the width is zero") {
  PhotonStream s = gen_pulsed(5e7, 0.2, 0.0, 2'000'000'000, 31);  // 1e5 pulses
  CHECK(sorted_in_range(s));
  CHECK(std::fabs(double(s.arrivals_ps.size()) - 20000.0) < 3.0 * std::sqrt(20000.0));
  bool on_grid = true;
  for (std::int64_t t : s.arrivals_ps) on_grid = on_grid && t % 20000 == 0;
  CHECK(on_grid);
}

TEST_CASE("pulsed spread reproduces the configured width") {
  PhotonStream s = gen_pulsed(5e7, 1.0, 8.0, 2'000'000'000, 32);
  REQUIRE(s.arrivals_ps.size() > 90000);
  double sum = 0.0, sum2 = 0.0;
  for (std::int64_t t : s.arrivals_ps) {
    double r = double(t) - std::round(double(t) / 20000.0) * 20000.0;
    sum += r;
    sum2 += r * r;
  }
  double n = double(s.arrivals_ps.size());
  double var = sum2 / n - (sum / n) * (sum / n);
  // 8 ps FWHM as sigma, plus 1/12 from the ps quantization
  double expected = std::sqrt(8.0 * 8.0 / (kFwhmPerSigma * kFwhmPerSigma) + 1.0 / 12.0);
  CHECK(std::fabs(std::sqrt(var) - expected) < 0.02 * expected);
}

TEST_CASE("attenuation thins by the configured power ratio") {
  PhotonStream s = gen_cw(1e8, 1'000'000'000, 41);  // ~1e5 photons
  double n = double(s.arrivals_ps.size());
  PhotonStream thinned = apply_attenuation(s, 10.0, 42);
  CHECK(thinned.duration_ps == s.duration_ps);
  CHECK(sorted_in_range(thinned));
  CHECK(std::fabs(double(thinned.arrivals_ps.size()) - 0.1 * n) <
        3.0 * std::sqrt(n * 0.1 * 0.9));
  CHECK(std::includes(s.arrivals_ps.begin(), s.arrivals_ps.end(),
                      thinned.arrivals_ps.begin(), thinned.arrivals_ps.end()));

  PhotonStream same = apply_attenuation(s, 0.0, 43);
  CHECK(same.arrivals_ps == s.arrivals_ps);
}

TEST_CASE("split routes photons by the coupling weights") {
  PhotonStream s = gen_cw(1e8, 1'000'000'000, 51);
  std::array<double, n_elements> weights;
  weights.fill(0.0625);
  auto parts = split_to_elements(s, weights, 52);

  std::size_t total = 0;
  double expected = double(s.arrivals_ps.size()) / 16.0;
  double sigma = std::sqrt(double(s.arrivals_ps.size()) * 0.0625 * 0.9375);
  for (const PhotonStream& p : parts) {
    CHECK(p.duration_ps == s.duration_ps);
    CHECK(sorted_in_range(p));
    CHECK(std::fabs(double(p.arrivals_ps.size()) - expected) < 3.0 * sigma);
    total += p.arrivals_ps.size();
  }
  // weights sum to exactly 1, so no photon is dropped
  CHECK(total == s.arrivals_ps.size());
}

TEST_CASE("split drops the unrouted fraction and rejects weights above one") {
  PhotonStream s = gen_cw(1e8, 1'000'000'000, 53);
  std::array<double, n_elements> weights;
  weights.fill(0.05);  // sums to 0.8
  auto parts = split_to_elements(s, weights, 54);
  std::size_t total = 0;
  for (const PhotonStream& p : parts) total += p.arrivals_ps.size();
  double n = double(s.arrivals_ps.size());
  CHECK(std::fabs(double(total) - 0.8 * n) < 3.0 * std::sqrt(n * 0.8 * 0.2));

  weights.fill(0.07);  // sums to 1.12
  CHECK_THROWS_WITH_AS(split_to_elements(s, weights, 55),
                       doctest::Contains("weights exceed unity"), std::invalid_argument);
}

TEST_CASE("generate applies attenuation to the configured source") {
  SourceModel m;
  m.kind = CwSource{1e8};
  m.attenuation_db = 10.0;
  PhotonStream s = generate(m, 1'000'000'000, 61);
  CHECK(sorted_in_range(s));
  CHECK(std::fabs(double(s.arrivals_ps.size()) - 1e4) < 3.0 * std::sqrt(1e4));
  CHECK(source_mean_rate(m) == doctest::Approx(1e7).epsilon(1e-12));

  PhotonStream again = generate(m, 1'000'000'000, 61);
  CHECK(s.arrivals_ps == again.arrivals_ps);
}

TEST_CASE("source validation rejects bad parameters") {
  SourceModel m;
  m.kind = CwSource{-1.0};
  CHECK_THROWS_WITH_AS(validate(m), doctest::Contains("rate must be nonnegative"),
                       std::invalid_argument);
  m.kind = CwSource{1e6};
  m.attenuation_db = -3.0;
  CHECK_THROWS_WITH_AS(validate(m), doctest::Contains("attenuation must be nonnegative"),
                       std::invalid_argument);
  m.attenuation_db = 0.0;
  m.kind = PulsedSource{0.0, 8.0, 0.1};
  CHECK_THROWS_WITH_AS(validate(m), doctest::Contains("rep_rate must be positive"),
                       std::invalid_argument);
}

TEST_CASE("photon stream serialization round trip") {
  PhotonStream s = gen_cw(1e7, 1'000'000'000, 71);
  std::string text = serialize(s);
  CHECK(text.rfind("# photon_stream v1 duration_ps=1000000000", 0) == 0);
  PhotonStream back = parse_photon_stream(text);
  CHECK(back.duration_ps == s.duration_ps);
  CHECK(back.arrivals_ps == s.arrivals_ps);

  PhotonStream empty;
  empty.duration_ps = 777;
  PhotonStream empty_back = parse_photon_stream(serialize(empty));
  CHECK(empty_back.duration_ps == 777);
  CHECK(empty_back.arrivals_ps.empty());

  CHECK_THROWS_WITH_AS(parse_photon_stream("not a stream"),
                       doctest::Contains("missing v1 header"), std::runtime_error);
}
