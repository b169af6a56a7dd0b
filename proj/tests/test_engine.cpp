// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <vector>

#include "snspd/engine.hpp"
#include "snspd/rng.hpp"
#include "snspd/source.hpp"

using namespace snspd;

namespace {

// Response that sits so deep on its plateau at bias 20 that the efficiency
// equals eps_max exactly; with eps_max = 1 every photon is accepted.
BiasResponse saturated(double eps_max) {
  BiasResponse r;
  r.eps_max = eps_max;
  r.i_mid = 5.0;
  r.i_width = 0.25;
  r.d_switch = 1e-30;  // darks off at any usable bias
  return r;
}

// Ideal array: transparent elements, no jitter, no dead time, no darks,
// all light on channel 0.
SimConfig ideal_single_channel() {
  SimConfig cfg;
  for (std::size_t i = 0; i < n_elements; ++i) {
    ElementModel& e = cfg.array.elements[i];
    e.index = int(i);
    e.response = saturated(1.0);
    e.dead_time = 0.0;
    e.jitter_fwhm = 0.0;
    e.coupling = i == 0 ? 1.0 : 0.0;
  }
  cfg.op.bias.fill(20.0);
  cfg.source.kind = CwSource{0.0};
  cfg.duration_ps = 1'000'000'000;
  cfg.seed = 9;
  return cfg;
}

std::array<PhotonStream, n_elements> streams_for(const std::vector<std::int64_t>& ch0,
                                                 std::int64_t duration_ps) {
  std::array<PhotonStream, n_elements> streams;
  for (auto& s : streams) s.duration_ps = duration_ps;
  streams[0].arrivals_ps = ch0;
  return streams;
}

bool same_tags(const std::vector<TimeTag>& a, const std::vector<TimeTag>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i].time_ps != b[i].time_ps || a[i].true_time_ps != b[i].true_time_ps ||
        a[i].channel != b[i].channel || a[i].origin != b[i].origin)
      return false;
  return true;
}

}  // namespace

TEST_CASE("a transparent ideal detector registers every photon in place") {
  SimConfig cfg = ideal_single_channel();
  std::vector<std::int64_t> photons = {5, 1000, 1001, 999'999'999};
  auto result = simulate_on_streams(cfg, streams_for(photons, cfg.duration_ps));
  REQUIRE(result.tags.size() == photons.size());
  for (std::size_t i = 0; i < photons.size(); ++i) {
    CHECK(result.tags[i].time_ps == photons[i]);
    CHECK(result.tags[i].true_time_ps == photons[i]);
    CHECK(result.tags[i].channel == 0);
    CHECK(result.tags[i].origin == TagOrigin::photon);
  }
}

TEST_CASE("two photons inside one dead time yield one count") {
  SimConfig cfg = ideal_single_channel();
  cfg.array.elements[0].dead_time = 9.6;  // 9600 ps

  auto blocked = simulate_on_streams(cfg, streams_for({1'000'000, 1'009'599}, cfg.duration_ps));
  CHECK(blocked.tags.size() == 1);
  CHECK(blocked.tags[0].time_ps == 1'000'000);

  // a gap of exactly the dead time registers
  auto boundary = simulate_on_streams(cfg, streams_for({1'000'000, 1'009'600}, cfg.duration_ps));
  CHECK(boundary.tags.size() == 2);
}

TEST_CASE("dead time gates on true times even with heavy jitter") {
  SimConfig cfg = ideal_single_channel();
  for (std::size_t i = 0; i < n_elements; ++i) {
    cfg.array.elements[i].coupling = 0.0625;
    cfg.array.elements[i].dead_time = 9.6;
    cfg.array.elements[i].jitter_fwhm = 86.1;
  }
  cfg.instrument_jitter_fwhm_ps = 22.0;
  cfg.source.kind = CwSource{2e9};
  cfg.duration_ps = 2'000'000'000;
  std::vector<TimeTag> tags = simulate(cfg);
  REQUIRE(tags.size() > 100000);

  CHECK(std::is_sorted(tags.begin(), tags.end(),
                       [](const TimeTag& a, const TimeTag& b) { return a.time_ps < b.time_ps; }));

  std::array<std::vector<std::int64_t>, n_elements> trues;
  bool observed_deviates = false;
  for (const TimeTag& t : tags) {
    trues[std::size_t(t.channel)].push_back(t.true_time_ps);
    observed_deviates = observed_deviates || t.time_ps != t.true_time_ps;
  }
  CHECK(observed_deviates);
  std::size_t violations = 0;
  for (auto& v : trues) {
    std::sort(v.begin(), v.end());
    for (std::size_t i = 1; i < v.size(); ++i)
      if (v[i] - v[i - 1] < 9600) ++violations;
  }
  CHECK(violations == 0);
}

TEST_CASE("a saturated channel counts at the renewal rate") {
  SimConfig cfg = ideal_single_channel();
  cfg.array.elements[0].dead_time = 9.6;
  cfg.source.kind = CwSource{1e10};
  cfg.duration_ps = 1'000'000'000;
  std::vector<TimeTag> tags = simulate(cfg);
  // renewal gaps are 9600 ps + Exp(mean 100 ps): 103093 counts, sigma ~3.3
  double expected = 1e-3 * 1e10 / (1.0 + 1e10 * 9.6e-9);
  CHECK(std::fabs(double(tags.size()) - expected) < 40.0);
  CHECK(double(tags.size()) <= 1e9 / 9600.0 + 1.0);
}

TEST_CASE("dark counts arrive at the biased rate with the dark origin") {
  SimConfig cfg = ideal_single_channel();
  for (std::size_t i = 0; i < n_elements; ++i) {
    cfg.array.elements[i].response = BiasResponse{};  // real response, darks on
    cfg.array.elements[i].coupling = 0.0625;
    cfg.array.elements[i].dead_time = 0.0;
  }
  cfg.op.bias.fill(17.69897000433602);  // 5000 darks/s each
  cfg.source.kind = CwSource{0.0};
  cfg.duration_ps = 100'000'000'000;  // 0.1 s
  std::vector<TimeTag> tags = simulate(cfg);
  for (const TimeTag& t : tags) REQUIRE(t.origin == TagOrigin::dark);
  double expected = 16.0 * 5000.0 * 0.1;
  CHECK(std::fabs(double(tags.size()) - expected) < 3.0 * std::sqrt(expected));
}

TEST_CASE("crosstalk fires at the configured probability with fixed delay") {
  SimConfig cfg = ideal_single_channel();
  cfg.array.crosstalk_prob[0][1] = 0.2;
  cfg.array.crosstalk_prob[1][0] = 0.2;
  cfg.array.crosstalk_delay[0][1] = 1.0;
  cfg.array.crosstalk_delay[1][0] = 1.0;
  cfg.source.kind = CwSource{1e6};
  cfg.duration_ps = 10'000'000'000;  // ~10000 photons on ch0
  std::vector<TimeTag> tags = simulate(cfg);

  std::vector<const TimeTag*> ch0, ch1;
  for (const TimeTag& t : tags) (t.channel == 0 ? ch0 : ch1).push_back(&t);

  double n0 = double(ch0.size());
  CHECK(std::fabs(n0 - 10000.0) < 3.0 * std::sqrt(10000.0));
  // victims: Binomial(n0, 0.2)
  CHECK(std::fabs(double(ch1.size()) - 0.2 * n0) < 3.0 * std::sqrt(n0 * 0.2 * 0.8));
  for (const TimeTag* t : ch1) REQUIRE(t->origin == TagOrigin::crosstalk);

  // single hop: none of the induced ch1 counts fires back at ch0
  for (const TimeTag* t : ch0) REQUIRE(t->origin == TagOrigin::photon);

  // each induced count sits exactly one delay after some aggressor count
  std::vector<std::int64_t> triggers;
  for (const TimeTag* t : ch0) triggers.push_back(t->true_time_ps);
  for (const TimeTag* t : ch1)
    REQUIRE(std::binary_search(triggers.begin(), triggers.end(), t->true_time_ps - 1000));
}

TEST_CASE("crosstalk respects the victim dead time and run duration") {
  SimConfig cfg = ideal_single_channel();
  cfg.array.elements[1].dead_time = 9.6;
  cfg.array.crosstalk_prob[0][1] = 1.0;
  cfg.array.crosstalk_delay[0][1] = 1.0;
  auto result = simulate_on_streams(
      cfg, streams_for({0, 2000, 4000, 999'999'500}, cfg.duration_ps));
  std::vector<std::int64_t> ch1_times;
  for (const TimeTag& t : result.tags)
    if (t.channel == 1) ch1_times.push_back(t.true_time_ps);
  // candidates at 1000, 3000, 5000: the first blocks the other two; the
  // candidate at 1000000500 falls past the end of the run
  CHECK(ch1_times == std::vector<std::int64_t>{1000});
}

TEST_CASE("an all-zero crosstalk matrix never makes crosstalk tags") {
  SimConfig cfg = ideal_single_channel();
  for (std::size_t i = 0; i < n_elements; ++i) cfg.array.elements[i].coupling = 0.0625;
  cfg.source.kind = CwSource{1e8};
  cfg.duration_ps = 1'000'000'000;
  std::size_t non_photon = 0;
  for (const TimeTag& t : simulate(cfg))
    if (t.origin != TagOrigin::photon) ++non_photon;
  CHECK(non_photon == 0);
}

TEST_CASE("thinning the light never increases any channel's count") {
  SimConfig cfg = ideal_single_channel();
  for (std::size_t i = 0; i < n_elements; ++i) {
    cfg.array.elements[i].response = BiasResponse{};
    cfg.array.elements[i].coupling = 0.0625;
    cfg.array.elements[i].dead_time = 9.6;
  }
  cfg.op.bias.fill(17.69897000433602);
  cfg.duration_ps = 1'000'000'000;

  for (int trial = 0; trial < 20; ++trial) {
    std::uint64_t seed = derive_seed(999, 42, std::uint64_t(trial));
    PhotonStream base = gen_cw(5e8, cfg.duration_ps, seed);
    PhotonStream thin = apply_attenuation(base, 3.0, seed + 1);

    std::array<double, n_elements> weights;
    weights.fill(0.0625);
    std::array<PhotonStream, n_elements> full_streams =
        split_to_elements(base, weights, seed + 2);
    std::array<PhotonStream, n_elements> thin_streams;
    // thin each routed stream with the shared photon fate: intersect with
    // the surviving arrivals so the thinned run is a true subset per channel
    for (std::size_t i = 0; i < n_elements; ++i) {
      std::vector<std::int64_t> kept;
      std::set_intersection(full_streams[i].arrivals_ps.begin(),
                            full_streams[i].arrivals_ps.end(), thin.arrivals_ps.begin(),
                            thin.arrivals_ps.end(), std::back_inserter(kept));
      thin_streams[i].duration_ps = cfg.duration_ps;
      thin_streams[i].arrivals_ps = std::move(kept);
    }

    SimConfig run = cfg;
    run.seed = seed + 3;
    auto full = simulate_on_streams(run, full_streams);
    auto less = simulate_on_streams(run, thin_streams);
    std::array<std::size_t, n_elements> full_counts{}, less_counts{};
    for (const TimeTag& t : full.tags) ++full_counts[std::size_t(t.channel)];
    for (const TimeTag& t : less.tags) ++less_counts[std::size_t(t.channel)];
    for (std::size_t i = 0; i < n_elements; ++i) REQUIRE(less_counts[i] <= full_counts[i]);
  }
}

TEST_CASE("simulation is deterministic in the seed") {
  SimConfig cfg = ideal_single_channel();
  for (std::size_t i = 0; i < n_elements; ++i) {
    cfg.array.elements[i].response = BiasResponse{};
    cfg.array.elements[i].coupling = 0.0625;
    cfg.array.elements[i].jitter_fwhm = 86.1;
  }
  cfg.op.bias.fill(17.69897000433602);
  cfg.array.crosstalk_prob[3][4] = 0.05;
  cfg.array.crosstalk_delay[3][4] = 1.0;
  cfg.instrument_jitter_fwhm_ps = 22.0;
  cfg.source.kind = CwSource{1e8};
  cfg.duration_ps = 1'000'000'000;

  SimResult a = simulate_full(cfg);
  SimResult b = simulate_full(cfg);
  CHECK(a.incident_photons == b.incident_photons);
  CHECK(same_tags(a.tags, b.tags));

  cfg.seed = 2;
  SimResult c = simulate_full(cfg);
  CHECK(!same_tags(a.tags, c.tags));
}

TEST_CASE("measured view keeps observed order and strips truth") {
  SimConfig cfg = ideal_single_channel();
  for (std::size_t i = 0; i < n_elements; ++i) {
    cfg.array.elements[i].coupling = 0.0625;
    cfg.array.elements[i].jitter_fwhm = 86.1;
  }
  cfg.source.kind = CwSource{1e8};
  cfg.duration_ps = 100'000'000;
  std::vector<TimeTag> tags = simulate(cfg);
  std::vector<MeasuredTag> measured = measured_view(tags);
  REQUIRE(measured.size() == tags.size());
  for (std::size_t i = 0; i < tags.size(); ++i) {
    CHECK(measured[i].time_ps == tags[i].time_ps);
    CHECK(measured[i].channel == tags[i].channel);
  }
}

TEST_CASE("count_rates matches the analytic detected flux") {
  SimConfig cfg = ideal_single_channel();
  for (std::size_t i = 0; i < n_elements; ++i) {
    ElementModel& e = cfg.array.elements[i];
    e.response = saturated(0.834);
    e.dead_time = 9.6;
    e.coupling = 0.0625;
  }
  cfg.source.kind = CwSource{3e6};
  cfg.duration_ps = 10'000'000'000;  // 10 ms, ~25k counts
  std::vector<TimeTag> tags = simulate(cfg);
  std::array<double, n_elements> rates = count_rates(tags, cfg.duration_ps);
  double sum = 0.0;
  for (double r : rates) sum += r;
  double expected = 0.8327498758863195 * 3e6;
  double sigma = std::sqrt(expected * 0.01) / 0.01;
  CHECK(std::fabs(sum - expected) < 3.0 * sigma);
}

TEST_CASE("photon-origin rates match sde with darks present") {
  SimConfig cfg = ideal_single_channel();
  for (std::size_t i = 0; i < n_elements; ++i) {
    ElementModel& e = cfg.array.elements[i];
    e.response = BiasResponse{};
    e.dead_time = 9.6;
    e.coupling = 0.0625;
  }
  cfg.op.bias.fill(17.69897000433602);
  cfg.source.kind = CwSource{3e6};
  cfg.duration_ps = 10'000'000'000;
  std::vector<TimeTag> tags = simulate(cfg);
  double photon_counts = 0.0, dark_counts = 0.0;
  for (const TimeTag& t : tags) {
    if (t.origin == TagOrigin::photon) photon_counts += 1.0;
    if (t.origin == TagOrigin::dark) dark_counts += 1.0;
  }
  // efficiency at this bias is fractionally below the plateau value
  double eps = 0.834 / (1.0 + std::exp(-(17.69897000433602 - 10.0) / 0.5));
  double per = eps * 0.0625 * 3e6;
  double expected_photons = 0.01 * 16.0 * per / (1.0 + (per + 5000.0) * 9.6e-9);
  CHECK(std::fabs(photon_counts - expected_photons) < 4.0 * std::sqrt(expected_photons));
  double expected_darks = 0.01 * 16.0 * 5000.0 / (1.0 + (per + 5000.0) * 9.6e-9);
  CHECK(std::fabs(dark_counts - expected_darks) < 4.0 * std::sqrt(expected_darks));
}

TEST_CASE("timetag serialization round trips") {
  SimConfig cfg = ideal_single_channel();
  for (std::size_t i = 0; i < n_elements; ++i) {
    cfg.array.elements[i].response = BiasResponse{};
    cfg.array.elements[i].coupling = 0.0625;
    cfg.array.elements[i].jitter_fwhm = 86.1;
  }
  cfg.op.bias.fill(17.69897000433602);
  cfg.source.kind = CwSource{1e8};
  cfg.duration_ps = 100'000'000;
  cfg.seed = 77;
  std::vector<TimeTag> tags = simulate(cfg);
  REQUIRE(!tags.empty());

  std::string text = serialize_timetags(tags, cfg.duration_ps, cfg.seed);
  std::int64_t duration = 0;
  std::uint64_t seed = 0;
  std::vector<TimeTag> back = parse_timetags(text, &duration, &seed);
  CHECK(duration == cfg.duration_ps);
  CHECK(seed == cfg.seed);
  REQUIRE(back.size() == tags.size());
  for (std::size_t i = 0; i < tags.size(); ++i) {
    CHECK(back[i].time_ps == tags[i].time_ps);
    CHECK(back[i].channel == tags[i].channel);
    CHECK(back[i].origin == tags[i].origin);
  }

  std::string measured = serialize_timetags_measured(tags, cfg.duration_ps, cfg.seed);
  CHECK(measured.find("photon") == std::string::npos);
  std::vector<TimeTag> measured_back = parse_timetags(measured, nullptr, nullptr);
  CHECK(measured_back.size() == tags.size());

  CHECK_THROWS_WITH_AS(parse_timetags("bogus", nullptr, nullptr),
                       doctest::Contains("missing v1 header"), std::runtime_error);
}
