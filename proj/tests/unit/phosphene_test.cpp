#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "spv/errors.hpp"
#include "spv/phosphene.hpp"
#include "support/oracles.hpp"

using namespace spv;

namespace {

const AxonBundle& default_bundle() {
  static const AxonBundle b = build_bundle(AxonGrowthParams{});
  return b;
}

Stimulus random_stimulus(std::mt19937_64& rng, std::size_t n, double hi = 1.0) {
  std::uniform_real_distribution<double> u(0.0, hi);
  Stimulus s;
  for (std::size_t i = 0; i < n; ++i) s.amplitudes.push_back(u(rng));
  return s;
}

}  // namespace

TEST_CASE("scoreboard weight closed forms") {
  const ElectrodeSpec e{"E", {100, -40}, 50};
  CHECK(scoreboard_weight(e, {100, -40}, 300) == 1.0);
  CHECK(scoreboard_weight(e, {400, -40}, 300) == doctest::Approx(std::exp(-0.5)).epsilon(1e-14));
  CHECK(scoreboard_weight(e, {100, 860}, 300) == doctest::Approx(std::exp(-4.5)).epsilon(1e-14));
  CHECK(std::exp(-0.5) == doctest::Approx(0.60653).epsilon(1e-5));
}

TEST_CASE("axon weight reduces to scoreboard at the soma for tiny lambda") {
  const AxonBundle& b = default_bundle();
  const ElectrodeSpec e{"E", {-500, 200}, 100};
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-2500, 2500);
  for (int i = 0; i < 200; ++i) {
    const RetinalPoint p{u(rng), u(rng)};
    const FiberSample s = soma_attach(p, b);
    const double expect = scoreboard_weight(e, b[s.trajectory].points[s.point], 300);
    CHECK(axonmap_weight(e, p, b, 300, 1.0) == doctest::Approx(expect).epsilon(1e-12));
  }
}

TEST_CASE("axon weight near 1 with the electrode on a distal sample and huge lambda") {
  const AxonBundle& b = default_bundle();
  const AxonTrajectory& fiber = b[200];
  const std::size_t soma = fiber.points.size() - 1;
  const ElectrodeSpec e{"E", fiber.points[soma / 2], 100};
  // Only the axonal decay along the arc to the soma remains.
  const double arc = fiber.cum_len_um[soma] - fiber.cum_len_um[soma / 2];
  const double expect = std::exp(-arc * arc / (2 * 1e12));
  CHECK(expect > 0.9999);
  CHECK(axonmap_weight(e, fiber, soma, 300, 1e6) == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("axon weight matches brute-force enumeration") {
  const AxonBundle& b = default_bundle();
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-3000, 3000), rho(100, 600), lam(50, 3000);
  for (int i = 0; i < 300; ++i) {
    const ElectrodeSpec e{"E", {u(rng), u(rng)}, 100};
    const RetinalPoint p{u(rng), u(rng)};
    const double r = rho(rng), l = lam(rng);
    CHECK(std::abs(axonmap_weight(e, p, b, r, l) - oracle::axon_map(e, p, b, r, l)) <= 1e-12);
  }
}

TEST_CASE("eps = 0 map equals the dense oracle, both models") {
  const ElectrodeArray array = build_grid_array(GridLayout{});
  const PerceptGrid grid{32, 20, 18, 11};
  std::mt19937_64 rng(9);
  for (ModelKind kind : {ModelKind::Scoreboard, ModelKind::AxonMap}) {
    ModelParams m;
    m.kind = kind;
    m.eps = 0.0;
    const AxonBundle* bundle = kind == ModelKind::AxonMap ? &default_bundle() : nullptr;
    const SensitivityMap map = build_sensitivity_map(array, bundle, m, grid);
    const auto w = oracle::dense_weights(array, bundle, m, grid);
    for (int k = 0; k < 5; ++k) {
      const Stimulus s = random_stimulus(rng, array.size());
      const Frame f = render_percept(map, s, 1e9);
      const auto d = oracle::dense_render(w, array.size(), s.amplitudes, 1e9);
      CHECK(oracle::max_abs_diff(f.values(), d) <= 1e-12);
    }
  }
}

TEST_CASE("eps > 0 error bound and entry thresholding") {
  const ElectrodeArray array = build_grid_array(GridLayout{});
  const PerceptGrid grid{32, 20, 18, 11};
  ModelParams m;
  m.kind = ModelKind::Scoreboard;
  m.eps = 0.05;
  const SensitivityMap map = build_sensitivity_map(array, nullptr, m, grid);
  const auto w = oracle::dense_weights(array, nullptr, m, grid);
  std::size_t expected_entries = 0;
  for (double v : w) expected_entries += v > m.eps;
  CHECK(map.entry_count() == expected_entries);

  std::mt19937_64 rng(13);
  const Stimulus s = random_stimulus(rng, array.size());
  double sum_amp = 0;
  for (double a : s.amplitudes) sum_amp += a;
  const Frame f = render_percept(map, s, 1e9);
  const auto d = oracle::dense_render(w, array.size(), s.amplitudes, 1e9);
  CHECK(oracle::max_abs_diff(f.values(), d) <= m.eps * sum_amp);
}

TEST_CASE("high eps keeps only pixels on electrodes") {
  const ElectrodeArray array = build_grid_array({2, 2, 2000, 0, {0, 0}});
  ModelParams m;
  m.kind = ModelKind::Scoreboard;
  m.eps = 0.999;
  const PerceptGrid grid{96, 60, 18, 11};
  const SensitivityMap map = build_sensitivity_map(array, nullptr, m, grid);
  for (std::size_t px = 0; px < map.pixel_count(); ++px) {
    const auto ent = map.entries(px);
    for (std::size_t k = 0; k < ent.electrodes.size(); ++k) {
      const RetinalPoint p = oracle::pixel_retina(grid, static_cast<int>(px % 96),
                                                  static_cast<int>(px / 96));
      CHECK(distance(p, array[ent.electrodes[k]].center) < 300 * std::sqrt(2 * 0.001001));
    }
  }
}

TEST_CASE("single centered electrode: peak at the nearest pixel and radial symmetry") {
  const ElectrodeArray array({{"E", {0, 0}, 100}});
  ModelParams m;
  m.kind = ModelKind::Scoreboard;
  m.eps = 0;
  const PerceptGrid grid{96, 60, 18, 11};
  const SensitivityMap map = build_sensitivity_map(array, nullptr, m, grid);
  const Frame f = render_percept(map, Stimulus{{1.0}}, 1.0);
  double peak = -1;
  int px = -1, py = -1;
  for (int y = 0; y < 60; ++y)
    for (int x = 0; x < 96; ++x)
      if (f.at(x, y) > peak) peak = f.at(x, y), px = x, py = y;
  // Grid center falls between pixels 47/48 and 29/30.
  CHECK((px == 47 || px == 48));
  CHECK((py == 29 || py == 30));
  // Mirror pixels are equidistant from the center.
  for (int y = 0; y < 60; ++y)
    for (int x = 0; x < 96; ++x) {
      CHECK(std::abs(f.at(x, y) - f.at(95 - x, y)) <= 1e-6);
      CHECK(std::abs(f.at(x, y) - f.at(x, 59 - y)) <= 1e-6);
    }
}

TEST_CASE("render: zeros, linearity, superposition, monotonicity, range") {
  const ElectrodeArray array = build_grid_array(GridLayout{});
  const PerceptGrid grid;
  for (ModelKind kind : {ModelKind::Scoreboard, ModelKind::AxonMap}) {
    ModelParams m;
    m.kind = kind;
    const SensitivityMap map = build_sensitivity_map(
        array, kind == ModelKind::AxonMap ? &default_bundle() : nullptr, m, grid);

    const Frame zero = render_percept(map, Stimulus{std::vector<double>(60, 0.0)});
    for (double v : zero.values()) CHECK(v == 0.0);

    std::mt19937_64 rng(21);
    for (int k = 0; k < 20; ++k) {
      // Unsaturated: amplitudes small enough that no pixel reaches the clamp.
      const Stimulus s1 = random_stimulus(rng, 60, 0.15);
      const Stimulus s2 = random_stimulus(rng, 60, 0.15);
      Stimulus sum, half;
      for (std::size_t i = 0; i < 60; ++i) {
        sum.amplitudes.push_back(s1.amplitudes[i] + s2.amplitudes[i]);
        half.amplitudes.push_back(0.5 * s1.amplitudes[i]);
      }
      const Frame f1 = render_percept(map, s1), f2 = render_percept(map, s2);
      const Frame fs = render_percept(map, sum), fh = render_percept(map, half);
      for (std::size_t p = 0; p < f1.size(); ++p) {
        REQUIRE(fs.values()[p] < 1.0);
        CHECK(std::abs(fs.values()[p] - f1.values()[p] - f2.values()[p]) <= 1e-6);
        CHECK(std::abs(fh.values()[p] - 0.5 * f1.values()[p]) <= 1e-6);
      }
    }

    Stimulus s = random_stimulus(rng, 60);
    const Frame before = render_percept(map, s);
    s.amplitudes[17] = std::min(1.0, s.amplitudes[17] + 0.3);
    const Frame after = render_percept(map, s);
    for (std::size_t p = 0; p < before.size(); ++p) {
      CHECK(after.values()[p] >= before.values()[p]);
      CHECK(after.values()[p] <= 1.0);
      CHECK(after.values()[p] >= 0.0);
    }
  }
}

TEST_CASE("render rejects bad stimuli") {
  const ElectrodeArray array = build_grid_array(GridLayout{});
  ModelParams m;
  m.kind = ModelKind::Scoreboard;
  const SensitivityMap map = build_sensitivity_map(array, nullptr, m, PerceptGrid{});
  CHECK_THROWS_AS(render_percept(map, Stimulus{std::vector<double>(59, 0.0)}), ValidationError);
  CHECK_THROWS_AS(render_percept(map, Stimulus{std::vector<double>(60, 1.5)}), ValidationError);
}

TEST_CASE("model parameter validation") {
  ModelParams m;
  m.rho_um = 0;
  CHECK_THROWS_AS(validate(m), ValidationError);
  m = {};
  m.lambda_um = -1;
  CHECK_THROWS_AS(validate(m), ValidationError);
  m = {};
  m.eps = 1.0;
  CHECK_THROWS_AS(validate(m), ValidationError);
  ModelParams axon;
  CHECK_THROWS_AS(build_sensitivity_map(build_grid_array({}), nullptr, axon, PerceptGrid{}),
                  ValidationError);
}

TEST_CASE("SPVM round trip") {
  const ElectrodeArray array = build_grid_array(GridLayout{});
  ModelParams m;
  const SensitivityMap map = build_sensitivity_map(array, &default_bundle(), m, PerceptGrid{});
  std::stringstream buf;
  write_sensitivity_map(buf, map);
  const std::string bytes = buf.str();
  CHECK(bytes.substr(0, 4) == "SPVM");

  std::stringstream in(bytes);
  const SensitivityMap back = read_sensitivity_map(in);
  CHECK(back.pixel_count() == map.pixel_count());
  CHECK(back.entry_count() == map.entry_count());
  // f32 on disk: a second trip is exact.
  std::stringstream buf2;
  write_sensitivity_map(buf2, back);
  CHECK(buf2.str() == bytes);
  std::stringstream in2(bytes);
  CHECK(read_sensitivity_map(in2) == back);

  for (std::size_t p = 0; p < map.pixel_count(); p += 97) {
    const auto a = map.entries(p), b = back.entries(p);
    REQUIRE(a.weights.size() == b.weights.size());
    for (std::size_t k = 0; k < a.weights.size(); ++k) {
      CHECK(a.electrodes[k] == b.electrodes[k]);
      CHECK(b.weights[k] == static_cast<double>(static_cast<float>(a.weights[k])));
    }
  }

  std::stringstream bad(std::string("SPVX") + bytes.substr(4));
  CHECK_THROWS_AS(read_sensitivity_map(bad), IoError);
  std::stringstream cut(bytes.substr(0, bytes.size() - 3));
  CHECK_THROWS(read_sensitivity_map(cut));
}
