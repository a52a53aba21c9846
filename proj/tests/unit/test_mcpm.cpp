#include <doctest.h>

#include "filament/error.hpp"
#include "filament/mcpm.hpp"
#include "oracles.hpp"

using namespace filament;

namespace {

McpmParams small_params(int grid, std::size_t agents, int steps) {
  McpmParams p;
  p.grid = {grid, grid, grid};
  p.n_agents = agents;
  p.n_steps = steps;
  p.trace_window = std::min(100, steps);
  return p;
}

double mass_within(const ScalarField& f, const Vec3& c, double r) {
  const auto d = f.dims();
  double m = 0.0;
  for (int k = 0; k < d.nz; ++k)
    for (int j = 0; j < d.ny; ++j)
      for (int i = 0; i < d.nx; ++i)
        if (distance(f.voxel_center(i, j, k), c) <= r) m += f.at(i, j, k);
  return m;
}

double cylinder_mass(const ScalarField& f, const Vec3& a, const Vec3& b, double radius) {
  const auto d = f.dims();
  const Vec3 axis = normalized(b - a);
  const double len = distance(a, b);
  double m = 0.0;
  for (int k = 0; k < d.nz; ++k)
    for (int j = 0; j < d.ny; ++j)
      for (int i = 0; i < d.nx; ++i) {
        const Vec3 r = f.voxel_center(i, j, k) - a;
        const double t = dot(r, axis);
        if (t < 0.0 || t > len) continue;
        if (norm(r - axis * t) <= radius) m += f.at(i, j, k);
      }
  return m;
}

}  // namespace

TEST_SUITE("mcpm rules") {
  TEST_CASE("equal readings give probability one half for any sharpness") {
    for (double s : {0.0, 1.0, 2.0, 4.0, 7.5})
      for (double p : {1e-6, 0.3, 1.0, 250.0}) CHECK(mutation_probability(p, p, s) == doctest::Approx(0.5));
    CHECK(mutation_probability(0.0, 0.0, 2.0) == 0.5);
  }

  TEST_CASE("zero probe reading never mutates") {
    for (double s : {0.5, 1.0, 2.0, 4.0}) CHECK(mutation_probability(3.0, 0.0, s) == 0.0);
    CHECK(mutation_probability(0.0, 3.0, 2.0) == 1.0);
    CHECK(mutation_probability(1.0, 3.0, 2.0) == doctest::Approx(9.0 / 10.0));
  }

  TEST_CASE("cone samples stay within the half-angle and cover the cap uniformly") {
    Rng r(1);
    const Vec3 axis = normalized(Vec3{1, 2, -1});
    const double half = 0.6;
    const int n = 50000;
    std::vector<double> bins(10, 0.0);
    for (int i = 0; i < n; ++i) {
      const Vec3 v = sample_cone_uniform(axis, half, r);
      CHECK(norm(v) == doctest::Approx(1.0).epsilon(1e-9));
      const double c = dot(v, axis);
      REQUIRE(c >= std::cos(half) - 1e-9);
      // Uniform on the cap means cos(theta) is uniform on [cos(half), 1].
      bins[std::min(9, static_cast<int>((1.0 - c) / (1.0 - std::cos(half)) * 10))] += 1.0;
    }
    double chi = 0.0;
    for (double b : bins) chi += (b - n / 10.0) * (b - n / 10.0) / (n / 10.0);
    CHECK(oracle::chi_square_p(chi, 9) > 0.001);
  }

  TEST_CASE("parameter validation") {
    McpmParams p;
    CHECK_NOTHROW(validate(p));
    auto bad = [](auto mutate) {
      McpmParams q;
      mutate(q);
      CHECK_THROWS_AS(validate(q), InvariantError);
    };
    bad([](McpmParams& q) { q.n_agents = 0; });
    bad([](McpmParams& q) { q.decay = 0.0; });
    bad([](McpmParams& q) { q.decay = 1.0; });
    bad([](McpmParams& q) { q.sense_angle = 1.6; });
    bad([](McpmParams& q) { q.move_distance = q.sense_distance; });
    bad([](McpmParams& q) { q.grid = {0, 4, 4}; });
    McpmParams frozen;
    frozen.move_distance = 0.0;
    CHECK_NOTHROW(validate(frozen));
  }
}

TEST_SUITE("splat_data") {
  TEST_CASE("one token at the center holds data_deposit") {
    McpmParams p = small_params(16, 1, 1);
    const ScalarField f = splat_data(oracle::cloud_of({{0.5, 0.5, 0.5}}), p);
    CHECK(f.total_mass() == doctest::Approx(p.data_deposit));
  }

  TEST_CASE("two tokens on one voxel center double it") {
    McpmParams p = small_params(16, 1, 1);
    const Vec3 c = ScalarField(p.grid).voxel_center(5, 6, 7);
    const ScalarField f = splat_data(oracle::cloud_of({c, c}), p);
    CHECK(f.at(5, 6, 7) == doctest::Approx(2.0 * p.data_deposit));
  }

  TEST_CASE("1000 random tokens sum to 1000 data_deposit") {
    McpmParams p = small_params(32, 1, 1);
    Rng r(2);
    std::vector<Vec3> pts;
    for (int i = 0; i < 1000; ++i) pts.push_back({r.uniform(), r.uniform(), r.uniform()});
    const ScalarField f = splat_data(oracle::cloud_of(pts), p);
    CHECK(std::abs(f.total_mass() - 1000.0 * p.data_deposit) / (1000.0 * p.data_deposit) < 1e-3);
  }

  TEST_CASE("empty cloud is an error") {
    CHECK_THROWS_AS(splat_data(PointCloud{}, small_params(8, 1, 1)), InvariantError);
    CHECK_THROWS_AS(fit_trace(PointCloud{}, small_params(8, 1, 1), Rng(1)), InvariantError);
  }
}

TEST_SUITE("mcpm step") {
  TEST_CASE("uniform deposit keeps agents uniform (chi-square over 8^3 bins)") {
    McpmParams p = small_params(32, 10000, 100);
    p.spawn = SpawnMode::uniform;
    p.agent_deposit = 0.0;
    McpmState s = make_initial_state(oracle::cloud_of({{0.5, 0.5, 0.5}}), p, Rng(3));
    s.data_footprint.fill(0.0f);
    s.deposit.fill(100.0f);
    // A constant field stays constant under decay and clamped blur.
    const Rng root(4);
    for (int t = 0; t < 100; ++t) mcpm_step(s, p, root.split(t));
    std::vector<double> bins(512, 0.0);
    for (const auto& a : s.agents) {
      const int i = std::min(7, static_cast<int>(a.position.x * 8));
      const int j = std::min(7, static_cast<int>(a.position.y * 8));
      const int k = std::min(7, static_cast<int>(a.position.z * 8));
      bins[i + 8 * (j + 8 * k)] += 1.0;
    }
    const double expected = 10000.0 / 512.0;
    double chi = 0.0;
    for (double b : bins) chi += (b - expected) * (b - expected) / expected;
    CHECK(oracle::chi_square_p(chi, 511) > 0.01);
  }

  TEST_CASE("fields stay non-negative, agents stay inside, deposit stays bounded") {
    McpmParams p = small_params(32, 5000, 1);
    p.sense_distance = 0.03;
    p.move_distance = 0.02;  // large steps force frequent respawns
    Rng r(5);
    std::vector<Vec3> pts;
    for (int i = 0; i < 50; ++i) pts.push_back({r.uniform(0.02, 0.98), r.uniform(0.02, 0.98), r.uniform(0.02, 0.98)});
    McpmState s = make_initial_state(oracle::cloud_of(pts), p, Rng(6));
    const double bound = (pts.size() * p.data_deposit + p.n_agents * p.agent_deposit) / p.decay;
    const Rng root(7);
    for (int t = 0; t < 150; ++t) {
      mcpm_step(s, p, root.split(t));
      for (const auto& a : s.agents) {
        REQUIRE(inside_unit_cube(a.position));
        REQUIRE(norm(a.direction) == doctest::Approx(1.0).epsilon(1e-6));
      }
      REQUIRE(s.deposit.total_mass() <= 2.0 * bound);
    }
    for (float v : s.deposit.values()) REQUIRE(v >= 0.0f);
    for (float v : s.trace.values()) REQUIRE(v >= 0.0f);
    CHECK(s.trace.total_mass() == doctest::Approx(150.0 * p.n_agents).epsilon(1e-4));
  }

  TEST_CASE("a lone data point attracts uniformly spawned agents") {
    McpmParams p = small_params(64, 20000, 1);
    p.spawn = SpawnMode::uniform;
    const Vec3 c{0.5, 0.5, 0.5};
    McpmState s = make_initial_state(oracle::cloud_of({c}), p, Rng(8));
    const Rng root(9);
    std::vector<double> window_means;
    double acc = 0.0;
    for (int t = 0; t < 400; ++t) {
      mcpm_step(s, p, root.split(t));
      double mean = 0.0;
      for (const auto& a : s.agents) mean += distance(a.position, c);
      acc += mean / s.agents.size();
      if ((t + 1) % 50 == 0) {
        window_means.push_back(acc / 50.0);
        acc = 0.0;
      }
    }
    // Monotone decrease until the plateau (changes below 1% count as plateau).
    for (std::size_t w = 1; w < window_means.size(); ++w) {
      INFO("window ", w, ": ", window_means[w - 1], " -> ", window_means[w]);
      CHECK(window_means[w] <= window_means[w - 1] * 1.01);
    }
    CHECK(window_means.back() < window_means.front());
  }
}

TEST_SUITE("fit_trace") {
  TEST_CASE("single token traps at least 60% of trace mass within 4 sense distances") {
    McpmParams p;  // default lattice and lengths
    p.n_agents = 20000;
    p.n_steps = 150;
    p.trace_window = 50;
    const Vec3 c{0.5, 0.5, 0.5};
    const McpmResult r = fit_trace(oracle::cloud_of({c}), p, Rng(10));
    const double frac = mass_within(r.trace, c, 4.0 * p.sense_distance) / r.trace.total_mass();
    INFO("fraction ", frac);
    CHECK(frac >= 0.6);
  }

  TEST_CASE("two tokens: connecting cylinder outweighs perpendicular ones by 3x") {
    McpmParams p = small_params(64, 100000, 400);
    const Vec3 a{0.35, 0.5, 0.5}, b{0.65, 0.5, 0.5};
    const McpmResult r = fit_trace(oracle::cloud_of({a, b}), p, Rng(11));
    const double along = cylinder_mass(r.trace, a, b, 0.03);
    const double perp_y = cylinder_mass(r.trace, {0.5, 0.35, 0.5}, {0.5, 0.65, 0.5}, 0.03);
    const double perp_z = cylinder_mass(r.trace, {0.5, 0.5, 0.35}, {0.5, 0.5, 0.65}, 0.03);
    INFO("along ", along, " perp ", perp_y, " ", perp_z);
    CHECK(along >= 3.0 * std::max(perp_y, perp_z));
  }

  TEST_CASE("two-token fit converges below 0.01 by step 600") {
    McpmParams p = small_params(64, 20000, 600);
    p.trace_window = 100;
    const McpmResult r = fit_trace(oracle::cloud_of({{0.35, 0.5, 0.5}, {0.65, 0.5, 0.5}}), p, Rng(12));
    REQUIRE(r.convergence_series.size() == 600);
    CHECK(r.steps_run == 600);
    CHECK(convergence_metric(r) < kConvergedBelow);
    for (double v : r.convergence_series) REQUIRE(v >= 0.0);
  }

  TEST_CASE("frozen agents converge to exactly zero once the window fills") {
    McpmParams p = small_params(16, 500, 30);
    p.trace_window = 10;
    p.move_distance = 0.0;
    const McpmResult r = fit_trace(oracle::cloud_of({{0.3, 0.4, 0.5}, {0.6, 0.6, 0.6}}), p, Rng(13));
    for (std::size_t t = p.trace_window; t < r.convergence_series.size(); ++t) CHECK(r.convergence_series[t] == 0.0);
    CHECK(convergence_metric(r) == 0.0);
  }

  TEST_CASE("trace averages agent density over the final window") {
    McpmParams p = small_params(16, 1000, 20);
    p.trace_window = 5;
    const McpmResult r = fit_trace(oracle::cloud_of({{0.5, 0.5, 0.5}}), p, Rng(14));
    CHECK(r.trace.total_mass() == doctest::Approx(1000.0).epsilon(1e-4));
    for (float v : r.trace.values()) REQUIRE(v >= 0.0f);
    for (float v : r.deposit.values()) REQUIRE(v >= 0.0f);
  }

  TEST_CASE("deterministic mode is bit-identical across runs and thread counts") {
    Rng g(15);
    std::vector<Vec3> pts;
    for (int i = 0; i < 30; ++i) pts.push_back({g.uniform(0.1, 0.9), g.uniform(0.1, 0.9), g.uniform(0.1, 0.9)});
    const PointCloud cloud = oracle::cloud_of(pts);
    McpmParams p = small_params(24, 4000, 40);
    p.threads = 1;
    const McpmResult a = fit_trace(cloud, p, Rng(16));
    const McpmResult b = fit_trace(cloud, p, Rng(16));
    p.threads = 4;
    const McpmResult c = fit_trace(cloud, p, Rng(16));
    CHECK(a.trace == b.trace);
    CHECK(a.deposit == b.deposit);
    CHECK(a.trace == c.trace);
    CHECK(a.deposit == c.deposit);
    CHECK(a.convergence_series == c.convergence_series);
    const McpmResult d = fit_trace(cloud, p, Rng(17));
    CHECK_FALSE(a.trace == d.trace);
  }

  TEST_CASE("fast mode conserves trace mass") {
    McpmParams p = small_params(24, 4000, 20);
    p.trace_window = 10;
    p.mode = ExecutionMode::fast;
    p.threads = 4;
    const McpmResult r = fit_trace(oracle::cloud_of({{0.4, 0.5, 0.5}, {0.6, 0.5, 0.5}}), p, Rng(18));
    CHECK(r.trace.total_mass() == doctest::Approx(4000.0).epsilon(1e-4));
  }
}
