#include "filament/mcpm.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numbers>
#include <string>

#include "filament/error.hpp"
#include "filament/parallel.hpp"

namespace filament {

void validate(const McpmParams& p) {
  auto fail = [](const std::string& msg) { throw InvariantError("mcpm parameters: " + msg); };
  if (p.n_agents < 1) fail("n_agents must be >= 1");
  if (p.n_steps < 0) fail("n_steps must be >= 0");
  if (p.grid.nx < 1 || p.grid.ny < 1 || p.grid.nz < 1) fail("grid dimensions must be positive");
  if (!(p.decay > 0.0 && p.decay < 1.0)) fail("decay must be in (0, 1)");
  if (!(p.move_distance >= 0.0)) fail("move_distance must be >= 0");
  if (!(p.sense_distance > p.move_distance)) fail("sense_distance must exceed move_distance");
  if (!(p.sense_angle > 0.0 && p.sense_angle < std::numbers::pi / 2)) fail("sense_angle must be in (0, pi/2)");
  if (!(p.data_deposit >= 0.0) || !(p.agent_deposit >= 0.0)) fail("deposit amounts must be >= 0");
  if (!(p.sharpness >= 0.0)) fail("sharpness must be >= 0");
  if (p.diffusion_passes < 0) fail("diffusion_passes must be >= 0");
  if (p.trace_window < 1) fail("trace_window must be >= 1");
}

ScalarField splat_data(const PointCloud& cloud, const McpmParams& params) {
  if (cloud.empty()) throw InvariantError("splat_data: empty point cloud");
  ScalarField field(params.grid);
  const auto amount = static_cast<float>(params.data_deposit);
  for (const Vec3& p : cloud.positions) splat_trilinear(field, p, amount);
  return field;
}

double mutation_probability(double p0, double p1, double sharpness) {
  double a = p0;
  double b = p1;
  if (sharpness == 2.0) {
    a *= p0;
    b *= p1;
  } else if (sharpness != 1.0) {
    a = std::pow(p0, sharpness);
    b = std::pow(p1, sharpness);
  }
  const double total = a + b;
  return total > 0.0 ? b / total : 0.5;
}

namespace {

Vec3 rotate_off_axis_cs(const Vec3& axis, double cos_theta, double sin_theta, double phi) {
  const Vec3 e1 = any_orthogonal(axis);
  const Vec3 e2 = cross(axis, e1);
  return normalized(axis * cos_theta + e1 * (sin_theta * std::cos(phi)) + e2 * (sin_theta * std::sin(phi)));
}

}  // namespace

Vec3 rotate_off_axis(const Vec3& axis, double theta, double phi) {
  return rotate_off_axis_cs(axis, std::cos(theta), std::sin(theta), phi);
}

Vec3 sample_cone_uniform(const Vec3& axis, double half_angle, Rng& rng) {
  const double cos_theta = 1.0 - rng.uniform() * (1.0 - std::cos(half_angle));
  const double phi = rng.uniform(0.0, 2.0 * std::numbers::pi);
  return rotate_off_axis_cs(axis, cos_theta, std::sqrt(std::max(0.0, 1.0 - cos_theta * cos_theta)), phi);
}

McpmState make_initial_state(const PointCloud& cloud, const McpmParams& params, const Rng& rng) {
  validate(params);
  McpmState s;
  s.data_footprint = splat_data(cloud, params);
  s.deposit = s.data_footprint;
  s.trace = ScalarField(params.grid);
  s.scratch = ScalarField(params.grid);
  s.spawn_points = cloud.positions;
  s.agents.resize(params.n_agents);
  parallel_for(params.n_agents, params.threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      Rng r = rng.split(i);
      AgentState& a = s.agents[i];
      a.position = params.spawn == SpawnMode::data_points ? s.spawn_points[r.below(s.spawn_points.size())]
                                                          : Vec3{r.uniform(), r.uniform(), r.uniform()};
      a.direction = r.unit_vector();
    }
  });
  return s;
}

namespace {

void move_agent(AgentState& a, const ScalarField& deposit, std::span<const Vec3> spawn_points,
                const McpmParams& params, Rng& r) {
  const Vec3 probe_dir = sample_cone_uniform(a.direction, params.sense_angle, r);
  const double p0 = sample_trilinear(deposit, a.position + a.direction * params.sense_distance);
  const double p1 = sample_trilinear(deposit, a.position + probe_dir * params.sense_distance);
  if (r.uniform() < mutation_probability(p0, p1, params.sharpness)) a.direction = probe_dir;
  a.position += a.direction * params.move_distance;
  if (!inside_unit_cube(a.position)) {
    a.position = params.spawn == SpawnMode::data_points ? spawn_points[r.below(spawn_points.size())]
                                                        : Vec3{r.uniform(), r.uniform(), r.uniform()};
    a.direction = r.unit_vector();
  }
}

void atomic_splat(ScalarField& field, const Vec3& p, float amount) {
  const TrilinearStencil s = trilinear_stencil(field.dims(), p);
  auto values = field.values();
  for (int n = 0; n < 8; ++n)
    std::atomic_ref<float>(values[s.index[n]]).fetch_add(s.weight[n] * amount, std::memory_order_relaxed);
}

void blur_axis(const ScalarField& src, ScalarField& dst, int axis, float scale, int threads) {
  const GridDims d = src.dims();
  const auto in = src.values();
  auto out = dst.values();
  const std::size_t stride = axis == 0 ? 1 : (axis == 1 ? static_cast<std::size_t>(d.nx) : static_cast<std::size_t>(d.nx) * d.ny);
  const int len = d[axis];
  const float w = scale / 3.0f;
  parallel_for(static_cast<std::size_t>(d.nz), threads, [&](std::size_t k0, std::size_t k1) {
    for (std::size_t k = k0; k < k1; ++k)
      for (int j = 0; j < d.ny; ++j)
        for (int i = 0; i < d.nx; ++i) {
          const std::size_t idx = src.index(i, j, static_cast<int>(k));
          const int pos = axis == 0 ? i : (axis == 1 ? j : static_cast<int>(k));
          const std::size_t lo = pos > 0 ? idx - stride : idx;
          const std::size_t hi = pos + 1 < len ? idx + stride : idx;
          out[idx] = w * (in[lo] + in[idx] + in[hi]);
        }
  });
}

}  // namespace

void box_blur(ScalarField& field, ScalarField& scratch, float scale, int threads) {
  blur_axis(field, scratch, 0, scale, threads);
  blur_axis(scratch, field, 1, 1.0f, threads);
  blur_axis(field, scratch, 2, 1.0f, threads);
  std::swap(field, scratch);
}

void sort_agents_spatially(McpmState& s, const GridDims& grid) {
  // Counting sort on a coarse x-fastest cell index so neighbouring agents
  // touch neighbouring memory. Stable, hence deterministic.
  const int cx = std::max(1, grid.nx / 4), cy = std::max(1, grid.ny / 4), cz = std::max(1, grid.nz / 4);
  const std::size_t cells = static_cast<std::size_t>(cx) * cy * cz;
  auto cell_of = [&](const Vec3& p) {
    const int i = std::clamp(static_cast<int>(p.x * cx), 0, cx - 1);
    const int j = std::clamp(static_cast<int>(p.y * cy), 0, cy - 1);
    const int k = std::clamp(static_cast<int>(p.z * cz), 0, cz - 1);
    return static_cast<std::size_t>(i) + static_cast<std::size_t>(cx) * (j + static_cast<std::size_t>(cy) * k);
  };
  std::vector<std::uint32_t> keys(s.agents.size());
  std::vector<std::size_t> offsets(cells + 1, 0);
  for (std::size_t a = 0; a < s.agents.size(); ++a) {
    keys[a] = static_cast<std::uint32_t>(cell_of(s.agents[a].position));
    ++offsets[keys[a] + 1];
  }
  for (std::size_t c = 0; c < cells; ++c) offsets[c + 1] += offsets[c];
  std::vector<AgentState> sorted(s.agents.size());
  for (std::size_t a = 0; a < s.agents.size(); ++a) sorted[offsets[keys[a]]++] = s.agents[a];
  s.agents.swap(sorted);
}

void mcpm_step(McpmState& s, const McpmParams& params, const Rng& step_rng) {
  const std::size_t n = s.agents.size();
  const auto agent_amount = static_cast<float>(params.agent_deposit);

  if (params.mode == ExecutionMode::deterministic) {
    parallel_for(n, params.threads, [&](std::size_t begin, std::size_t end) {
      for (std::size_t i = begin; i < end; ++i) {
        Rng r = step_rng.split(i);
        move_agent(s.agents[i], s.deposit, s.spawn_points, params, r);
      }
    });
    // Ordered merge: identical floating-point summation order for any thread count.
    for (const AgentState& a : s.agents) {
      const TrilinearStencil st = trilinear_stencil(s.deposit.dims(), a.position);
      auto dep = s.deposit.values();
      auto tr = s.trace.values();
      for (int c = 0; c < 8; ++c) {
        dep[st.index[c]] += st.weight[c] * agent_amount;
        tr[st.index[c]] += st.weight[c];
      }
    }
  } else {
    // Deposition happens after every agent has sensed the previous deposit.
    parallel_for(n, params.threads, [&](std::size_t begin, std::size_t end) {
      for (std::size_t i = begin; i < end; ++i) {
        Rng r = step_rng.split(i);
        move_agent(s.agents[i], s.deposit, s.spawn_points, params, r);
      }
    });
    parallel_for(n, params.threads, [&](std::size_t begin, std::size_t end) {
      for (std::size_t i = begin; i < end; ++i) {
        atomic_splat(s.deposit, s.agents[i].position, agent_amount);
        atomic_splat(s.trace, s.agents[i].position, 1.0f);
      }
    });
  }

  auto dep = s.deposit.values();
  const auto data = s.data_footprint.values();
  for (std::size_t i = 0; i < dep.size(); ++i) dep[i] += data[i];

  const auto keep = static_cast<float>(1.0 - params.decay);
  if (params.diffusion_passes == 0) {
    for (float& v : dep) v *= keep;
  } else {
    for (int pass = 0; pass < params.diffusion_passes; ++pass)
      box_blur(s.deposit, s.scratch, pass == 0 ? keep : 1.0f, params.threads);
  }
}

namespace {
constexpr int kSortInterval = 4;
}  // namespace

McpmResult fit_trace(const PointCloud& cloud, const McpmParams& params, const Rng& rng) {
  if (cloud.empty()) throw InvariantError("fit_trace: empty point cloud");
  McpmState state = make_initial_state(cloud, params, rng.split(0));

  const int window = std::min(params.trace_window, std::max(params.n_steps, 1));
  const int accumulate_from = params.n_steps - window;
  const float alpha = 1.0f / static_cast<float>(params.trace_window);

  McpmResult result;
  result.trace = ScalarField(params.grid);
  result.convergence_series.reserve(static_cast<std::size_t>(params.n_steps));
  ScalarField running(params.grid);  // exponential stand-in for the sliding window

  for (int t = 0; t < params.n_steps; ++t) {
    if (t % kSortInterval == 0) sort_agents_spatially(state, params.grid);
    state.trace.fill(0.0f);
    mcpm_step(state, params, rng.split(static_cast<std::uint64_t>(t) + 1));

    const auto density = state.trace.values();
    auto run = running.values();
    double change = 0.0;
    double mass = 0.0;
    if (t == 0) {
      std::copy(density.begin(), density.end(), run.begin());
      for (float v : density) change += v;
      mass = change;
    } else {
      for (std::size_t i = 0; i < run.size(); ++i) {
        const float delta = alpha * (density[i] - run[i]);
        run[i] += delta;
        change += std::abs(delta);
        mass += run[i];
      }
    }
    result.convergence_series.push_back(mass > 0.0 ? change / mass : 0.0);

    if (t >= accumulate_from) {
      auto acc = result.trace.values();
      const float w = 1.0f / static_cast<float>(window);
      for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += w * density[i];
    }
  }
  result.deposit = std::move(state.deposit);
  result.steps_run = params.n_steps;
  return result;
}

double convergence_metric(const McpmResult& result) {
  return result.convergence_series.empty() ? 0.0 : result.convergence_series.back();
}

}  // namespace filament
