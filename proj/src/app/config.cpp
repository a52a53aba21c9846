#include "app/config.hpp"

#include <fstream>
#include <set>

#include "filament/error.hpp"
#include "filament/ingest.hpp"

namespace filament {

NLOHMANN_JSON_SERIALIZE_ENUM(SpawnMode, {{SpawnMode::data_points, "data_points"}, {SpawnMode::uniform, "uniform"}})
NLOHMANN_JSON_SERIALIZE_ENUM(ExecutionMode,
                             {{ExecutionMode::deterministic, "deterministic"}, {ExecutionMode::fast, "fast"}})
NLOHMANN_JSON_SERIALIZE_ENUM(CountingMode,
                             {{CountingMode::per_event, "per_event"}, {CountingMode::once_per_agent, "once_per_agent"}})
NLOHMANN_JSON_SERIALIZE_ENUM(SeedMode, {{SeedMode::exact, "exact"}, {SeedMode::snap_to_trace_max, "snap_to_trace_max"}})

namespace app {

using nlohmann::json;

namespace {

// Reads keys from one JSON object and rejects any it did not consume.
class Section {
 public:
  Section(const json& j, std::string name) : j_(j), name_(std::move(name)) {
    if (!j_.is_object()) throw ParseError("config: '" + name_ + "' must be an object");
  }

  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      const json& v = j_.at(key);
      if constexpr (std::is_enum_v<T>) {
        // The enum adapters silently map unknown strings to the first value.
        const T parsed = v.get<T>();
        if (json(parsed) != v) throw ParseError("bad value");
        out = parsed;
      } else {
        out = v.get<T>();
      }
    } catch (const std::exception&) {
      throw ParseError("config: bad value for '" + qualified(key) + "'");
    }
  }

  const json* child(const char* key) {
    seen_.insert(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }

  void finish() const {
    for (const auto& [key, _] : j_.items())
      if (!seen_.count(key)) throw ParseError("config: unknown key '" + qualified(key.c_str()) + "'");
  }

 private:
  std::string qualified(const char* key) const { return name_.empty() ? key : name_ + "." + key; }

  const json& j_;
  std::string name_;
  std::set<std::string> seen_;
};

}  // namespace

json to_json(const RunConfig& c) {
  const McpmParams& m = c.mcpm;
  const ProbeParams& p = c.probe;
  json tau;
  if (const auto* fixed = std::get_if<double>(&c.tau))
    tau = *fixed;
  else
    tau = "auto";
  const double mass_fraction =
      std::holds_alternative<AutoThreshold>(c.tau) ? std::get<AutoThreshold>(c.tau).mass_fraction
                                                   : AutoThreshold{}.mass_fraction;
  json out = {
      {"points", c.points.string()},
      {"vectors", c.vectors.string()},
      {"pca", c.pca},
      {"out_dir", c.out_dir.string()},
      {"threads", c.threads},
      {"mcpm",
       {{"n_agents", m.n_agents},
        {"n_steps", m.n_steps},
        {"grid", {m.grid.nx, m.grid.ny, m.grid.nz}},
        {"sense_distance", m.sense_distance},
        {"sense_angle", m.sense_angle},
        {"move_distance", m.move_distance},
        {"data_deposit", m.data_deposit},
        {"agent_deposit", m.agent_deposit},
        {"decay", m.decay},
        {"diffusion_passes", m.diffusion_passes},
        {"sharpness", m.sharpness},
        {"trace_window", m.trace_window},
        {"spawn", m.spawn},
        {"mode", m.mode}}},
      {"probe",
       {{"n_probes", p.n_probes},
        {"n_steps", p.n_steps},
        {"sense_distance", p.sense_distance},
        {"sense_angle", p.sense_angle},
        {"move_distance", p.move_distance},
        {"discovery_radius", p.discovery_radius},
        {"trace_floor", p.trace_floor},
        {"sharpness", p.sharpness},
        {"counting", p.counting},
        {"seed_mode", p.seed_mode}}},
      {"analysis",
       {{"n_repeats", c.n_repeats},
        {"tau", tau},
        {"auto_mass_fraction", mass_fraction},
        {"assign_radius", c.assign_radius},
        {"diff_top_k", c.diff_top_k},
        {"direction_bins", c.direction_bins}}},
  };
  out["seed"] = c.seed ? json(*c.seed) : json(nullptr);
  return out;
}

RunConfig config_from_json(const json& j) {
  RunConfig c;
  Section top(j, "");
  std::string points, vectors, out_dir = c.out_dir.string();
  top.get("points", points);
  top.get("vectors", vectors);
  top.get("out_dir", out_dir);
  c.points = points;
  c.vectors = vectors;
  c.out_dir = out_dir;
  top.get("pca", c.pca);
  top.get("threads", c.threads);
  // Written into resolved-config.json as a record of the invocation; not settings.
  top.child("command");
  top.child("args");
  if (const json* seed = top.child("seed"); seed && !seed->is_null()) {
    if (!seed->is_number_unsigned()) throw ParseError("config: 'seed' must be a non-negative integer");
    c.seed = seed->get<std::uint64_t>();
  }

  if (const json* mj = top.child("mcpm")) {
    Section s(*mj, "mcpm");
    McpmParams& m = c.mcpm;
    s.get("n_agents", m.n_agents);
    s.get("n_steps", m.n_steps);
    if (const json* g = s.child("grid")) {
      if (!g->is_array() || g->size() != 3) throw ParseError("config: 'mcpm.grid' must be [nx, ny, nz]");
      try {
        m.grid = {(*g)[0].get<int>(), (*g)[1].get<int>(), (*g)[2].get<int>()};
      } catch (const std::exception&) {
        throw ParseError("config: 'mcpm.grid' must hold integers");
      }
    }
    s.get("sense_distance", m.sense_distance);
    s.get("sense_angle", m.sense_angle);
    s.get("move_distance", m.move_distance);
    s.get("data_deposit", m.data_deposit);
    s.get("agent_deposit", m.agent_deposit);
    s.get("decay", m.decay);
    s.get("diffusion_passes", m.diffusion_passes);
    s.get("sharpness", m.sharpness);
    s.get("trace_window", m.trace_window);
    s.get("spawn", m.spawn);
    s.get("mode", m.mode);
    s.finish();
  }

  if (const json* pj = top.child("probe")) {
    Section s(*pj, "probe");
    ProbeParams& p = c.probe;
    s.get("n_probes", p.n_probes);
    s.get("n_steps", p.n_steps);
    s.get("sense_distance", p.sense_distance);
    s.get("sense_angle", p.sense_angle);
    s.get("move_distance", p.move_distance);
    s.get("discovery_radius", p.discovery_radius);
    s.get("trace_floor", p.trace_floor);
    s.get("sharpness", p.sharpness);
    s.get("counting", p.counting);
    s.get("seed_mode", p.seed_mode);
    s.finish();
  }

  if (const json* aj = top.child("analysis")) {
    Section s(*aj, "analysis");
    s.get("n_repeats", c.n_repeats);
    double mass_fraction = AutoThreshold{}.mass_fraction;
    s.get("auto_mass_fraction", mass_fraction);
    c.tau = AutoThreshold{mass_fraction};
    if (const json* tau = s.child("tau")) {
      if (tau->is_number())
        c.tau = tau->get<double>();
      else if (*tau != "auto")
        throw ParseError("config: 'analysis.tau' must be a number or \"auto\"");
    }
    s.get("assign_radius", c.assign_radius);
    s.get("diff_top_k", c.diff_top_k);
    s.get("direction_bins", c.direction_bins);
    s.finish();
  }
  top.finish();
  c.mcpm.threads = c.threads;
  c.probe.threads = c.threads;
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(path.string() + ": cannot open config");
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  return config_from_json(j);
}

std::vector<std::string> validate(const RunConfig& c) {
  if (!c.seed) throw InvariantError("a seed is required (--seed N); runs are never seeded from the clock");
  if (c.threads < 0) throw InvariantError("threads must be >= 0");
  if (c.n_repeats < 1) throw InvariantError("n_repeats must be >= 1");
  if (!(c.assign_radius >= 0.0)) throw InvariantError("assign_radius must be >= 0");
  if (c.direction_bins < 4) throw InvariantError("direction_bins must be >= 4");
  if (const auto* a = std::get_if<AutoThreshold>(&c.tau); a && !(a->mass_fraction > 0.0 && a->mass_fraction <= 1.0))
    throw InvariantError("auto_mass_fraction must be in (0, 1]");
  filament::validate(c.mcpm);
  std::vector<std::string> warnings;
  if (auto w = filament::validate(c.probe)) warnings.push_back(*w);
  return warnings;
}

std::uint64_t seed_of(const RunConfig& c) {
  if (!c.seed) throw InvariantError("a seed is required (--seed N); runs are never seeded from the clock");
  return *c.seed;
}

namespace {

void attach_vectors(Dataset& d, const RunConfig& c) {
  if (c.vectors.empty()) return;
  EmbeddingSet set = load_word2vec_text(c.vectors);
  if (set.size() != d.cloud.size())
    throw InvariantError(c.vectors.string() + ": " + std::to_string(set.size()) + " vectors for " +
                         std::to_string(d.cloud.size()) + " points");
  for (std::size_t i = 0; i < set.size(); ++i)
    if (set.tokens[i].surface != d.cloud.tokens[i].surface)
      throw InvariantError(c.vectors.string() + ": row " + std::to_string(i + 2) + " is '" + set.tokens[i].surface +
                           "' but the points table has '" + d.cloud.tokens[i].surface + "'");
  d.vectors = std::move(set);
}

}  // namespace

Dataset load_dataset(const RunConfig& c) {
  Dataset d;
  if (!c.points.empty()) {
    d.cloud = normalize_to_unit_cube(load_points_3d(c.points));
    attach_vectors(d, c);
    return d;
  }
  if (c.vectors.empty()) throw ParseError("no input: give --points or --vectors");
  EmbeddingSet set = load_word2vec_text(c.vectors);
  if (c.pca) {
    d.cloud = normalize_to_unit_cube(pca_project(set).cloud);
  } else if (set.dim == 3) {
    std::vector<Vec3> pos(set.size());
    for (std::size_t i = 0; i < set.size(); ++i) pos[i] = {set.row(i)[0], set.row(i)[1], set.row(i)[2]};
    d.cloud = normalize_to_unit_cube(cloud_from_positions(set.tokens, std::move(pos)));
  } else {
    throw InvariantError(c.vectors.string() + ": vectors have " + std::to_string(set.dim) +
                         " dimensions; pass --pca to project them to 3D");
  }
  d.vectors = std::move(set);
  return d;
}

Dataset load_fitted_dataset(const RunConfig& c) {
  const auto path = c.out_dir / "points.tsv";
  if (!std::filesystem::exists(path)) throw ParseError(path.string() + ": not found; run `fit` first");
  Dataset d;
  d.cloud = load_points_3d(path);
  attach_vectors(d, c);
  return d;
}

}  // namespace app
}  // namespace filament
