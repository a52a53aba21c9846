#include "app/commands.hpp"

#include <algorithm>
#include <fstream>
#include <ostream>
#include <sstream>

#include "filament/error.hpp"
#include "filament/ingest.hpp"
#include "filament/io.hpp"
#include "filament/mcpm.hpp"

namespace filament::app {

using nlohmann::json;

namespace {

void write_resolved_config(const std::filesystem::path& dir, const RunConfig& config, const std::string& command,
                           const json& args) {
  json j = to_json(config);
  j["command"] = command;
  j["args"] = args;
  write_text_file(dir / "resolved-config.json", j.dump(2) + "\n");
}

void prepare_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw ParseError(dir.string() + ": cannot create directory (" + ec.message() + ")");
}

void report_warnings(const std::vector<std::string>& warnings, std::ostream& log) {
  for (const auto& w : warnings) log << "warning: " << w << "\n";
}

std::string csv_of(const Ranking& r, const std::vector<Token>& tokens) {
  std::ostringstream out;
  write_ranking_csv(out, r, tokens);
  return out.str();
}

json query_json(const ProbeQuery& q) {
  json j = json::object();
  if (q.token) j["token"] = *q.token;
  if (q.pos) j["pos"] = {q.pos->x, q.pos->y, q.pos->z};
  return j;
}

}  // namespace

int parse_axis(const std::string& s) {
  if (s == "x" || s == "0") return 0;
  if (s == "y" || s == "1") return 1;
  if (s == "z" || s == "2") return 2;
  throw InvariantError("axis must be x, y or z (got '" + s + "')");
}

TokenId resolve_token(const PointCloud& cloud, const std::string& surface) {
  if (auto id = find_surface(cloud.tokens, surface)) return *id;
  throw UnknownTokenError("unknown token '" + surface + "'", nearest_surfaces(cloud.tokens, surface));
}

ScalarField load_trace(const RunConfig& config) {
  const auto path = config.out_dir / "trace.field";
  if (!std::filesystem::exists(path)) throw ParseError(path.string() + ": not found; run `fit` first");
  return read_field(path);
}

ProbeOutcome run_probe_query(const ScalarField& trace, const Dataset& data, const RunConfig& config,
                             const ProbeQuery& query) {
  if (query.token.has_value() == query.pos.has_value()) throw InvariantError("give exactly one of --token or --pos");
  const PointCloud& cloud = data.cloud;
  const Rng rng(seed_of(config));

  ProbeOutcome out;
  if (query.token) {
    out.query = resolve_token(cloud, *query.token);
    out.seed = cloud.positions[*out.query];
  } else {
    if (!inside_unit_cube(*query.pos)) throw InvariantError("--pos must lie inside the unit cube");
    out.seed = *query.pos;
  }

  out.mcpm = mcpm_similarity_from(trace, cloud, out.seed, out.query, config.probe, rng, config.n_repeats);

  // Repeat 0 of the ranking run, replayed for the trajectory outputs.
  const Vec3 start = config.probe.seed_mode == SeedMode::snap_to_trace_max
                         ? snap_to_trace_max(trace, out.seed, config.probe.discovery_radius)
                         : out.seed;
  out.trajectories = run_probes(trace, start, config.probe, rng.split(0));
  out.stats = direction_stats(out.trajectories, config.direction_bins);

  if (out.query && data.vectors) {
    out.euclidean = euclidean_ranking(*data.vectors, *out.query);
    out.cosine = cosine_ranking(*data.vectors, *out.query);
    out.diff = rank_diff_table(out.mcpm, *out.euclidean, *out.cosine, config.diff_top_k, cloud.tokens);
  }
  return out;
}

void cmd_fit(const RunConfig& config, std::ostream& log) {
  report_warnings(validate(config), log);
  const Dataset data = load_dataset(config);
  prepare_dir(config.out_dir);

  const McpmResult result = fit_trace(data.cloud, config.mcpm, Rng(seed_of(config)));
  const json meta = {{"kind", "trace"},
                     {"steps", result.steps_run},
                     {"convergence", convergence_metric(result)},
                     {"seed", seed_of(config)}};
  write_field(config.out_dir / "trace.field", result.trace, meta);
  write_field(config.out_dir / "deposit.field", result.deposit,
              {{"kind", "deposit"}, {"steps", result.steps_run}, {"seed", seed_of(config)}});
  write_convergence_csv(config.out_dir / "convergence.csv", result.convergence_series);
  save_points_3d(config.out_dir / "points.tsv", data.cloud);
  write_resolved_config(config.out_dir, config, "fit", json::object());

  const double c = convergence_metric(result);
  log << "fit: " << data.cloud.size() << " tokens, " << result.steps_run << " steps, convergence " << format_double(c)
      << (c < kConvergedBelow ? "" : " (not converged)") << "\n";
}

void cmd_probe(const RunConfig& config, const ProbeQuery& query, std::ostream& log) {
  report_warnings(validate(config), log);
  const Dataset data = load_fitted_dataset(config);
  const ScalarField trace = load_trace(config);
  const ProbeOutcome r = run_probe_query(trace, data, config, query);
  const auto& tokens = data.cloud.tokens;

  const auto dir = config.out_dir / "probe";
  prepare_dir(dir);
  std::vector<Ranking> all{r.mcpm};
  if (r.euclidean) all.push_back(*r.euclidean);
  if (r.cosine) all.push_back(*r.cosine);
  for (const Ranking& rk : all) {
    const std::string name = "ranking_" + std::string(to_string(rk.metric));
    write_text_file(dir / (name + ".csv"), csv_of(rk, tokens));
    write_text_file(dir / (name + ".json"), ranking_to_json(rk, tokens).dump(1) + "\n");
  }
  if (r.euclidean) {
    std::ostringstream csv;
    write_diff_table_csv(csv, r.diff);
    write_text_file(dir / "diff_table.csv", csv.str());
    write_text_file(dir / "diff_table.json", diff_table_to_json(r.diff).dump(1) + "\n");
  }
  write_text_file(dir / "direction_stats.json", direction_stats_to_json(r.stats).dump(1) + "\n");
  write_text_file(dir / "wordcloud.json", word_cloud_json(all, tokens).dump(1) + "\n");
  write_trajectories(dir / "trajectories.bin", r.trajectories);
  write_resolved_config(dir, config, "probe", query_json(query));

  log << "probe: " << r.mcpm.entries.size() << " tokens discovered, bimodality " << format_double(r.stats.bimodality)
      << ", " << r.stats.n_modes << " modes\n";
}

void cmd_rank(const RunConfig& config, const std::string& token, Metric metric, std::size_t limit,
              std::ostream& out) {
  validate(config);
  const Dataset data = load_fitted_dataset(config);
  const TokenId q = resolve_token(data.cloud, token);
  Ranking r;
  switch (metric) {
    case Metric::mcpm:
      r = mcpm_similarity(load_trace(config), data.cloud, q, config.probe, Rng(seed_of(config)), config.n_repeats);
      break;
    case Metric::euclidean:
      r = data.vectors ? euclidean_ranking(*data.vectors, q) : euclidean_ranking(data.cloud, q);
      break;
    case Metric::cosine:
      if (!data.vectors) throw InvariantError("cosine ranking needs native vectors (--vectors)");
      r = cosine_ranking(*data.vectors, q);
      break;
  }
  if (r.entries.size() > limit) r.entries.resize(limit);
  write_ranking_csv(out, r, data.cloud.tokens);
}

void cmd_cluster(const RunConfig& config, std::ostream& log) {
  report_warnings(validate(config), log);
  const Dataset data = load_fitted_dataset(config);
  const ScalarField trace = load_trace(config);
  const ComponentLabels labels = threshold_components(trace, config.tau);
  const ClusterLabeling clusters = assign_clusters(data.cloud, labels, config.assign_radius);

  const auto dir = config.out_dir / "cluster";
  prepare_dir(dir);
  write_labels(dir / "labels.field", labels, {{"kind", "labels"}, {"tau", labels.tau}});
  write_token_clusters(dir / "token_clusters.tsv", data.cloud, clusters);

  std::vector<std::size_t> sizes(labels.n_components, 0);
  std::size_t unassigned = 0;
  for (const auto& l : clusters.token_labels) l ? ++sizes[*l - 1] : ++unassigned;
  json summary = {{"tau", labels.tau},
                  {"n_components", labels.n_components},
                  {"component_mass", labels.component_mass},
                  {"token_counts", sizes},
                  {"unassigned", unassigned}};
  write_text_file(dir / "clusters.json", summary.dump(1) + "\n");
  write_resolved_config(dir, config, "cluster", json::object());

  if (labels.n_components == 0)
    log << "warning: tau " << format_double(labels.tau) << " exceeds the trace maximum "
        << format_double(trace.max_value()) << "; no components\n";
  log << "cluster: " << labels.n_components << " components at tau " << format_double(labels.tau) << ", "
      << unassigned << " tokens unassigned\n";
}

void cmd_export(const RunConfig& config, const ExportRequest& req, std::ostream& log) {
  if (req.output.empty()) throw ParseError("export needs an output path (-o)");
  if (req.what == "points") {
    save_points_3d(req.output, load_fitted_dataset(config).cloud);
  } else if (req.what == "slice" || req.what == "raw") {
    if (req.field != "trace" && req.field != "deposit") throw InvariantError("field must be trace or deposit");
    const auto path = config.out_dir / (req.field + ".field");
    if (!std::filesystem::exists(path)) throw ParseError(path.string() + ": not found; run `fit` first");
    const ScalarField field = read_field(path);
    if (req.what == "raw") {
      const auto values = field.values();
      write_text_file(req.output,
                      std::string(reinterpret_cast<const char*>(values.data()), values.size() * sizeof(float)));
    } else {
      int w = 0, h = 0;
      const std::vector<float> plane = field_slice(field, req.axis, req.index, &w, &h);
      std::ostringstream csv;
      for (int j = 0; j < h; ++j)
        for (int i = 0; i < w; ++i)
          csv << format_double(plane[static_cast<std::size_t>(j) * w + i]) << (i + 1 < w ? ',' : '\n');
      write_text_file(req.output, csv.str());
    }
  } else {
    throw InvariantError("export: unknown kind '" + req.what + "' (slice, raw, points)");
  }
  log << "export: wrote " << req.output.string() << "\n";
}

}  // namespace filament::app
