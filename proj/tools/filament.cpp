// filament: fit / probe / rank / cluster / serve / export over a 3D token cloud.

#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>
#include <optional>

#include "app/commands.hpp"
#include "app/config.hpp"
#include "filament/error.hpp"

using namespace filament;
using namespace filament::app;

namespace {

// Flags shared by every subcommand; unset flags leave the config file value alone.
struct Overrides {
  std::string config_path;
  std::optional<std::string> points, vectors, out_dir, tau, mode;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads, grid, steps, probe_steps, repeats;
  std::optional<std::size_t> agents, probes;
  std::optional<double> discovery_radius;
  bool pca = false;

  void attach(CLI::App* app) {
    app->add_option("-c,--config", config_path, "JSON run config")->check(CLI::ExistingFile);
    app->add_option("--points", points, "3D points TSV (surface x y z [meta])");
    app->add_option("--vectors", vectors, "word2vec text vectors");
    app->add_flag("--pca", pca, "project --vectors to 3D with PCA");
    app->add_option("-o,--out", out_dir, "output directory (env FILAMENT_OUT_DIR)");
    app->add_option("--seed", seed, "RNG seed (required)");
    app->add_option("--threads", threads, "worker threads, 0 = all cores");
    app->add_option("--grid", grid, "cubic grid resolution");
    app->add_option("--agents", agents, "MCPM agent count");
    app->add_option("--steps", steps, "MCPM steps");
    app->add_option("--mode", mode, "deterministic | fast")->check(CLI::IsMember({"deterministic", "fast"}));
    app->add_option("--probes", probes, "probe agents");
    app->add_option("--probe-steps", probe_steps, "steps per probe agent");
    app->add_option("--discovery-radius", discovery_radius, "discovery radius (unit cube)");
    app->add_option("--repeats", repeats, "probe runs averaged per ranking");
    app->add_option("--tau", tau, "component threshold: number or 'auto'");
  }

  RunConfig resolve() const {
    RunConfig c = config_path.empty() ? RunConfig{} : load_config(config_path);
    if (const char* env = std::getenv(kOutDirEnv); env && *env) c.out_dir = env;
    if (points) c.points = *points;
    if (vectors) c.vectors = *vectors;
    if (pca) c.pca = true;
    if (out_dir) c.out_dir = *out_dir;
    if (seed) c.seed = *seed;
    if (threads) c.threads = *threads;
    if (grid) c.mcpm.grid = {*grid, *grid, *grid};
    if (agents) c.mcpm.n_agents = *agents;
    if (steps) {
      c.mcpm.n_steps = *steps;
      c.mcpm.trace_window = std::min(c.mcpm.trace_window, std::max(1, *steps));
    }
    if (mode) c.mcpm.mode = *mode == "fast" ? ExecutionMode::fast : ExecutionMode::deterministic;
    if (probes) c.probe.n_probes = *probes;
    if (probe_steps) c.probe.n_steps = *probe_steps;
    if (discovery_radius) c.probe.discovery_radius = *discovery_radius;
    if (repeats) c.n_repeats = *repeats;
    if (tau) {
      if (*tau == "auto") {
        c.tau = AutoThreshold{};
      } else {
        try {
          std::size_t used = 0;
          c.tau = std::stod(*tau, &used);
          if (used != tau->size()) throw std::invalid_argument("trailing");
        } catch (const std::exception&) {
          throw ParseError("--tau must be a number or 'auto'");
        }
      }
    }
    c.mcpm.threads = c.threads;
    c.probe.threads = c.threads;
    return c;
  }
};

Vec3 parse_pos(const std::string& s) {
  double v[3];
  std::size_t start = 0;
  for (int i = 0; i < 3; ++i) {
    const std::size_t comma = s.find(',', start);
    if ((i < 2) == (comma == std::string::npos)) throw ParseError("--pos expects x,y,z");
    const std::string part = s.substr(start, i < 2 ? comma - start : std::string::npos);
    try {
      std::size_t used = 0;
      v[i] = std::stod(part, &used);
      if (used != part.size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw ParseError("--pos: bad number '" + part + "'");
    }
    start = comma + 1;
  }
  return {v[0], v[1], v[2]};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"MCPM transport-network fitting and probe-agent exploration of 3D token clouds"};
  app.require_subcommand(1);
  Overrides ov;

  auto* fit = app.add_subcommand("fit", "fit the trace field");
  ov.attach(fit);

  auto* probe = app.add_subcommand("probe", "probe-agent rankings from a token or position");
  ov.attach(probe);
  std::string token, pos;
  auto* token_opt = probe->add_option("--token", token, "seed token surface");
  auto* pos_opt = probe->add_option("--pos", pos, "seed position x,y,z in the unit cube");
  token_opt->excludes(pos_opt);

  auto* rank = app.add_subcommand("rank", "print one ranking as CSV");
  ov.attach(rank);
  std::string rank_token, metric = "mcpm";
  std::size_t limit = 50;
  rank->add_option("--token", rank_token, "query token surface")->required();
  rank->add_option("--metric", metric, "mcpm | euclidean | cosine");
  rank->add_option("--limit", limit, "rows to print");

  auto* cluster = app.add_subcommand("cluster", "trace components and token clusters");
  ov.attach(cluster);

  auto* serve = app.add_subcommand("serve", "REST API over fitted artifacts");
  ov.attach(serve);
  std::string host = "127.0.0.1";
  int port = 8080, workers = 2;
  serve->add_option("--host", host, "bind address");
  serve->add_option("--port", port, "TCP port");
  serve->add_option("--probe-workers", workers, "concurrent probe runs");

  auto* exp = app.add_subcommand("export", "field slices, raw payloads or points");
  ov.attach(exp);
  ExportRequest req;
  std::string axis = "z";
  exp->add_option("what", req.what, "slice | raw | points")->required();
  exp->add_option("--field", req.field, "trace | deposit");
  exp->add_option("--axis", axis, "x | y | z");
  exp->add_option("--index", req.index, "plane index");
  exp->add_option("--to", req.output, "output file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitParse;
  }

  try {
    const RunConfig config = ov.resolve();
    if (fit->parsed()) {
      cmd_fit(config, std::cerr);
    } else if (probe->parsed()) {
      ProbeQuery q;
      if (*token_opt) q.token = token;
      if (*pos_opt) q.pos = parse_pos(pos);
      cmd_probe(config, q, std::cerr);
    } else if (rank->parsed()) {
      cmd_rank(config, rank_token, metric_from_string(metric), limit, std::cout);
    } else if (cluster->parsed()) {
      cmd_cluster(config, std::cerr);
    } else if (serve->parsed()) {
      cmd_serve(config, host, port, workers, std::cerr);
    } else if (exp->parsed()) {
      req.axis = parse_axis(axis);
      cmd_export(config, req, std::cerr);
    }
  } catch (const UnknownTokenError& e) {
    std::cerr << "error: " << e.what() << "\n";
    if (!e.suggestions().empty()) {
      std::cerr << "did you mean:";
      for (const auto& s : e.suggestions()) std::cerr << " " << s;
      std::cerr << "\n";
    }
    return kExitUnknownToken;
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitParse;
  } catch (const InvariantError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInvariant;
  } catch (const PortInUseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitPortInUse;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return kExitOk;
}
