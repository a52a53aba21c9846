#include "app/server.hpp"

#include <httplib.h>

#include <algorithm>
#include <charconv>
#include <semaphore>
#include <sstream>

#include "app/commands.hpp"
#include "filament/error.hpp"
#include "filament/io.hpp"

namespace filament::app {

using nlohmann::json;

namespace {

constexpr std::ptrdiff_t kMaxProbeWorkers = 64;

struct State {
  RunConfig config;
  Dataset data;
  ScalarField trace;
  std::optional<ScalarField> deposit;
  FieldHeader trace_header;
  ComponentLabels labels;
  ClusterLabeling clusters;
  std::counting_semaphore<kMaxProbeWorkers> probe_slots;

  State(RunConfig c, int workers)
      : config(std::move(c)),
        data(load_fitted_dataset(config)),
        probe_slots(std::clamp<std::ptrdiff_t>(workers, 1, kMaxProbeWorkers)) {
    const auto path = config.out_dir / "trace.field";
    if (!std::filesystem::exists(path)) throw ParseError(path.string() + ": not found; run `fit` first");
    trace = read_field(path, &trace_header);
    if (std::filesystem::exists(config.out_dir / "deposit.field")) deposit = read_field(config.out_dir / "deposit.field");
    labels = threshold_components(trace, config.tau);
    clusters = assign_clusters(data.cloud, labels, config.assign_radius);
  }
};

struct SlotGuard {
  explicit SlotGuard(std::counting_semaphore<kMaxProbeWorkers>& s) : sem(s) { sem.acquire(); }
  ~SlotGuard() { sem.release(); }
  std::counting_semaphore<kMaxProbeWorkers>& sem;
};

void send_json(httplib::Response& res, const json& body, int status = 200) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& message, const json& extra = json::object()) {
  json body = {{"error", message}};
  body.update(extra);
  send_json(res, body, status);
}

// Maps library exceptions onto HTTP statuses.
template <typename Handler>
httplib::Server::Handler guarded(Handler h) {
  return [h](const httplib::Request& req, httplib::Response& res) {
    try {
      h(req, res);
    } catch (const UnknownTokenError& e) {
      send_error(res, 404, e.what(), {{"suggestions", e.suggestions()}});
    } catch (const ParseError& e) {
      send_error(res, 400, e.what());
    } catch (const InvariantError& e) {
      send_error(res, 422, e.what());
    } catch (const json::exception& e) {
      send_error(res, 400, std::string("bad request body: ") + e.what());
    } catch (const std::exception& e) {
      send_error(res, 500, e.what());
    }
  };
}

std::size_t param_size(const httplib::Request& req, const char* key, std::size_t fallback) {
  if (!req.has_param(key)) return fallback;
  const std::string v = req.get_param_value(key);
  std::size_t value = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), value);
  if (ec != std::errc() || ptr != v.data() + v.size()) throw ParseError(std::string("bad integer for '") + key + "'");
  return value;
}

json token_json(const State& s, TokenId id) {
  const Token& t = s.data.cloud.tokens[id];
  const Vec3& p = s.data.cloud.positions[id];
  json j = {{"id", t.id}, {"surface", t.surface}, {"pos", {p.x, p.y, p.z}}};
  const auto& label = s.clusters.token_labels[id];
  j["cluster"] = label ? json(*label) : json(nullptr);
  if (t.meta) j["meta"] = *t.meta;
  return j;
}

void mount_routes(httplib::Server& svr, const std::string& base, std::shared_ptr<State> st) {
  svr.Get(base + "/tokens", guarded([st](const httplib::Request& req, httplib::Response& res) {
            const std::size_t offset = param_size(req, "offset", 0);
            const std::size_t limit = param_size(req, "limit", 100);
            const std::string q = req.has_param("q") ? req.get_param_value("q") : "";
            std::vector<TokenId> hits;
            for (const Token& t : st->data.cloud.tokens)
              if (q.empty() || t.surface.find(q) != std::string::npos) hits.push_back(t.id);
            json tokens = json::array();
            for (std::size_t i = offset; i < hits.size() && i - offset < limit; ++i) tokens.push_back(token_json(*st, hits[i]));
            send_json(res, {{"total", hits.size()}, {"offset", offset}, {"tokens", tokens}});
          }));

  svr.Get(base + "/token/:id", guarded([st](const httplib::Request& req, httplib::Response& res) {
            const std::string& raw = req.path_params.at("id");
            std::size_t id = 0;
            const auto [ptr, ec] = std::from_chars(raw.data(), raw.data() + raw.size(), id);
            if (ec != std::errc() || ptr != raw.data() + raw.size()) throw ParseError("token id must be an integer");
            if (id >= st->data.cloud.size()) throw UnknownTokenError("unknown token id " + raw);
            send_json(res, token_json(*st, static_cast<TokenId>(id)));
          }));

  svr.Get(base + "/clusters", guarded([st](const httplib::Request&, httplib::Response& res) {
            json labels = json::array();
            for (const auto& l : st->clusters.token_labels) labels.push_back(l ? json(*l) : json(nullptr));
            send_json(res, {{"tau", st->labels.tau},
                            {"n_components", st->labels.n_components},
                            {"component_mass", st->labels.component_mass},
                            {"token_labels", labels}});
          }));

  svr.Get(base + "/field/meta", guarded([st](const httplib::Request&, httplib::Response& res) {
            json j = field_header_json(st->trace.dims(), "f32le", st->trace_header.meta);
            j["max"] = st->trace.max_value();
            j["total_mass"] = st->trace.total_mass();
            j["fields"] = st->deposit ? json::array({"trace", "deposit"}) : json::array({"trace"});
            send_json(res, j);
          }));

  // Binary plane; shape in X-Dims as "width,height", lower axis fastest.
  svr.Get(base + "/field/slice", guarded([st](const httplib::Request& req, httplib::Response& res) {
            const int axis = parse_axis(req.has_param("axis") ? req.get_param_value("axis") : "z");
            const int index = static_cast<int>(param_size(req, "index", 0));
            const std::string which = req.has_param("field") ? req.get_param_value("field") : "trace";
            const ScalarField* field = &st->trace;
            if (which == "deposit") {
              if (!st->deposit) throw ParseError("no deposit field on disk");
              field = &*st->deposit;
            } else if (which != "trace") {
              throw ParseError("field must be trace or deposit");
            }
            int w = 0, h = 0;
            const std::vector<float> plane = field_slice(*field, axis, index, &w, &h);
            res.set_header("X-Dims", std::to_string(w) + "," + std::to_string(h));
            res.set_header("X-Dtype", "f32le");
            res.set_content(std::string(reinterpret_cast<const char*>(plane.data()), plane.size() * sizeof(float)),
                            "application/octet-stream");
          }));

  svr.Get(base + "/rankings", guarded([st](const httplib::Request& req, httplib::Response& res) {
            if (!req.has_param("token")) throw ParseError("missing 'token'");
            const Metric metric = req.has_param("metric") ? metric_from_string(req.get_param_value("metric")) : Metric::mcpm;
            const std::size_t limit = param_size(req, "limit", 100);
            const TokenId q = resolve_token(st->data.cloud, req.get_param_value("token"));
            const auto& vectors = st->data.vectors;
            Ranking r;
            if (metric == Metric::mcpm) {
              const SlotGuard slot(st->probe_slots);
              r = mcpm_similarity(st->trace, st->data.cloud, q, st->config.probe, Rng(seed_of(st->config)),
                                  st->config.n_repeats);
            } else if (metric == Metric::euclidean) {
              r = vectors ? euclidean_ranking(*vectors, q) : euclidean_ranking(st->data.cloud, q);
            } else {
              if (!vectors) throw InvariantError("cosine ranking needs native vectors");
              r = cosine_ranking(*vectors, q);
            }
            send_json(res, ranking_to_json(r, st->data.cloud.tokens, limit));
          }));

  svr.Post(base + "/probe", guarded([st](const httplib::Request& req, httplib::Response& res) {
             const json body = json::parse(req.body);
             if (!body.is_object()) throw ParseError("request body must be a JSON object");
             json cfg = to_json(st->config);
             if (body.contains("params")) cfg["probe"].update(body.at("params"));
             if (body.contains("seed")) cfg["seed"] = body.at("seed");
             const RunConfig config = config_from_json(cfg);
             validate(config);

             ProbeQuery query;
             if (body.contains("token")) query.token = body.at("token").get<std::string>();
             if (body.contains("pos")) {
               const auto p = body.at("pos").get<std::vector<double>>();
               if (p.size() != 3) throw ParseError("'pos' must be [x, y, z]");
               query.pos = Vec3{p[0], p[1], p[2]};
             }

             ProbeOutcome out;
             {
               const SlotGuard slot(st->probe_slots);
               out = run_probe_query(st->trace, st->data, config, query);
             }

             const auto& tokens = st->data.cloud.tokens;
             json discovered = json::array();
             for (const auto& e : out.mcpm.entries) discovered.push_back(e.token);
             json rankings = {{"mcpm", ranking_to_json(out.mcpm, tokens)}};
             if (out.euclidean) rankings["euclidean"] = ranking_to_json(*out.euclidean, tokens, config.diff_top_k);
             if (out.cosine) rankings["cosine"] = ranking_to_json(*out.cosine, tokens, config.diff_top_k);
             send_json(res, {{"ranking", ranking_to_json(out.mcpm, tokens)},
                             {"rankings", rankings},
                             {"discovered", discovered},
                             {"seed", {out.seed.x, out.seed.y, out.seed.z}},
                             {"trajectories", trajectory_sample_json(out.trajectories)},
                             {"direction_stats", direction_stats_to_json(out.stats)},
                             {"diff_table", diff_table_to_json(out.diff)}});
           }));
}

}  // namespace

std::unique_ptr<httplib::Server> make_server(const RunConfig& config, int probe_workers) {
  validate(config);
  auto state = std::make_shared<State>(config, probe_workers);
  auto svr = std::make_unique<httplib::Server>();
  // httplib's default adds SO_REUSEPORT, which lets a second server share a live port.
  svr->set_socket_options([](socket_t sock) {
    int yes = 1;
    setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof(yes));
  });
  mount_routes(*svr, "/api/v1", state);
  mount_routes(*svr, "/api", state);
  return svr;
}

void cmd_serve(const RunConfig& config, const std::string& host, int port, int probe_workers, std::ostream& log) {
  auto svr = make_server(config, probe_workers);
  if (!svr->bind_to_port(host, port)) throw PortInUseError("cannot bind " + host + ":" + std::to_string(port));
  log << "serving on http://" << host << ":" << port << "/api/v1\n" << std::flush;
  svr->listen_after_bind();
}

}  // namespace filament::app
