#include <doctest.h>

#include <httplib.h>
#include <sys/wait.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include "app/commands.hpp"
#include "app/config.hpp"
#include "app/server.hpp"
#include "filament/error.hpp"
#include "filament/ingest.hpp"
#include "filament/io.hpp"

using namespace filament;
using namespace filament::app;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("filament_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

struct Run {
  int code = -1;
  std::string err;
  std::string out;
};

// Runs the filament binary with `args`; stdout and stderr are captured.
Run cli(const std::string& args, const std::string& env = "") {
  const fs::path dir = fs::temp_directory_path();
  const fs::path out = dir / "filament_cli_stdout.txt", err = dir / "filament_cli_stderr.txt";
  const std::string cmd = env + " " + FILAMENT_CLI + " " + args + " >" + out.string() + " 2>" + err.string();
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(err), slurp(out)};
}

// Two tokens for the smoke fit.
fs::path two_token_tsv(const fs::path& dir) {
  const fs::path p = dir / "two.tsv";
  std::ofstream(p) << "surface\tx\ty\tz\na\t0.0\t0.0\t0.0\nb\t1.0\t0.0\t0.0\n";
  return p;
}

// 45 tokens in three groups with 6-D vectors whose first three coordinates carry the layout.
fs::path vectors_file(const fs::path& dir) {
  const fs::path p = dir / "vectors.txt";
  std::ofstream out(p);
  Rng r(99);
  out << "45 6\n";
  const double centers[3][3] = {{0, 0, 0}, {4, 0, 0}, {0, 4, 1}};
  for (int i = 0; i < 45; ++i) {
    const auto& c = centers[i % 3];
    out << (i == 0 ? std::string("wind_NOUN") : "w" + std::to_string(i));
    for (int d = 0; d < 6; ++d) out << ' ' << (d < 3 ? c[d] + r.uniform(-0.6, 0.6) : r.uniform(-0.1, 0.1));
    out << '\n';
  }
  return p;
}

const std::string kTiny = "--seed 7 --grid 32 --agents 5000 --steps 30 --probes 120 --probe-steps 150";

RunConfig tiny_config(const fs::path& vectors, const fs::path& out) {
  RunConfig c;
  c.vectors = vectors;
  c.pca = true;
  c.out_dir = out;
  c.seed = 7;
  c.mcpm.grid = {32, 32, 32};
  c.mcpm.n_agents = 5000;
  c.mcpm.n_steps = 30;
  c.mcpm.trace_window = 30;
  c.probe.n_probes = 120;
  c.probe.n_steps = 150;
  return c;
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

}  // namespace

TEST_SUITE("config") {
  TEST_CASE("JSON round-trip is lossless") {
    RunConfig c = tiny_config("v.txt", "o");
    c.tau = 0.25;
    c.probe.counting = CountingMode::once_per_agent;
    c.mcpm.mode = ExecutionMode::fast;
    const json j = to_json(c);
    CHECK(to_json(config_from_json(j)) == j);
    c.tau = AutoThreshold{0.6};
    CHECK(to_json(config_from_json(to_json(c))) == to_json(c));
  }

  TEST_CASE("unknown keys and enum values are rejected") {
    json j = to_json(tiny_config("v.txt", "o"));
    j["mcpm"]["n_agentz"] = 5;
    CHECK_THROWS_AS(config_from_json(j), ParseError);
    j = to_json(tiny_config("v.txt", "o"));
    j["probe"]["counting"] = "sometimes";
    CHECK_THROWS_AS(config_from_json(j), ParseError);
    j = to_json(tiny_config("v.txt", "o"));
    j["colour"] = "blue";
    CHECK_THROWS_AS(config_from_json(j), ParseError);
  }

  TEST_CASE("the seed is mandatory") {
    RunConfig c = tiny_config("v.txt", "o");
    CHECK_NOTHROW(validate(c));
    c.seed.reset();
    CHECK_THROWS_AS(validate(c), InvariantError);
  }
}

TEST_SUITE("fit") {
  TEST_CASE("two-token TSV at 64^3 with 10^4 agents writes every artifact") {
    const fs::path dir = scratch("fit");
    const fs::path tsv = two_token_tsv(dir);
    const Run r = cli("fit --points " + tsv.string() + " -o " + (dir / "out").string() +
                      " --seed 3 --grid 64 --agents 10000 --steps 40");
    REQUIRE_MESSAGE(r.code == 0, r.err);
    const FieldHeader h = read_field_header(dir / "out" / "trace.field");
    CHECK(h.dims == GridDims{64, 64, 64});
    for (const char* f : {"deposit.field", "convergence.csv", "resolved-config.json", "points.tsv"})
      CHECK_MESSAGE(fs::exists(dir / "out" / f), f);
    CHECK(lines(slurp(dir / "out" / "convergence.csv")).size() == 41);
  }

  TEST_CASE("same seed twice, any thread count: byte-identical trace") {
    const fs::path dir = scratch("rerun");
    const fs::path tsv = two_token_tsv(dir);
    const std::string common = " --points " + tsv.string() + " --seed 11 --grid 32 --agents 4000 --steps 25";
    REQUIRE(cli("fit -o " + (dir / "a").string() + common + " --threads 1").code == 0);
    REQUIRE(cli("fit -o " + (dir / "b").string() + common + " --threads 3").code == 0);
    CHECK(slurp(dir / "a" / "trace.field") == slurp(dir / "b" / "trace.field"));
    CHECK(slurp(dir / "a" / "deposit.field") == slurp(dir / "b" / "deposit.field"));
  }

  TEST_CASE("resolved-config.json reproduces the run") {
    const fs::path dir = scratch("resolved");
    const fs::path tsv = two_token_tsv(dir);
    REQUIRE(cli("fit -o " + (dir / "a").string() + " --points " + tsv.string() + " --seed 5 --grid 32 --agents 3000 --steps 20")
                .code == 0);
    const Run again = cli("fit -c " + (dir / "a" / "resolved-config.json").string() + " -o " + (dir / "b").string());
    REQUIRE_MESSAGE(again.code == 0, again.err);
    CHECK(slurp(dir / "a" / "trace.field") == slurp(dir / "b" / "trace.field"));
  }

  TEST_CASE("output directory from the environment") {
    const fs::path dir = scratch("env");
    const fs::path tsv = two_token_tsv(dir);
    const Run r = cli("fit --points " + tsv.string() + " --seed 5 --grid 16 --agents 500 --steps 5",
                      std::string(kOutDirEnv) + "=" + (dir / "envout").string());
    REQUIRE_MESSAGE(r.code == 0, r.err);
    CHECK(fs::exists(dir / "envout" / "trace.field"));
  }

  TEST_CASE("missing input exits 2 naming the path; missing seed exits 3") {
    const fs::path dir = scratch("errors");
    const std::string missing = (dir / "nope.tsv").string();
    const Run r = cli("fit --points " + missing + " --seed 1 -o " + (dir / "o").string());
    CHECK(r.code == kExitParse);
    CHECK(r.err.find(missing) != std::string::npos);
    const Run s = cli("fit --points " + two_token_tsv(dir).string() + " -o " + (dir / "o").string());
    CHECK(s.code == kExitInvariant);
    const Run bad = cli("fit --bogus");
    CHECK(bad.code == kExitParse);
  }
}

TEST_SUITE("probe, rank, cluster, export") {
  TEST_CASE("probe outputs, --pos equivalence and library agreement") {
    const fs::path dir = scratch("probe");
    const fs::path vec = vectors_file(dir);
    const std::string base = "--vectors " + vec.string() + " --pca " + kTiny;
    const std::string out_a = (dir / "a").string();
    REQUIRE(cli("fit -o " + out_a + " " + base).code == 0);
    const Run p = cli("probe --token wind_NOUN -o " + out_a + " " + base);
    REQUIRE_MESSAGE(p.code == 0, p.err);
    const fs::path probe_dir = dir / "a" / "probe";
    for (const char* f : {"ranking_mcpm.csv", "ranking_mcpm.json", "ranking_euclidean.csv", "ranking_cosine.csv",
                          "diff_table.csv", "diff_table.json", "direction_stats.json", "wordcloud.json",
                          "trajectories.bin", "resolved-config.json"})
      CHECK_MESSAGE(fs::exists(probe_dir / f), f);

    // Rank-1 score is the maximum.
    const auto rows = lines(slurp(probe_dir / "ranking_mcpm.csv"));
    REQUIRE(rows.size() > 2);
    CHECK(rows[0] == "surface,rank,score");
    auto score = [](const std::string& row) { return std::stod(row.substr(row.rfind(',') + 1)); };
    for (std::size_t i = 2; i < rows.size(); ++i) CHECK(score(rows[1]) >= score(rows[i]));

    // Diff table mirrors the (word, mcpm, euclid, cosine) layout.
    CHECK(lines(slurp(probe_dir / "diff_table.csv"))[0] == "word,mcpm,euclid,cosine,delta");

    // --pos at the token's normalized coordinates gives the same ranking.
    const PointCloud fitted = load_points_3d(dir / "a" / "points.tsv");
    const Vec3 q = fitted.positions[0];
    std::ostringstream pos;
    pos.precision(17);
    pos << q.x << ',' << q.y << ',' << q.z;
    const std::string out_b = (dir / "b").string();
    fs::create_directories(out_b);
    fs::copy(dir / "a" / "trace.field", dir / "b" / "trace.field");
    fs::copy(dir / "a" / "points.tsv", dir / "b" / "points.tsv");
    const Run pp = cli("probe --pos " + pos.str() + " -o " + out_b + " " + base);
    REQUIRE_MESSAGE(pp.code == 0, pp.err);
    CHECK(slurp(dir / "b" / "probe" / "ranking_mcpm.csv") == slurp(probe_dir / "ranking_mcpm.csv"));

    // The CLI adds no hidden state: same ranking as the library call.
    const RunConfig cfg = load_config(probe_dir / "resolved-config.json");
    const Ranking lib = mcpm_similarity(read_field(dir / "a" / "trace.field"), fitted, 0, cfg.probe,
                                        Rng(seed_of(cfg)), cfg.n_repeats);
    std::ostringstream lib_csv;
    write_ranking_csv(lib_csv, lib, fitted.tokens);
    CHECK(lib_csv.str() == slurp(probe_dir / "ranking_mcpm.csv"));

    // Byte-identical rerun.
    const std::string before = slurp(probe_dir / "trajectories.bin");
    REQUIRE(cli("probe --token wind_NOUN -o " + out_a + " " + base).code == 0);
    CHECK(slurp(probe_dir / "trajectories.bin") == before);

    // rank prints a CSV ranking to stdout.
    const Run rank = cli("rank --token wind_NOUN --metric cosine --limit 5 -o " + out_a + " " + base);
    REQUIRE_MESSAGE(rank.code == 0, rank.err);
    const auto rank_rows = lines(rank.out);
    CHECK(rank_rows.size() == 6);
    CHECK(rank_rows[0] == "surface,rank,score");
  }

  TEST_CASE("unknown token exits 4 with suggestions") {
    const fs::path dir = scratch("unknown");
    const fs::path vec = vectors_file(dir);
    const std::string base = "--vectors " + vec.string() + " --pca " + kTiny + " -o " + (dir / "o").string();
    REQUIRE(cli("fit " + base).code == 0);
    const Run r = cli("probe --token wind_NOUM " + base);
    CHECK(r.code == kExitUnknownToken);
    CHECK(r.err.find("wind_NOUN") != std::string::npos);
    CHECK(cli("rank --token nothing_here " + base).code == kExitUnknownToken);
  }

  TEST_CASE("cluster writes one TSV row per token; tau above the max still exits 0") {
    const fs::path dir = scratch("cluster");
    const fs::path vec = vectors_file(dir);
    const std::string base = "--vectors " + vec.string() + " --pca " + kTiny + " -o " + (dir / "o").string();
    REQUIRE(cli("fit " + base).code == 0);
    const Run c = cli("cluster " + base);
    REQUIRE_MESSAGE(c.code == 0, c.err);
    CHECK(lines(slurp(dir / "o" / "cluster" / "token_clusters.tsv")).size() == 45 + 1);
    FieldHeader h;
    const auto labels = read_labels(dir / "o" / "cluster" / "labels.field", &h);
    CHECK(h.dtype == "u32le");
    CHECK(labels.size() == 32u * 32u * 32u);
    const Run none = cli("cluster --tau 1e9 " + base);
    CHECK(none.code == 0);
    CHECK(none.err.find("warning") != std::string::npos);
    CHECK(json::parse(slurp(dir / "o" / "cluster" / "clusters.json"))["n_components"] == 0);
  }

  TEST_CASE("export slice, raw and points") {
    const fs::path dir = scratch("export");
    const fs::path tsv = two_token_tsv(dir);
    const std::string base = "--points " + tsv.string() + " --seed 2 --grid 16 --agents 800 --steps 5 -o " + (dir / "o").string();
    REQUIRE(cli("fit " + base).code == 0);
    REQUIRE(cli("export slice --axis y --index 3 --to " + (dir / "s.csv").string() + " " + base).code == 0);
    CHECK(lines(slurp(dir / "s.csv")).size() == 16);
    REQUIRE(cli("export raw --field deposit --to " + (dir / "d.raw").string() + " " + base).code == 0);
    CHECK(fs::file_size(dir / "d.raw") == 16u * 16u * 16u * 4u);
    REQUIRE(cli("export points --to " + (dir / "p.tsv").string() + " " + base).code == 0);
    CHECK(lines(slurp(dir / "p.tsv")).size() == 3);
    CHECK(cli("export slice --index 99 --to " + (dir / "x.csv").string() + " " + base).code == kExitInvariant);
  }
}

TEST_SUITE("serve") {
  TEST_CASE("REST routes, determinism through the API, and port conflicts") {
    const fs::path dir = scratch("serve");
    const fs::path tsv = dir / "pts.tsv";
    {
      std::ofstream out(tsv);
      out << "surface\tx\ty\tz\n";
      Rng r(4);
      for (int i = 0; i < 30; ++i)
        out << (i == 0 ? std::string("a") : "t" + std::to_string(i)) << '\t' << r.uniform() << '\t' << r.uniform() << '\t'
            << r.uniform() << '\n';
    }
    const std::string base = "--points " + tsv.string() + " --seed 9 --grid 64 --agents 10000 --steps 20 --probes 60 --probe-steps 80 -o " +
                             (dir / "o").string();
    REQUIRE(cli("fit " + base).code == 0);
    REQUIRE(cli("cluster " + base).code == 0);

    RunConfig cfg = load_config(dir / "o" / "resolved-config.json");
    auto svr = make_server(cfg, 2);
    const int port = svr->bind_to_any_port("127.0.0.1");
    REQUIRE(port > 0);
    std::thread worker([&] { svr->listen_after_bind(); });
    svr->wait_until_ready();
    httplib::Client client("127.0.0.1", port);

    auto tokens = client.Get("/api/tokens?limit=2");
    REQUIRE(tokens);
    CHECK(tokens->status == 200);
    const json tj = json::parse(tokens->body);
    REQUIRE(tj["tokens"].size() == 2);
    CHECK(tj["tokens"][0]["pos"].size() == 3);
    CHECK(tj["total"] == 30);

    auto v1 = client.Get("/api/v1/token/0");
    REQUIRE(v1);
    CHECK(json::parse(v1->body)["surface"] == "a");
    CHECK(client.Get("/api/v1/token/999")->status == 404);

    const std::string body = R"({"token":"a","seed":7})";
    auto p1 = client.Post("/api/probe", body, "application/json");
    auto p2 = client.Post("/api/probe", body, "application/json");
    REQUIRE(p1);
    REQUIRE(p2);
    REQUIRE(p1->status == 200);
    const json j1 = json::parse(p1->body), j2 = json::parse(p2->body);
    CHECK(j1["ranking"] == j2["ranking"]);
    CHECK(j1["trajectories"].size() <= 200);
    CHECK(j1.contains("direction_stats"));
    CHECK(j1["discovered"].size() == j1["ranking"]["entries"].size());

    auto unknown = client.Post("/api/probe", R"({"token":"zz","seed":7})", "application/json");
    REQUIRE(unknown);
    CHECK(unknown->status == 404);
    CHECK(client.Post("/api/probe", "{not json", "application/json")->status == 400);
    CHECK(client.Post("/api/probe", R"({"token":"a"})", "application/json")->status == 200);

    auto slice = client.Get("/api/field/slice?axis=z&index=31");
    REQUIRE(slice);
    CHECK(slice->status == 200);
    CHECK(slice->body.size() == 64u * 64u * 4u);
    CHECK(slice->get_header_value("X-Dims") == "64,64");
    CHECK(slice->get_header_value("X-Dtype") == "f32le");
    CHECK(client.Get("/api/field/slice?axis=z&index=64")->status == 422);

    auto meta = client.Get("/api/v1/field/meta");
    REQUIRE(meta);
    CHECK(json::parse(meta->body)["dims"] == json::array({64, 64, 64}));
    auto clusters = client.Get("/api/v1/clusters");
    REQUIRE(clusters);
    CHECK(json::parse(clusters->body)["token_labels"].size() == 30);
    auto rankings = client.Get("/api/v1/rankings?token=a&metric=euclidean&limit=3");
    REQUIRE(rankings);
    CHECK(json::parse(rankings->body)["entries"].size() == 3);

    // A second server on the same port exits 5.
    const Run clash = cli("serve --port " + std::to_string(port) + " " + base);
    CHECK(clash.code == kExitPortInUse);

    svr->stop();
    worker.join();
  }
}
