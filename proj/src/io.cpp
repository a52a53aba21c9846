#include "filament/io.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <ostream>
#include <sstream>

#include "filament/error.hpp"

namespace filament {

using nlohmann::json;

static_assert(std::endian::native == std::endian::little, "field payloads are written in host order");

std::string format_double(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

void write_text_file(const std::filesystem::path& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("cannot write " + path.string());
  out << contents;
  if (!out) throw ParseError("write failed for " + path.string());
}

json field_header_json(const GridDims& dims, const std::string& dtype, const json& meta) {
  return json{{"dims", {dims.nx, dims.ny, dims.nz}},
              {"order", "x-fastest"},
              {"dtype", dtype},
              {"extent", {{0, 0, 0}, {1, 1, 1}}},
              {"meta", meta}};
}

namespace {

template <typename T>
std::string encode_payload(const GridDims& dims, const std::string& dtype, const json& meta, const T* data) {
  std::string out = field_header_json(dims, dtype, meta).dump();
  out.push_back('\n');
  const std::size_t bytes = dims.count() * sizeof(T);
  const std::size_t offset = out.size();
  out.resize(offset + bytes);
  std::memcpy(out.data() + offset, data, bytes);
  return out;
}

FieldHeader parse_header(const std::string& line, const std::filesystem::path& path) {
  FieldHeader h;
  try {
    const json j = json::parse(line);
    const auto& dims = j.at("dims");
    h.dims = {dims.at(0).get<int>(), dims.at(1).get<int>(), dims.at(2).get<int>()};
    h.dtype = j.at("dtype").get<std::string>();
    if (j.at("order").get<std::string>() != "x-fastest") throw ParseError("unsupported order");
    if (j.contains("meta")) h.meta = j.at("meta");
  } catch (const json::exception& e) {
    throw ParseError(path.string() + ": malformed field header: " + e.what());
  }
  if (h.dims.nx < 1 || h.dims.ny < 1 || h.dims.nz < 1) throw ParseError(path.string() + ": non-positive dims");
  return h;
}

template <typename T>
std::vector<T> read_payload(const std::filesystem::path& path, const std::string& dtype, FieldHeader* header_out) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw ParseError(path.string() + ": missing header line");
  FieldHeader h = parse_header(line, path);
  if (h.dtype != dtype) throw ParseError(path.string() + ": dtype " + h.dtype + ", expected " + dtype);
  std::vector<T> values(h.dims.count());
  const auto bytes = static_cast<std::streamsize>(values.size() * sizeof(T));
  in.read(reinterpret_cast<char*>(values.data()), bytes);
  if (in.gcount() != bytes)
    throw ParseError(path.string() + ": payload has " + std::to_string(in.gcount()) + " bytes, expected " +
                     std::to_string(bytes));
  if (in.peek() != std::char_traits<char>::eof()) throw ParseError(path.string() + ": trailing bytes after payload");
  if (header_out) *header_out = std::move(h);
  return values;
}

}  // namespace

std::string encode_field(const ScalarField& field, const json& meta) {
  return encode_payload(field.dims(), "f32le", meta, field.values().data());
}

std::string encode_labels(const ComponentLabels& labels, const json& meta) {
  return encode_payload(labels.dims, "u32le", meta, labels.labels.data());
}

void write_field(const std::filesystem::path& path, const ScalarField& field, const json& meta) {
  write_text_file(path, encode_field(field, meta));
}

void write_labels(const std::filesystem::path& path, const ComponentLabels& labels, const json& meta) {
  write_text_file(path, encode_labels(labels, meta));
}

FieldHeader read_field_header(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw ParseError(path.string() + ": missing header line");
  return parse_header(line, path);
}

ScalarField read_field(const std::filesystem::path& path, FieldHeader* header) {
  FieldHeader h;
  std::vector<float> values = read_payload<float>(path, "f32le", &h);
  ScalarField field(h.dims);
  std::copy(values.begin(), values.end(), field.values().begin());
  if (header) *header = std::move(h);
  return field;
}

std::vector<std::uint32_t> read_labels(const std::filesystem::path& path, FieldHeader* header) {
  return read_payload<std::uint32_t>(path, "u32le", header);
}

std::vector<float> field_slice(const ScalarField& field, int axis, int index, int* width, int* height) {
  const GridDims d = field.dims();
  if (axis < 0 || axis > 2) throw InvariantError("slice axis must be x, y or z");
  if (index < 0 || index >= d[axis])
    throw InvariantError("slice index " + std::to_string(index) + " outside [0, " + std::to_string(d[axis] - 1) + "]");
  const int w = axis == 0 ? d.ny : d.nx;
  const int h = axis == 2 ? d.ny : d.nz;
  std::vector<float> out(static_cast<std::size_t>(w) * h);
  for (int b = 0; b < h; ++b)
    for (int a = 0; a < w; ++a) {
      float v = 0.0f;
      if (axis == 0) v = field.at(index, a, b);
      if (axis == 1) v = field.at(a, index, b);
      if (axis == 2) v = field.at(a, b, index);
      out[static_cast<std::size_t>(b) * w + a] = v;
    }
  if (width) *width = w;
  if (height) *height = h;
  return out;
}

void write_ranking_csv(std::ostream& out, const Ranking& ranking, const std::vector<Token>& tokens) {
  out << "surface,rank,score\n";
  for (std::size_t i = 0; i < ranking.entries.size(); ++i) {
    const RankEntry& e = ranking.entries[i];
    out << tokens.at(e.token).surface << ',' << (i + 1) << ',' << format_double(e.score) << '\n';
  }
}

json ranking_to_json(const Ranking& ranking, const std::vector<Token>& tokens, std::size_t limit) {
  json entries = json::array();
  const std::size_t n = std::min(limit, ranking.entries.size());
  for (std::size_t i = 0; i < n; ++i) {
    const RankEntry& e = ranking.entries[i];
    json score = std::isfinite(e.score) ? json(e.score) : json(format_double(e.score));
    entries.push_back({{"id", e.token}, {"surface", tokens.at(e.token).surface}, {"rank", i + 1}, {"score", score}});
  }
  json j{{"metric", to_string(ranking.metric)}, {"entries", std::move(entries)}, {"total", ranking.entries.size()}};
  if (ranking.query) {
    j["query"] = *ranking.query;
    j["query_surface"] = tokens.at(*ranking.query).surface;
  } else {
    j["query"] = nullptr;
  }
  return j;
}

namespace {
std::string rank_text(const std::optional<std::size_t>& r) { return r ? std::to_string(*r) : "inf"; }
}  // namespace

void write_diff_table_csv(std::ostream& out, const std::vector<DiffRow>& rows) {
  out << "word,mcpm,euclid,cosine,delta\n";
  for (const DiffRow& r : rows)
    out << r.surface << ',' << rank_text(r.rank_a) << ',' << rank_text(r.rank_b) << ',' << rank_text(r.rank_c) << ','
        << format_double(r.delta()) << '\n';
}

json diff_table_to_json(const std::vector<DiffRow>& rows) {
  json out = json::array();
  auto rank_json = [](const std::optional<std::size_t>& r) { return r ? json(*r) : json("inf"); };
  for (const DiffRow& r : rows) {
    const double d = r.delta();
    out.push_back({{"word", r.surface},
                   {"id", r.token},
                   {"mcpm", rank_json(r.rank_a)},
                   {"euclid", rank_json(r.rank_b)},
                   {"cosine", rank_json(r.rank_c)},
                   {"delta", std::isfinite(d) ? json(d) : json(format_double(d))}});
  }
  return out;
}

json word_cloud_json(const std::vector<Ranking>& rankings, const std::vector<Token>& tokens, std::size_t size) {
  json out = json::object();
  for (const Ranking& r : rankings) {
    json words = json::array();
    for (std::size_t i = 0; i < std::min(size, r.entries.size()); ++i) {
      const RankEntry& e = r.entries[i];
      words.push_back({{"surface", tokens.at(e.token).surface},
                       {"score", std::isfinite(e.score) ? json(e.score) : json(format_double(e.score))}});
    }
    out[std::string(to_string(r.metric))] = std::move(words);
  }
  return out;
}

json direction_stats_to_json(const DirectionStats& s) {
  return json{{"histogram", s.histogram},
              {"bimodality", s.bimodality},
              {"circular_variance", s.circular_variance},
              {"peak_azimuth", s.peak_azimuth},
              {"n_modes", s.n_modes},
              {"plane_u", {s.plane_u.x, s.plane_u.y, s.plane_u.z}},
              {"plane_v", {s.plane_v.x, s.plane_v.y, s.plane_v.z}}};
}

void write_trajectories(const std::filesystem::path& path, const TrajectorySet& traj) {
  const std::size_t n_points = static_cast<std::size_t>(traj.n_steps) + 1;
  json header{{"kind", "trajectories"},
              {"n_probes", traj.n_probes},
              {"n_points", n_points},
              {"dtype", "f32le"},
              {"seed", {traj.seed.x, traj.seed.y, traj.seed.z}}};
  std::string out = header.dump();
  out.push_back('\n');
  std::vector<float> flat;
  flat.reserve(traj.points.size() * 3);
  for (const Vec3& p : traj.points) {
    flat.push_back(static_cast<float>(p.x));
    flat.push_back(static_cast<float>(p.y));
    flat.push_back(static_cast<float>(p.z));
  }
  const std::size_t offset = out.size();
  out.resize(offset + flat.size() * sizeof(float));
  std::memcpy(out.data() + offset, flat.data(), flat.size() * sizeof(float));
  write_text_file(path, out);
}

TrajectorySet read_trajectories(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw ParseError(path.string() + ": missing header line");
  TrajectorySet traj;
  std::size_t n_points = 0;
  try {
    const json h = json::parse(line);
    if (h.at("kind") != "trajectories") throw ParseError(path.string() + ": not a trajectory file");
    traj.n_probes = h.at("n_probes").get<std::size_t>();
    n_points = h.at("n_points").get<std::size_t>();
    const auto& s = h.at("seed");
    traj.seed = {s.at(0).get<double>(), s.at(1).get<double>(), s.at(2).get<double>()};
  } catch (const json::exception& e) {
    throw ParseError(path.string() + ": malformed trajectory header: " + e.what());
  }
  if (n_points < 1) throw ParseError(path.string() + ": n_points must be >= 1");
  traj.n_steps = static_cast<int>(n_points) - 1;
  std::vector<float> flat(traj.n_probes * n_points * 3);
  const auto bytes = static_cast<std::streamsize>(flat.size() * sizeof(float));
  in.read(reinterpret_cast<char*>(flat.data()), bytes);
  if (in.gcount() != bytes) throw ParseError(path.string() + ": truncated trajectory payload");
  traj.points.resize(traj.n_probes * n_points);
  for (std::size_t i = 0; i < traj.points.size(); ++i) traj.points[i] = {flat[3 * i], flat[3 * i + 1], flat[3 * i + 2]};
  // Directions are not stored; recover them from consecutive vertices.
  traj.step_directions.reserve(traj.n_probes * static_cast<std::size_t>(traj.n_steps));
  for (std::size_t p = 0; p < traj.n_probes; ++p)
    for (std::size_t s = 0; s + 1 < n_points; ++s)
      traj.step_directions.push_back(normalized(traj.points[p * n_points + s + 1] - traj.points[p * n_points + s]));
  return traj;
}

json trajectory_sample_json(const TrajectorySet& traj, std::size_t max_polylines, std::size_t max_points) {
  json lines = json::array();
  const std::size_t count = std::min(max_polylines, traj.n_probes);
  const std::size_t n_points = static_cast<std::size_t>(traj.n_steps) + 1;
  const std::size_t stride = max_points > 1 && n_points > max_points ? (n_points - 1 + max_points - 2) / (max_points - 1) : 1;
  for (std::size_t k = 0; k < count; ++k) {
    const std::size_t probe = k * traj.n_probes / count;
    const auto line = traj.polyline(probe);
    json pts = json::array();
    for (std::size_t s = 0; s < line.size(); s += stride) pts.push_back({line[s].x, line[s].y, line[s].z});
    if ((line.size() - 1) % stride != 0) pts.push_back({line.back().x, line.back().y, line.back().z});
    lines.push_back({{"probe", probe}, {"points", std::move(pts)}});
  }
  return lines;
}

void write_convergence_csv(const std::filesystem::path& path, const std::vector<double>& series) {
  std::ostringstream out;
  out << "step,change\n";
  for (std::size_t t = 0; t < series.size(); ++t) out << t << ',' << format_double(series[t]) << '\n';
  write_text_file(path, out.str());
}

void write_token_clusters(const std::filesystem::path& path, const PointCloud& cloud, const ClusterLabeling& clusters) {
  std::ostringstream out;
  out << "id\tsurface\tcluster\n";
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    out << cloud.tokens[i].id << '\t' << cloud.tokens[i].surface << '\t';
    if (clusters.token_labels[i])
      out << *clusters.token_labels[i];
    else
      out << "unassigned";
    out << '\n';
  }
  write_text_file(path, out.str());
}

}  // namespace filament
