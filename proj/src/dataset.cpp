#include "vdpcn/dataset.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>

#include "vdpcn/geometry.hpp"

namespace vdpcn::dataset {

namespace fs = std::filesystem;
constexpr double kPi = std::numbers::pi;

double crop_ratio(Difficulty d)
{
  switch (d) {
  case Difficulty::simple: return 0.25;
  case Difficulty::moderate: return 0.50;
  case Difficulty::hard: return 0.75;
  }
  return 0.5;
}

char to_char(Difficulty d)
{
  switch (d) {
  case Difficulty::simple: return 'S';
  case Difficulty::moderate: return 'M';
  case Difficulty::hard: return 'H';
  }
  return 'M';
}

Difficulty difficulty_from_string(std::string const &s)
{
  if (s == "S" || s == "simple") return Difficulty::simple;
  if (s == "M" || s == "moderate") return Difficulty::moderate;
  if (s == "H" || s == "hard") return Difficulty::hard;
  throw std::invalid_argument("unknown difficulty '" + s + "' (expected S, M or H)");
}

double sphere_area(double r) { return 4.0 * kPi * r * r; }
double box_area(Vector3 const &h) { return 8.0 * (h.y() * h.z() + h.x() * h.z() + h.x() * h.y()); }
double cylinder_area(double r, double half_height) { return 2.0 * kPi * r * (2.0 * half_height) + 2.0 * kPi * r * r; }
double torus_area(double major, double minor) { return 4.0 * kPi * kPi * major * minor; }

PointCloud sample_sphere(Rng &rng, Index n, double radius)
{
  PointCloud out(n, 3);
  for (Index i = 0; i < n; ++i) { out.row(i) = rng.unit_vector().transpose() * radius; }
  return out;
}

PointCloud sample_box(Rng &rng, Index n, Vector3 const &h)
{
  // Face pairs orthogonal to x, y, z, weighted by area.
  double const ax = h.y() * h.z(), ay = h.x() * h.z(), az = h.x() * h.y();
  double const total = ax + ay + az;
  PointCloud out(n, 3);
  for (Index i = 0; i < n; ++i) {
    double const pick = rng.uniform() * total;
    int const axis = pick < ax ? 0 : (pick < ax + ay ? 1 : 2);
    double const sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
    Vector3 p;
    for (int a = 0; a < 3; ++a) { p(a) = a == axis ? sign * h(a) : rng.uniform(-h(a), h(a)); }
    out.row(i) = p.transpose();
  }
  return out;
}

PointCloud sample_cylinder(Rng &rng, Index n, double r, double half_height)
{
  double const lateral = 2.0 * kPi * r * 2.0 * half_height;
  double const cap = kPi * r * r;
  PointCloud out(n, 3);
  for (Index i = 0; i < n; ++i) {
    double const pick = rng.uniform() * (lateral + 2.0 * cap);
    if (pick < lateral) {
      double const a = rng.uniform(0.0, 2.0 * kPi);
      out.row(i) << r * std::cos(a), r * std::sin(a), rng.uniform(-half_height, half_height);
    } else {
      double const a = rng.uniform(0.0, 2.0 * kPi);
      double const rho = r * std::sqrt(rng.uniform());
      double const z = pick < lateral + cap ? half_height : -half_height;
      out.row(i) << rho * std::cos(a), rho * std::sin(a), z;
    }
  }
  return out;
}

PointCloud sample_torus(Rng &rng, Index n, double major, double minor)
{
  // Area element is proportional to (R + r cos phi); rejection on phi.
  PointCloud out(n, 3);
  for (Index i = 0; i < n; ++i) {
    double phi = 0.0;
    do {
      phi = rng.uniform(0.0, 2.0 * kPi);
    } while (rng.uniform() * (major + minor) > major + minor * std::cos(phi));
    double const theta = rng.uniform(0.0, 2.0 * kPi);
    double const ring = major + minor * std::cos(phi);
    out.row(i) << ring * std::cos(theta), ring * std::sin(theta), minor * std::sin(phi);
  }
  return out;
}

PointCloud sample_composite(Rng &rng, std::vector<Part> const &parts, Index n, std::vector<Index> *counts)
{
  if (parts.empty()) { throw std::invalid_argument("sample_composite: no parts"); }
  double total = 0.0;
  for (auto const &p : parts) { total += p.area; }
  std::vector<Index> per(parts.size(), 0);
  for (Index i = 0; i < n; ++i) {
    double pick = rng.uniform() * total;
    size_t k = 0;
    while (k + 1 < parts.size() && pick >= parts[k].area) {
      pick -= parts[k].area;
      ++k;
    }
    ++per[k];
  }
  PointCloud out(n, 3);
  Index row = 0;
  for (size_t k = 0; k < parts.size(); ++k) {
    if (per[k] == 0) { continue; }
    out.middleRows(row, per[k]) = parts[k].sample(rng, per[k]);
    row += per[k];
  }
  if (counts) { *counts = per; }
  return out;
}

namespace {

Eigen::Matrix3d random_rotation(Rng &rng)
{
  Eigen::Quaterniond q(rng.normal(), rng.normal(), rng.normal(), rng.normal());
  q.normalize();
  return q.toRotationMatrix();
}

Part random_part(Rng &rng, int kind)
{
  Part part;
  switch (kind) {
  case 0: {
    double const r = rng.uniform(0.3, 1.0);
    part.area = sphere_area(r);
    part.sample = [r](Rng &g, Index n) { return sample_sphere(g, n, r); };
    break;
  }
  case 1: {
    Vector3 const h(rng.uniform(0.2, 1.0), rng.uniform(0.2, 1.0), rng.uniform(0.2, 1.0));
    part.area = box_area(h);
    part.sample = [h](Rng &g, Index n) { return sample_box(g, n, h); };
    break;
  }
  case 2: {
    double const r = rng.uniform(0.2, 0.7), hh = rng.uniform(0.3, 1.0);
    part.area = cylinder_area(r, hh);
    part.sample = [r, hh](Rng &g, Index n) { return sample_cylinder(g, n, r, hh); };
    break;
  }
  default: {
    double const big = rng.uniform(0.5, 1.0), small = rng.uniform(0.1, 0.35);
    part.area = torus_area(big, small);
    part.sample = [big, small](Rng &g, Index n) { return sample_torus(g, n, big, small); };
    break;
  }
  }
  return part;
}

// Places a part: rotate then translate every sampled point.
Part posed(Part part, Eigen::Matrix3d const &rotation, Vector3 const &offset)
{
  auto inner = std::move(part.sample);
  part.sample = [inner = std::move(inner), rotation, offset](Rng &g, Index n) {
    PointCloud p = inner(g, n) * rotation.transpose();
    p.rowwise() += offset.transpose();
    return p;
  };
  return part;
}

} // namespace

std::vector<Shape> generate_synthetic(Index n_shapes, std::uint64_t seed, Index points_per_shape)
{
  if (n_shapes < 1 || points_per_shape < 1) { throw std::invalid_argument("generate_synthetic: counts must be positive"); }
  static char const *const kCategories[] = {"sphere", "box", "cylinder", "torus", "composite"};
  Rng master(seed);
  std::vector<Shape> shapes;
  shapes.reserve(static_cast<size_t>(n_shapes));
  for (Index i = 0; i < n_shapes; ++i) {
    Rng rng(master.next());
    int const kind = static_cast<int>(i % 5);
    std::vector<Part> parts;
    if (kind < 4) {
      parts.push_back(posed(random_part(rng, kind), random_rotation(rng), Vector3::Zero()));
    } else {
      int const count = 2 + static_cast<int>(rng.below(2));
      for (int k = 0; k < count; ++k) {
        Vector3 const offset(rng.uniform(-0.8, 0.8), rng.uniform(-0.8, 0.8), rng.uniform(-0.8, 0.8));
        parts.push_back(posed(random_part(rng, static_cast<int>(rng.below(4))), random_rotation(rng), offset));
      }
    }
    PointCloud raw = sample_composite(rng, parts, points_per_shape);
    raw = raw * random_rotation(rng).transpose();
    shapes.push_back({kCategories[kind], geometry::normalize_to_unit(raw).cloud});
  }
  return shapes;
}

Vector3 crop_viewpoint(std::uint64_t seed)
{
  Rng rng(seed ^ 0x9e3779b97f4a7c15ull);
  return rng.unit_vector();
}

PointCloud make_partial(PointCloud const &gt, Difficulty difficulty, std::uint64_t seed, Index input_points)
{
  auto crop = geometry::knn_crop(gt, crop_viewpoint(seed), crop_ratio(difficulty));
  if (crop.partial.rows() <= input_points) { return std::move(crop.partial); }
  return geometry::farthest_point_sample<double>(crop.partial, input_points);
}

// ---------------------------------------------------------------------------
// PLY

void save_ply(PointCloud const &cloud, fs::path const &path, PlyFormat format)
{
  if (path.has_parent_path()) { fs::create_directories(path.parent_path()); }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) { throw PlyError("cannot open " + path.string() + " for writing"); }
  bool const binary = format == PlyFormat::binary_little_endian;
  out << "ply\nformat " << (binary ? "binary_little_endian" : "ascii") << " 1.0\n"
      << "element vertex " << cloud.rows() << "\n"
      << "property double x\nproperty double y\nproperty double z\nend_header\n";
  if (binary) {
    out.write(reinterpret_cast<char const *>(cloud.data()), static_cast<std::streamsize>(cloud.size() * sizeof(double)));
  } else {
    out.precision(17);
    for (Index i = 0; i < cloud.rows(); ++i) { out << cloud(i, 0) << ' ' << cloud(i, 1) << ' ' << cloud(i, 2) << '\n'; }
  }
  if (!out) { throw PlyError("failed writing " + path.string()); }
}

namespace {

struct PlyProperty
{
  std::string name;
  std::string type;
  bool is_list = false;
  std::string count_type;
};

struct PlyElement
{
  std::string name;
  Index count = 0;
  std::vector<PlyProperty> properties;
};

size_t type_size(std::string const &t)
{
  static std::map<std::string, size_t> const sizes = {
    {"char", 1}, {"int8", 1}, {"uchar", 1}, {"uint8", 1}, {"short", 2}, {"int16", 2}, {"ushort", 2}, {"uint16", 2},
    {"int", 4}, {"int32", 4}, {"uint", 4}, {"uint32", 4}, {"float", 4}, {"float32", 4}, {"double", 8}, {"float64", 8}};
  auto it = sizes.find(t);
  if (it == sizes.end()) { throw PlyError("unknown PLY property type '" + t + "'"); }
  return it->second;
}

double decode(std::string const &t, char const *p)
{
  auto as = [p]<typename T>(T) {
    T v;
    std::memcpy(&v, p, sizeof(T));
    return static_cast<double>(v);
  };
  if (t == "char" || t == "int8") return as(std::int8_t{});
  if (t == "uchar" || t == "uint8") return as(std::uint8_t{});
  if (t == "short" || t == "int16") return as(std::int16_t{});
  if (t == "ushort" || t == "uint16") return as(std::uint16_t{});
  if (t == "int" || t == "int32") return as(std::int32_t{});
  if (t == "uint" || t == "uint32") return as(std::uint32_t{});
  if (t == "float" || t == "float32") return as(float{});
  return as(double{});
}

} // namespace

PointCloud load_ply(fs::path const &path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in) { throw PlyError("cannot open " + path.string()); }
  std::string line;
  std::getline(in, line);
  if (line != "ply" && line != "ply\r") { throw PlyError(path.string() + ": malformed header (missing 'ply' magic)"); }

  std::string format;
  std::vector<PlyElement> elements;
  bool ended = false;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') { line.pop_back(); }
    std::istringstream ls(line);
    std::string word;
    ls >> word;
    if (word == "format") {
      std::string version;
      ls >> format >> version;
    } else if (word == "element") {
      PlyElement e;
      if (!(ls >> e.name >> e.count) || e.count < 0) { throw PlyError(path.string() + ": malformed header line '" + line + "'"); }
      elements.push_back(e);
    } else if (word == "property") {
      if (elements.empty()) { throw PlyError(path.string() + ": property before any element"); }
      PlyProperty p;
      std::string first;
      ls >> first;
      if (first == "list") {
        p.is_list = true;
        ls >> p.count_type >> p.type >> p.name;
      } else {
        p.type = first;
        ls >> p.name;
      }
      if (p.name.empty()) { throw PlyError(path.string() + ": malformed header line '" + line + "'"); }
      type_size(p.type);
      if (p.is_list) { type_size(p.count_type); }
      elements.back().properties.push_back(p);
    } else if (word == "end_header") {
      ended = true;
      break;
    } else if (word == "comment" || word == "obj_info" || word.empty()) {
      continue;
    } else {
      throw PlyError(path.string() + ": malformed header line '" + line + "'");
    }
  }
  if (!ended) { throw PlyError(path.string() + ": malformed header (no end_header)"); }
  if (format != "ascii" && format != "binary_little_endian") {
    throw PlyError(path.string() + ": unsupported PLY format '" + format + "'");
  }

  auto vertex_it = std::find_if(elements.begin(), elements.end(), [](auto const &e) { return e.name == "vertex"; });
  if (vertex_it == elements.end()) { throw PlyError(path.string() + ": no vertex element"); }
  int axis_prop[3] = {-1, -1, -1};
  for (size_t i = 0; i < vertex_it->properties.size(); ++i) {
    auto const &p = vertex_it->properties[i];
    for (int a = 0; a < 3; ++a) {
      if (!p.is_list && p.name == std::string(1, static_cast<char>('x' + a))) { axis_prop[a] = static_cast<int>(i); }
    }
  }
  for (int a = 0; a < 3; ++a) {
    if (axis_prop[a] < 0) {
      throw PlyError(path.string() + ": vertex element lacks property '" + std::string(1, static_cast<char>('x' + a)) + "'");
    }
  }

  PointCloud cloud(vertex_it->count, 3);
  bool const binary = format == "binary_little_endian";
  for (auto const &e : elements) {
    bool const is_vertex = &e == &*vertex_it;
    for (Index r = 0; r < e.count; ++r) {
      auto truncated = [&]() {
        if (is_vertex) {
          return PlyError(path.string() + ": truncated body, expected " + std::to_string(e.count) + " vertices, found " + std::to_string(r));
        }
        return PlyError(path.string() + ": truncated body in element '" + e.name + "'");
      };
      if (binary) {
        for (size_t pi = 0; pi < e.properties.size(); ++pi) {
          auto const &p = e.properties[pi];
          if (p.is_list) {
            char buf[8];
            size_t const cs = type_size(p.count_type);
            if (!in.read(buf, static_cast<std::streamsize>(cs))) { throw truncated(); }
            auto const n = static_cast<std::streamsize>(decode(p.count_type, buf));
            if (!in.ignore(n * static_cast<std::streamsize>(type_size(p.type))) || in.gcount() != n * static_cast<std::streamsize>(type_size(p.type))) {
              throw truncated();
            }
            continue;
          }
          char buf[8];
          size_t const sz = type_size(p.type);
          if (!in.read(buf, static_cast<std::streamsize>(sz))) { throw truncated(); }
          if (is_vertex) {
            for (int a = 0; a < 3; ++a) {
              if (axis_prop[a] == static_cast<int>(pi)) { cloud(r, a) = decode(p.type, buf); }
            }
          }
        }
      } else {
        if (!std::getline(in, line)) { throw truncated(); }
        std::istringstream ls(line);
        if (!is_vertex) { continue; }
        std::vector<double> values;
        double v;
        while (ls >> v) { values.push_back(v); }
        // Only fixed-size vertex properties are addressable by position; lists are not expected here.
        for (int a = 0; a < 3; ++a) {
          if (static_cast<size_t>(axis_prop[a]) >= values.size()) {
            throw PlyError(path.string() + ": vertex " + std::to_string(r) + " has too few values");
          }
          cloud(r, a) = values[static_cast<size_t>(axis_prop[a])];
        }
      }
    }
  }
  return cloud;
}

// ---------------------------------------------------------------------------
// Manifest

DatasetManifest build_manifest(fs::path const &root, std::vector<ManifestEntry> entries, double split_fraction, std::uint64_t seed)
{
  if (!(split_fraction >= 0.0 && split_fraction <= 1.0)) { throw std::invalid_argument("split fraction must lie in [0, 1]"); }
  std::vector<std::string> missing;
  std::map<std::string, int> seen;
  for (auto const &e : entries) {
    if (++seen[e.id] > 1) { throw std::invalid_argument("duplicate sample id '" + e.id + "'"); }
    if (!fs::exists(root / e.gt_file)) { missing.push_back((root / e.gt_file).string()); }
  }
  if (!missing.empty()) {
    std::string msg = "missing dataset files:";
    for (auto const &m : missing) { msg += " " + m; }
    throw std::runtime_error(msg);
  }
  DatasetManifest m;
  m.root = root;
  m.split_fraction = split_fraction;
  m.split_seed = seed;
  m.samples = std::move(entries);
  std::vector<std::string> ids;
  for (auto const &e : m.samples) { ids.push_back(e.id); }
  Rng rng(seed);
  rng.shuffle(ids.begin(), ids.end());
  auto const n_train = static_cast<size_t>(std::llround(split_fraction * static_cast<double>(ids.size())));
  m.train.assign(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_train));
  m.test.assign(ids.begin() + static_cast<std::ptrdiff_t>(n_train), ids.end());
  return m;
}

nlohmann::json to_json(DatasetManifest const &m)
{
  nlohmann::json samples = nlohmann::json::array();
  for (auto const &e : m.samples) {
    samples.push_back(
      {{"id", e.id}, {"category", e.category}, {"gt_file", e.gt_file}, {"difficulty", std::string(1, to_char(e.difficulty))}, {"seed", e.seed}});
  }
  return {
    {"version", m.version},
    {"split", {{"fraction", m.split_fraction}, {"seed", m.split_seed}, {"train", m.train}, {"test", m.test}}},
    {"samples", samples}};
}

DatasetManifest manifest_from_json(nlohmann::json const &j, fs::path const &root)
{
  DatasetManifest m;
  m.root = root;
  m.version = j.at("version").get<int>();
  if (m.version != DatasetManifest::kVersion) { throw std::runtime_error("unsupported manifest version " + std::to_string(m.version)); }
  auto const &split = j.at("split");
  m.split_fraction = split.at("fraction").get<double>();
  m.split_seed = split.at("seed").get<std::uint64_t>();
  m.train = split.at("train").get<std::vector<std::string>>();
  m.test = split.at("test").get<std::vector<std::string>>();
  for (auto const &s : j.at("samples")) {
    m.samples.push_back(
      {s.at("id").get<std::string>(),
       s.at("category").get<std::string>(),
       s.at("gt_file").get<std::string>(),
       difficulty_from_string(s.at("difficulty").get<std::string>()),
       s.at("seed").get<std::uint64_t>()});
  }
  return m;
}

void write_manifest(DatasetManifest const &m, fs::path const &path)
{
  if (path.has_parent_path()) { fs::create_directories(path.parent_path()); }
  std::ofstream out(path, std::ios::trunc);
  if (!out) { throw std::runtime_error("cannot write manifest " + path.string()); }
  out << to_json(m).dump(2) << '\n';
}

DatasetManifest read_manifest(fs::path const &path)
{
  std::ifstream in(path);
  if (!in) { throw std::runtime_error("cannot read manifest " + path.string()); }
  return manifest_from_json(nlohmann::json::parse(in), path.parent_path());
}

std::vector<Sample> load_split(DatasetManifest const &m, std::string const &split, Index input_points)
{
  std::vector<std::string> const *ids = nullptr;
  if (split == "train") {
    ids = &m.train;
  } else if (split == "test") {
    ids = &m.test;
  } else {
    throw std::invalid_argument("unknown split '" + split + "'");
  }
  std::map<std::string, ManifestEntry const *> by_id;
  for (auto const &e : m.samples) { by_id[e.id] = &e; }
  std::vector<Sample> out;
  for (auto const &id : *ids) {
    auto it = by_id.find(id);
    if (it == by_id.end()) { throw std::runtime_error("manifest split references unknown id '" + id + "'"); }
    ManifestEntry const &e = *it->second;
    Sample s;
    s.id = e.id;
    s.category = e.category;
    s.gt = load_ply(m.root / e.gt_file);
    s.difficulty = e.difficulty;
    s.seed = e.seed;
    s.partial = make_partial(s.gt, e.difficulty, e.seed, input_points);
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<Sample> make_samples(std::vector<Shape> const &shapes, std::uint64_t seed, Index input_points, std::optional<Difficulty> fixed)
{
  static Difficulty const kCycle[] = {Difficulty::simple, Difficulty::moderate, Difficulty::hard};
  std::vector<Sample> out;
  for (size_t i = 0; i < shapes.size(); ++i) {
    Sample s;
    char buf[32];
    std::snprintf(buf, sizeof(buf), "shape_%05zu", i);
    s.id = buf;
    s.category = shapes[i].category;
    s.gt = shapes[i].points;
    s.difficulty = fixed ? *fixed : kCycle[i % 3];
    s.seed = seed * 1000003ull + i;
    s.partial = make_partial(s.gt, s.difficulty, s.seed, input_points);
    out.push_back(std::move(s));
  }
  return out;
}

} // namespace vdpcn::dataset
