#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "vdpcn/rng.hpp"
#include "vdpcn/types.hpp"

namespace vdpcn::dataset {

enum class Difficulty
{
  simple,
  moderate,
  hard,
};

/// Fraction of points removed: 0.25 / 0.50 / 0.75.
double crop_ratio(Difficulty d);
char to_char(Difficulty d);
Difficulty difficulty_from_string(std::string const &s);

struct Sample
{
  std::string id;
  std::string category;
  PointCloud partial;
  PointCloud gt;
  Difficulty difficulty = Difficulty::moderate;
  std::uint64_t seed = 0;
};

struct Shape
{
  std::string category;
  PointCloud points;
};

// Uniform surface samplers for individual primitives, in their own frames.
PointCloud sample_sphere(Rng &rng, Index n, double radius = 1.0);
PointCloud sample_box(Rng &rng, Index n, Vector3 const &half_extents);
PointCloud sample_cylinder(Rng &rng, Index n, double radius, double half_height);
PointCloud sample_torus(Rng &rng, Index n, double major_radius, double minor_radius);

double sphere_area(double radius);
double box_area(Vector3 const &half_extents);
double cylinder_area(double radius, double half_height);
double torus_area(double major_radius, double minor_radius);

/// One primitive placed in a composite: sampler closure plus its surface area.
struct Part
{
  double area = 0.0;
  std::function<PointCloud(Rng &, Index)> sample;
};

/// Area-weighted multinomial sampling over parts. `counts`, if given, receives points per part.
PointCloud sample_composite(Rng &rng, std::vector<Part> const &parts, Index n, std::vector<Index> *counts = nullptr);

/// Procedural shapes (sphere, box, cylinder, torus, composite), randomly posed
/// and normalized to the unit ball. Deterministic in `seed`.
std::vector<Shape> generate_synthetic(Index n_shapes, std::uint64_t seed, Index points_per_shape);

/// Crops the ratio for `difficulty` nearest to a seeded viewpoint on the unit
/// sphere, then FPS-resamples the remainder to `input_points` (keeping all
/// points if fewer remain).
PointCloud make_partial(PointCloud const &gt, Difficulty difficulty, std::uint64_t seed, Index input_points = 2048);

/// Seed point used by make_partial.
Vector3 crop_viewpoint(std::uint64_t seed);

enum class PlyFormat
{
  ascii,
  binary_little_endian,
};

/// Binary output stores x, y, z as float64, so a round trip is bit-exact.
void save_ply(PointCloud const &cloud, std::filesystem::path const &path, PlyFormat format = PlyFormat::binary_little_endian);
/// Reads ASCII or binary little-endian PLY; extra vertex properties and
/// non-vertex elements are skipped. Throws PlyError.
PointCloud load_ply(std::filesystem::path const &path);

class PlyError : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

struct ManifestEntry
{
  std::string id;
  std::string category;
  std::string gt_file; ///< relative to the manifest root
  Difficulty difficulty = Difficulty::moderate;
  std::uint64_t seed = 0;
};

struct DatasetManifest
{
  static constexpr int kVersion = 1;

  int version = kVersion;
  std::filesystem::path root;
  double split_fraction = 0.8;
  std::uint64_t split_seed = 0;
  std::vector<ManifestEntry> samples;
  std::vector<std::string> train;
  std::vector<std::string> test;
};

/// Seeded shuffle, first round(fraction * n) ids go to train. Throws listing every missing file.
DatasetManifest build_manifest(
  std::filesystem::path const &root, std::vector<ManifestEntry> entries, double split_fraction, std::uint64_t seed);

nlohmann::json to_json(DatasetManifest const &m);
DatasetManifest manifest_from_json(nlohmann::json const &j, std::filesystem::path const &root);
void write_manifest(DatasetManifest const &m, std::filesystem::path const &path);
DatasetManifest read_manifest(std::filesystem::path const &path);

/// Loads ground truths of one split ("train" or "test") and derives their partial inputs.
std::vector<Sample> load_split(DatasetManifest const &m, std::string const &split, Index input_points);

/// In-memory samples straight from generate_synthetic, difficulties cycling S, M, H unless fixed.
std::vector<Sample> make_samples(
  std::vector<Shape> const &shapes, std::uint64_t seed, Index input_points, std::optional<Difficulty> fixed = std::nullopt);

} // namespace vdpcn::dataset
