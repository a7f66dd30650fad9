#include "vdpcn/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>
#include <stdexcept>

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace vdpcn::checkpoint {

namespace {
constexpr char kMagic[8] = {'V', 'D', 'P', 'C', 'N', 'C', 'K', 'P'};

template <typename T> void put(std::vector<std::uint8_t> &out, T value)
{
  auto const *p = reinterpret_cast<std::uint8_t const *>(&value);
  out.insert(out.end(), p, p + sizeof(T));
}

template <typename T> T take(std::vector<std::uint8_t> const &in, size_t &pos)
{
  if (pos + sizeof(T) > in.size()) { throw std::runtime_error("checkpoint truncated"); }
  T value;
  std::memcpy(&value, in.data() + pos, sizeof(T));
  pos += sizeof(T);
  return value;
}
} // namespace

std::vector<std::uint8_t> serialize(Checkpoint const &ckpt)
{
  nlohmann::json params = nlohmann::json::array();
  std::uint64_t offset = 0;
  for (auto const &[name, m] : ckpt.weights.params) {
    params.push_back({{"name", name}, {"rows", m.rows()}, {"cols", m.cols()}, {"offset", offset}});
    offset += static_cast<std::uint64_t>(m.size()) * sizeof(double);
  }
  nlohmann::json header = {
    {"format_version", kFormatVersion},
    {"kind", ckpt.kind},
    {"config", network::to_json(ckpt.weights.config)},
    {"parameters", params}};
  std::string const text = header.dump();

  std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
  put<std::uint32_t>(out, kFormatVersion);
  put<std::uint64_t>(out, text.size());
  out.insert(out.end(), text.begin(), text.end());
  out.reserve(out.size() + offset);
  for (auto const &[name, m] : ckpt.weights.params) {
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> const rm = m;
    auto const *p = reinterpret_cast<std::uint8_t const *>(rm.data());
    out.insert(out.end(), p, p + rm.size() * sizeof(double));
  }
  return out;
}

Checkpoint deserialize(std::vector<std::uint8_t> const &bytes)
{
  if (bytes.size() < sizeof(kMagic) || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
    throw std::runtime_error("not a checkpoint (bad magic)");
  }
  size_t pos = sizeof(kMagic);
  auto const version = take<std::uint32_t>(bytes, pos);
  if (version != kFormatVersion) { throw std::runtime_error("unsupported checkpoint format version " + std::to_string(version)); }
  auto const header_len = take<std::uint64_t>(bytes, pos);
  if (pos + header_len > bytes.size()) { throw std::runtime_error("checkpoint truncated in header"); }
  nlohmann::json const header = nlohmann::json::parse(bytes.begin() + static_cast<std::ptrdiff_t>(pos),
                                                      bytes.begin() + static_cast<std::ptrdiff_t>(pos + header_len));
  pos += header_len;
  if (header.at("format_version").get<std::uint32_t>() != kFormatVersion) { throw std::runtime_error("header format version mismatch"); }

  Checkpoint ckpt;
  ckpt.kind = header.at("kind").get<std::string>();
  if (ckpt.kind != "network" && ckpt.kind != "oracle") { throw std::runtime_error("unknown checkpoint kind '" + ckpt.kind + "'"); }
  ckpt.weights.config = network::network_config_from_json(header.at("config"));
  size_t const data_start = pos;
  for (auto const &p : header.at("parameters")) {
    auto const name = p.at("name").get<std::string>();
    auto const rows = p.at("rows").get<Index>(), cols = p.at("cols").get<Index>();
    auto const off = p.at("offset").get<std::uint64_t>();
    size_t const nbytes = static_cast<size_t>(rows * cols) * sizeof(double);
    if (data_start + off + nbytes > bytes.size()) { throw std::runtime_error("checkpoint truncated in parameter '" + name + "'"); }
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm(rows, cols);
    std::memcpy(rm.data(), bytes.data() + data_start + off, nbytes);
    ckpt.weights.params.emplace(name, rm);
  }
  if (ckpt.kind == "network") { ckpt.weights.validate(); }
  return ckpt;
}

std::vector<std::uint8_t> read_file(std::filesystem::path const &path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in) { throw std::runtime_error("cannot open " + path.string()); }
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(std::filesystem::path const &path, std::vector<std::uint8_t> const &bytes)
{
  if (path.has_parent_path()) { std::filesystem::create_directories(path.parent_path()); }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) { throw std::runtime_error("cannot open " + path.string() + " for writing"); }
  out.write(reinterpret_cast<char const *>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) { throw std::runtime_error("failed writing " + path.string()); }
}

void save(Checkpoint const &ckpt, std::filesystem::path const &path) { write_file(path, serialize(ckpt)); }

Checkpoint load(std::filesystem::path const &path)
{
  if (!std::filesystem::exists(path)) { throw std::runtime_error("checkpoint not found: " + path.string()); }
  try {
    return deserialize(read_file(path));
  } catch (std::exception const &e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
}

std::uint64_t fnv1a(std::vector<std::uint8_t> const &bytes)
{
  std::uint64_t h = 14695981039346656037ull;
  for (auto b : bytes) {
    h ^= b;
    h *= 1099511628211ull;
  }
  return h;
}

std::string hex(std::uint64_t value)
{
  std::ostringstream os;
  os << std::hex;
  os.width(16);
  os.fill('0');
  os << value;
  return os.str();
}

} // namespace vdpcn::checkpoint
