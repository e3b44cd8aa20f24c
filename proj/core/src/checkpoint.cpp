#include "crowdlstm/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>

namespace crowdlstm {

namespace {

constexpr std::array<char, 8> kMagic = {'C', 'R', 'W', 'D', 'L', 'S', 'T', 'M'};

template <typename T>
void put_le(std::ostream& out, T v) {
  std::array<char, sizeof(T)> bytes;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    bytes[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  }
  out.write(bytes.data(), bytes.size());
}

template <typename T>
T get_le(std::istream& in, const char* what) {
  std::array<unsigned char, sizeof(T)> bytes;
  if (!in.read(reinterpret_cast<char*>(bytes.data()), bytes.size())) {
    throw Error(std::string("checkpoint truncated while reading ") + what);
  }
  T v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(bytes[i]) << (8 * i);
  return v;
}

std::string get_bytes(std::istream& in, std::uint64_t n, const char* what) {
  if (n > (std::uint64_t{1} << 32)) throw Error(std::string("checkpoint: implausible ") + what);
  std::string s(n, '\0');
  if (n && !in.read(s.data(), static_cast<std::streamsize>(n))) {
    throw Error(std::string("checkpoint truncated while reading ") + what);
  }
  return s;
}

}  // namespace

const std::string& Checkpoint::header_value(const std::string& key) const {
  for (const auto& [k, v] : header) {
    if (k == key) return v;
  }
  throw Error("checkpoint header has no '" + key + "'");
}

Checkpoint make_checkpoint(const ParamStore& store,
                           std::vector<std::pair<std::string, std::string>> header) {
  Checkpoint c;
  c.header = std::move(header);
  for (const auto& p : store) c.blocks.emplace_back(p.name, p.value);
  return c;
}

void write_checkpoint(std::ostream& out, const Checkpoint& ckpt) {
  out.write(kMagic.data(), kMagic.size());
  put_le<std::uint32_t>(out, kCheckpointVersion);
  std::string header;
  for (const auto& [k, v] : ckpt.header) header += k + "=" + v + "\n";
  put_le<std::uint64_t>(out, header.size());
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(ckpt.blocks.size()));
  for (const auto& [name, m] : ckpt.blocks) {
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    put_le<std::uint64_t>(out, m.rows());
    put_le<std::uint64_t>(out, m.cols());
    for (double v : m.values()) put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
  }
  if (!out) throw Error("checkpoint write failed");
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write checkpoint " + path);
  write_checkpoint(out, ckpt);
}

Checkpoint read_checkpoint(std::istream& in) {
  std::array<char, 8> magic{};
  if (!in.read(magic.data(), magic.size()) || magic != kMagic) {
    throw Error("not a crowdlstm checkpoint (bad magic)");
  }
  const auto ver = get_le<std::uint32_t>(in, "version");
  if (ver != kCheckpointVersion) {
    throw Error("unsupported checkpoint format version " + std::to_string(ver));
  }
  Checkpoint c;
  const std::string header = get_bytes(in, get_le<std::uint64_t>(in, "header size"), "header");
  std::size_t pos = 0;
  while (pos < header.size()) {
    const auto nl = header.find('\n', pos);
    const std::string line = header.substr(pos, nl == std::string::npos ? nl : nl - pos);
    pos = nl == std::string::npos ? header.size() : nl + 1;
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw Error("checkpoint header line without '='");
    c.header.emplace_back(line.substr(0, eq), line.substr(eq + 1));
  }
  const auto count = get_le<std::uint32_t>(in, "block count");
  for (std::uint32_t b = 0; b < count; ++b) {
    std::string name = get_bytes(in, get_le<std::uint32_t>(in, "name size"), "block name");
    const auto rows = get_le<std::uint64_t>(in, "rows");
    const auto cols = get_le<std::uint64_t>(in, "cols");
    if (rows != 0 && cols > (std::uint64_t{1} << 28) / rows) {
      throw Error("checkpoint block " + name + " has an implausible shape");
    }
    Vec values(rows * cols);
    for (double& v : values) v = std::bit_cast<double>(get_le<std::uint64_t>(in, "values"));
    c.blocks.emplace_back(std::move(name), Matrix(rows, cols, std::move(values)));
  }
  return c;
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open checkpoint " + path);
  return read_checkpoint(in);
}

void apply_checkpoint(const Checkpoint& ckpt, ParamStore& store) {
  std::set<std::string> seen;
  for (const auto& [name, m] : ckpt.blocks) {
    if (!store.contains(name)) throw Error("checkpoint has unknown parameter block " + name);
    auto& p = store.at(name);
    if (!p.value.same_shape(m)) {
      throw DimensionError("checkpoint block " + name + " is " + std::to_string(m.rows()) + "x" +
                           std::to_string(m.cols()) + ", model expects " +
                           std::to_string(p.value.rows()) + "x" + std::to_string(p.value.cols()));
    }
    seen.insert(name);
  }
  for (const auto& p : store) {
    if (!seen.count(p.name)) throw Error("checkpoint is missing parameter " + p.name);
  }
  for (const auto& [name, m] : ckpt.blocks) store.at(name).value = m;
  store.zero_grad();
  store.zero_moments();
}

}  // namespace crowdlstm
