#include "forgetbench/param_io.hpp"

#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>

#include "forgetbench/error.hpp"

namespace forgetbench {

namespace {

constexpr char kMagic[4] = {'F', 'B', 'P', 'V'};

template <typename T>
T to_little(T v) {
  if constexpr (std::endian::native == std::endian::big) {
    unsigned char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(b[i], b[sizeof(T) - 1 - i]);
    std::memcpy(&v, b, sizeof(T));
  }
  return v;
}

class Writer {
 public:
  explicit Writer(std::ofstream& out) : out_(out) {}
  template <typename T>
  void put(T v) {
    v = to_little(v);
    out_.write(reinterpret_cast<const char*>(&v), sizeof(T));
  }
  void str(const std::string& s) {
    put<std::uint32_t>(static_cast<std::uint32_t>(s.size()));
    out_.write(s.data(), static_cast<std::streamsize>(s.size()));
  }

 private:
  std::ofstream& out_;
};

class Reader {
 public:
  Reader(std::ifstream& in, std::string path) : in_(in), path_(std::move(path)) {}
  template <typename T>
  T get() {
    T v{};
    in_.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in_) throw IoError(path_ + ": truncated parameter file");
    return to_little(v);
  }
  std::string str() {
    const auto n = get<std::uint32_t>();
    std::string s(n, '\0');
    in_.read(s.data(), n);
    if (!in_) throw IoError(path_ + ": truncated parameter file");
    return s;
  }

 private:
  std::ifstream& in_;
  std::string path_;
};

}  // namespace

std::string format_exact(double value) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

void write_param_file(const std::filesystem::path& path, const ParamFile& file) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    Writer w(out);
    out.write(kMagic, 4);
    w.put<std::uint32_t>(kParamFormatVersion);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(file.metadata.size()));
    for (const auto& [k, v] : file.metadata) {
      w.str(k);
      w.str(v);
    }
    const auto& p = file.params;
    w.put<std::uint32_t>(static_cast<std::uint32_t>(p.slots().size()));
    for (const auto& s : p.slots()) {
      w.str(s.name);
      w.put<std::uint64_t>(s.rows);
      w.put<std::uint64_t>(s.cols);
      for (double v : p.array(s.name)) w.put<double>(v);
    }
    if (!out) throw IoError("failed writing " + path.string());
  }
  std::ofstream manifest(path.string() + ".manifest");
  if (!manifest) throw IoError("cannot write " + path.string() + ".manifest");
  manifest << "forgetbench-params " << kParamFormatVersion << '\n';
  manifest << "encoding f64-le row-major\n";
  for (const auto& [k, v] : file.metadata) manifest << "meta " << k << ' ' << v << '\n';
  manifest << "total_dim " << file.params.total_dim() << '\n';
  for (const auto& s : file.params.slots()) {
    manifest << "array " << s.name << ' ' << s.rows << ' ' << s.cols << " offset " << s.offset << '\n';
  }
}

ParamFile read_param_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0) throw IoError(path.string() + ": not a parameter file");
  Reader r(in, path.string());
  const auto version = r.get<std::uint32_t>();
  if (version != kParamFormatVersion) {
    throw IoError(path.string() + ": unsupported format version " + std::to_string(version));
  }
  ParamFile file;
  const auto n_meta = r.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < n_meta; ++i) {
    auto k = r.str();
    file.metadata[k] = r.str();
  }
  const auto n_arrays = r.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < n_arrays; ++i) {
    auto name = r.str();
    const auto rows = r.get<std::uint64_t>();
    const auto cols = r.get<std::uint64_t>();
    std::vector<double> values(rows * cols);
    for (double& v : values) v = r.get<double>();
    file.params.add(std::move(name), rows, cols, std::move(values));
  }
  return file;
}

}  // namespace forgetbench
