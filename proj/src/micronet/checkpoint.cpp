#include "anchorvote/micronet/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstring>

#include "anchorvote/cloudio.hpp"
#include "anchorvote/error.hpp"

namespace anchorvote::micronet {

namespace {

template <typename T>
void put(std::string& out, T value) {
  static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");
  char buf[sizeof(T)];
  std::memcpy(buf, &value, sizeof(T));
  out.append(buf, sizeof(T));
}

class Reader {
 public:
  explicit Reader(std::string bytes) : bytes_(std::move(bytes)) {}

  template <typename T>
  T get() {
    if (pos_ + sizeof(T) > bytes_.size()) throw MalformedFileError("checkpoint truncated");
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::string get_string(std::size_t n) {
    if (pos_ + n > bytes_.size()) throw MalformedFileError("checkpoint truncated");
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  std::string bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

void save_checkpoint(const ParameterSet& params, const std::filesystem::path& path) {
  std::string out(kCheckpointMagic, 4);
  put<std::uint32_t>(out, kCheckpointVersion);
  put<std::uint64_t>(out, params.size());
  for (const auto& [name, t] : params) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out += name;
    put<std::uint32_t>(out, static_cast<std::uint32_t>(t.rank()));
    for (std::size_t d : t.shape()) put<std::uint64_t>(out, d);
  }
  for (const auto& e : params) {
    for (double v : e.second.data()) put<double>(out, v);
  }
  cloudio::atomic_write(path, out);
}

std::vector<NamedArray> read_checkpoint(const std::filesystem::path& path) {
  Reader r(cloudio::read_text(path));
  if (r.get_string(4) != std::string(kCheckpointMagic, 4)) throw MalformedFileError("not a weight checkpoint");
  const auto version = r.get<std::uint32_t>();
  if (version != kCheckpointVersion) {
    throw SchemaMismatchError("checkpoint version " + std::to_string(version) + " is not supported");
  }
  const auto count = r.get<std::uint64_t>();
  std::vector<NamedArray> arrays;
  for (std::uint64_t i = 0; i < count; ++i) {
    NamedArray a;
    a.name = r.get_string(r.get<std::uint32_t>());
    const auto rank = r.get<std::uint32_t>();
    for (std::uint32_t d = 0; d < rank; ++d) a.shape.push_back(r.get<std::uint64_t>());
    arrays.push_back(std::move(a));
  }
  for (auto& a : arrays) {
    a.data.resize(numel(a.shape));
    for (double& v : a.data) v = r.get<double>();
  }
  if (!r.done()) throw MalformedFileError("trailing bytes after checkpoint payload");
  return arrays;
}

void load_checkpoint(ParameterSet& params, const std::filesystem::path& path) {
  const auto arrays = read_checkpoint(path);
  if (arrays.size() != params.size()) throw SchemaMismatchError("checkpoint parameter count differs");
  std::size_t k = 0;
  for (const auto& [name, t] : params) {
    if (arrays[k].name != name || arrays[k].shape != t.shape()) {
      throw SchemaMismatchError("checkpoint entry " + arrays[k].name + " does not match parameter " + name);
    }
    ++k;
  }
  k = 0;
  for (auto& e : params) {
    auto d = e.second.mutable_data();
    std::copy(arrays[k].data.begin(), arrays[k].data.end(), d.begin());
    ++k;
  }
}

}  // namespace anchorvote::micronet
