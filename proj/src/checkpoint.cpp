#include "prbench/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "prbench/error.hpp"

namespace prb {

namespace {

constexpr char kMagic[8] = {'P', 'R', 'B', 'C', 'K', 'P', 'T', '1'};

template <typename T>
void put_le(std::string& out, T value) {
  static_assert(std::is_integral_v<T>);
  for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<char>((value >> (8 * i)) & 0xff));
}

class Reader {
 public:
  Reader(const std::string& bytes, std::string source) : bytes_(bytes), source_(std::move(source)) {}

  template <typename T>
  T get() {
    need(sizeof(T));
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      v |= static_cast<T>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    }
    pos_ += sizeof(T);
    return v;
  }

  std::string get_string(std::size_t n) {
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  double get_double() { return std::bit_cast<double>(get<std::uint64_t>()); }

  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) throw DataError(DataError::Kind::truncated, source_ + ": checkpoint truncated");
  }

  const std::string& bytes_;
  std::string source_;
  std::size_t pos_ = 0;
};

std::string join_dims(const std::vector<Index>& dims, char sep) {
  std::string s;
  for (std::size_t i = 0; i < dims.size(); ++i) {
    if (i) s.push_back(sep);
    s += std::to_string(dims[i]);
  }
  return s;
}

std::vector<Index> split_dims(const std::string& text, char sep) {
  std::vector<Index> out;
  if (text.empty()) return out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, sep)) out.push_back(std::stoll(item));
  return out;
}

}  // namespace

std::string spec_tag(const ModelSpec& spec) {
  std::string tag = "arch=" + std::string(to_string(spec.arch));
  tag += ";input=" + join_dims(spec.input_shape, 'x');
  tag += ";classes=" + std::to_string(spec.classes);
  tag += ";hidden=" + join_dims(spec.hidden, ',');
  tag += ";conv=" + std::to_string(spec.conv1_channels) + "," + std::to_string(spec.conv2_channels);
  tag += ";fc=" + std::to_string(spec.fc_width);
  return tag;
}

ModelSpec parse_spec_tag(const std::string& tag) {
  ModelSpec spec;
  std::stringstream ss(tag);
  std::string field;
  try {
    while (std::getline(ss, field, ';')) {
      const auto eq = field.find('=');
      if (eq == std::string::npos) throw DataError(DataError::Kind::bad_format, "spec tag field without '='");
      const std::string key = field.substr(0, eq);
      const std::string value = field.substr(eq + 1);
      if (key == "arch") {
        spec.arch = parse_architecture(value);
      } else if (key == "input") {
        spec.input_shape = split_dims(value, 'x');
      } else if (key == "classes") {
        spec.classes = std::stoll(value);
      } else if (key == "hidden") {
        spec.hidden = split_dims(value, ',');
      } else if (key == "conv") {
        const auto c = split_dims(value, ',');
        if (c.size() != 2) throw DataError(DataError::Kind::bad_format, "spec tag conv needs two widths");
        spec.conv1_channels = c[0];
        spec.conv2_channels = c[1];
      } else if (key == "fc") {
        spec.fc_width = std::stoll(value);
      } else {
        throw DataError(DataError::Kind::bad_format, "unknown spec tag field '" + key + "'");
      }
    }
    spec.validate();
  } catch (const std::invalid_argument&) {
    throw DataError(DataError::Kind::bad_format, "malformed spec tag '" + tag + "'");
  } catch (const ValueError& e) {
    throw DataError(DataError::Kind::bad_format, std::string("invalid spec tag: ") + e.what());
  }
  return spec;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::string out(kMagic, sizeof(kMagic));
  const std::string tag = spec_tag(ckpt.spec);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(tag.size()));
  out += tag;
  put_le<std::uint64_t>(out, ckpt.seed);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(ckpt.params.size()));
  for (const auto& t : ckpt.params.tensors) {
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(t.name.size()));
    out += t.name;
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(t.value.rank()));
    for (Index d : t.value.shape()) put_le<std::uint64_t>(out, static_cast<std::uint64_t>(d));
  }
  for (const auto& t : ckpt.params.tensors) {
    for (Index i = 0; i < t.value.size(); ++i) put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(t.value[i]));
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw DataError(DataError::Kind::missing_file, "cannot write checkpoint " + path.string());
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw DataError(DataError::Kind::bad_format, "failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError(DataError::Kind::missing_file, "cannot open checkpoint " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  Reader r(bytes, path.string());
  if (r.get_string(sizeof(kMagic)) != std::string(kMagic, sizeof(kMagic))) {
    throw DataError(DataError::Kind::bad_magic, path.string() + ": not a prbench checkpoint");
  }
  Checkpoint ckpt;
  ckpt.spec = parse_spec_tag(r.get_string(r.get<std::uint32_t>()));
  ckpt.seed = r.get<std::uint64_t>();
  const auto count = r.get<std::uint32_t>();
  const auto layout = parameter_layout(ckpt.spec);
  if (count != layout.size()) {
    throw DataError(DataError::Kind::dim_mismatch, path.string() + ": tensor count does not match the spec");
  }
  std::vector<std::pair<std::string, Shape>> headers;
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name = r.get_string(r.get<std::uint32_t>());
    const auto rank = r.get<std::uint32_t>();
    if (rank > 4) throw DataError(DataError::Kind::bad_format, path.string() + ": tensor " + name + " has rank > 4");
    Shape shape(rank);
    for (auto& d : shape) d = static_cast<Index>(r.get<std::uint64_t>());
    if (name != layout[i].first || shape != layout[i].second) {
      throw DataError(DataError::Kind::dim_mismatch,
                      path.string() + ": tensor " + name + " " + shape_string(shape) + " does not match the spec");
    }
    headers.emplace_back(std::move(name), std::move(shape));
  }
  for (auto& [name, shape] : headers) {
    Vector v(shape_size(shape));
    for (Index i = 0; i < v.size(); ++i) v[i] = r.get_double();
    ckpt.params.tensors.push_back({name, Tensor(shape, std::move(v))});
  }
  if (r.remaining() != 0) throw DataError(DataError::Kind::dim_mismatch, path.string() + ": trailing bytes");
  return ckpt;
}

}  // namespace prb
