#include "prbench/dataset.hpp"

#include <cmath>
#include <fstream>
#include <numbers>

#include "prbench/error.hpp"
#include "prbench/rng.hpp"

namespace prb {

Shape Dataset::input_shape() const {
  const Shape& s = inputs.shape();
  return Shape(s.begin() + 1, s.end());
}

Dataset Dataset::head(Index count) const {
  if (count < 0 || count > size()) throw ValueError(name + ": cannot take " + std::to_string(count) + " rows");
  Dataset out = *this;
  Shape shape = inputs.shape();
  const Index row = size() == 0 ? 0 : inputs.size() / size();
  shape[0] = count;
  out.inputs = Tensor(shape, inputs.values().head(count * row));
  out.labels.assign(labels.begin(), labels.begin() + count);
  return out;
}

Dataset Dataset::select(std::span<const Index> rows) const {
  Dataset out = *this;
  Shape shape = inputs.shape();
  const Index row = size() == 0 ? 0 : inputs.size() / size();
  shape[0] = static_cast<Index>(rows.size());
  Vector v(static_cast<Index>(rows.size()) * row);
  out.labels.clear();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const Index r = rows[i];
    if (r < 0 || r >= size()) throw ValueError(name + ": row " + std::to_string(r) + " out of range");
    v.segment(static_cast<Index>(i) * row, row) = inputs.values().segment(r * row, row);
    out.labels.push_back(labels[static_cast<std::size_t>(r)]);
  }
  out.inputs = Tensor(shape, std::move(v));
  return out;
}

Dataset Dataset::flattened() const {
  Dataset out = *this;
  const Index n = inputs.dim(0);
  out.inputs = inputs.reshaped({n, n == 0 ? 0 : inputs.size() / n});
  return out;
}

void Dataset::validate() const {
  if (inputs.rank() < 2 || inputs.dim(0) != size()) {
    throw ValueError(name + ": " + std::to_string(size()) + " labels for inputs " + shape_string(inputs.shape()));
  }
  for (int y : labels) {
    if (y < 0 || y >= classes) throw ValueError(name + ": label " + std::to_string(y) + " outside class range");
  }
  const Vector& v = inputs.values();
  if (v.size() > 0 && (v.minCoeff() < bounds.lo || v.maxCoeff() > bounds.hi)) {
    throw ValueError(name + ": inputs outside [" + std::to_string(bounds.lo) + ", " + std::to_string(bounds.hi) + "]");
  }
}

namespace {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError(DataError::Kind::missing_file, "cannot open " + path.string());
  return std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
}

std::uint32_t read_be32(const std::string& bytes, std::size_t pos) {
  std::uint32_t v = 0;
  for (std::size_t i = 0; i < 4; ++i) v = (v << 8) | static_cast<unsigned char>(bytes[pos + i]);
  return v;
}

// Validates magic and payload length; returns the dims after the magic.
std::vector<std::uint32_t> idx_header(const std::string& bytes, const std::filesystem::path& path,
                                      std::uint32_t magic, std::size_t ndims) {
  const std::size_t header = 4 * (1 + ndims);
  if (bytes.size() < 4) throw DataError(DataError::Kind::truncated, path.string() + ": file shorter than magic");
  const std::uint32_t got = read_be32(bytes, 0);
  if (got != magic) {
    char buf[64];
    std::snprintf(buf, sizeof buf, ": magic 0x%08x, expected 0x%08x", got, magic);
    throw DataError(DataError::Kind::bad_magic, path.string() + buf);
  }
  if (bytes.size() < header) throw DataError(DataError::Kind::truncated, path.string() + ": header truncated");
  std::vector<std::uint32_t> dims;
  std::uint64_t payload = 1;
  for (std::size_t i = 0; i < ndims; ++i) {
    dims.push_back(read_be32(bytes, 4 * (1 + i)));
    payload *= dims.back();
  }
  const std::uint64_t have = bytes.size() - header;
  if (have < payload) {
    throw DataError(DataError::Kind::truncated, path.string() + ": payload has " + std::to_string(have) +
                                                    " bytes, header declares " + std::to_string(payload));
  }
  if (have > payload) {
    throw DataError(DataError::Kind::dim_mismatch, path.string() + ": " + std::to_string(have - payload) +
                                                       " bytes beyond the declared dimensions");
  }
  return dims;
}

}  // namespace

Dataset load_mnist_idx(const std::filesystem::path& images, const std::filesystem::path& labels) {
  const std::string img = read_file(images);
  const std::string lab = read_file(labels);
  const auto idims = idx_header(img, images, 0x00000803, 3);
  const auto ldims = idx_header(lab, labels, 0x00000801, 1);
  if (idims[0] != ldims[0]) {
    throw DataError(DataError::Kind::dim_mismatch, images.string() + ": " + std::to_string(idims[0]) +
                                                       " images but " + std::to_string(ldims[0]) + " labels");
  }
  const Index n = idims[0], rows = idims[1], cols = idims[2];
  Vector pixels(n * rows * cols);
  for (Index i = 0; i < pixels.size(); ++i) {
    pixels[i] = static_cast<unsigned char>(img[16 + static_cast<std::size_t>(i)]) / 255.0;
  }
  Dataset d;
  d.name = images.filename().string();
  d.inputs = Tensor({n, 1, rows, cols}, std::move(pixels));
  d.labels.resize(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    const int y = static_cast<unsigned char>(lab[8 + static_cast<std::size_t>(i)]);
    if (y > 9) throw DataError(DataError::Kind::bad_format, labels.string() + ": label " + std::to_string(y));
    d.labels[static_cast<std::size_t>(i)] = y;
  }
  d.classes = 10;
  return d;
}

MnistSplit load_mnist_dir(const std::filesystem::path& dir) {
  auto pick = [&](const std::string& stem, const std::string& kind) {
    for (const auto& name : {stem + "-" + kind, stem + "." + kind}) {
      if (std::filesystem::exists(dir / name)) return dir / name;
    }
    throw DataError(DataError::Kind::missing_file, "no " + stem + "-" + kind + " in " + dir.string());
  };
  MnistSplit s;
  s.train = load_mnist_idx(pick("train-images", "idx3-ubyte"), pick("train-labels", "idx1-ubyte"));
  s.test = load_mnist_idx(pick("t10k-images", "idx3-ubyte"), pick("t10k-labels", "idx1-ubyte"));
  s.train.name = "mnist-train";
  s.test.name = "mnist-test";
  return s;
}

std::string_view to_string(SynthKind kind) {
  switch (kind) {
    case SynthKind::two_moons: return "two-moons";
    case SynthKind::gaussian_blobs: return "gaussian-blobs";
    case SynthKind::linear: return "linear";
  }
  return "two-moons";
}

SynthKind parse_synth_kind(std::string_view name) {
  if (name == "two-moons") return SynthKind::two_moons;
  if (name == "gaussian-blobs") return SynthKind::gaussian_blobs;
  if (name == "linear") return SynthKind::linear;
  throw ValueError("unknown synthetic dataset '" + std::string(name) + "'");
}

SyntheticSet synth_dataset(SynthKind kind, Index n, double noise, std::uint64_t seed) {
  if (n < 1) throw ValueError("synth_dataset: n must be >= 1");
  if (!(noise >= 0.0)) throw ValueError("synth_dataset: noise must be >= 0");
  RngStream rng(seed, "synth", static_cast<std::uint64_t>(kind));
  SyntheticSet out;
  Dataset& d = out.data;
  d.name = std::string(to_string(kind));
  d.classes = kind == SynthKind::gaussian_blobs ? 3 : 2;
  Vector v(2 * n);
  d.labels.resize(static_cast<std::size_t>(n));
  auto clip = [](double t) { return std::clamp(t, 0.0, 1.0); };

  if (kind == SynthKind::linear) {
    const double theta = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const std::array<double, 2> w{std::cos(theta), std::sin(theta)};
    const double cx = rng.uniform(0.4, 0.6), cy = rng.uniform(0.4, 0.6);
    const LinearSeparator sep{w, -(w[0] * cx + w[1] * cy)};
    out.separator = sep;
    for (Index i = 0; i < n; ++i) {
      const int y = static_cast<int>(i % 2);
      double px = 0.0, py = 0.0, s = 0.0;
      do {
        px = rng.uniform01();
        py = rng.uniform01();
        s = sep.w[0] * px + sep.w[1] * py + sep.b;
      } while (std::abs(s) < 0.05 || (s > 0.0) != (y == 1));
      v[2 * i] = px;
      v[2 * i + 1] = py;
      d.labels[static_cast<std::size_t>(i)] = y;
    }
  } else if (kind == SynthKind::two_moons) {
    for (Index i = 0; i < n; ++i) {
      const int y = static_cast<int>(i % 2);
      const double t = rng.uniform(0.0, std::numbers::pi);
      double px = y == 0 ? std::cos(t) : 1.0 - std::cos(t);
      double py = y == 0 ? std::sin(t) : 0.5 - std::sin(t);
      px += noise * rng.normal();
      py += noise * rng.normal();
      v[2 * i] = clip((px + 1.5) / 4.0);
      v[2 * i + 1] = clip((py + 1.0) / 2.5);
      d.labels[static_cast<std::size_t>(i)] = y;
    }
  } else {
    constexpr double centres[3][2] = {{0.25, 0.25}, {0.75, 0.3}, {0.5, 0.75}};
    for (Index i = 0; i < n; ++i) {
      const int y = static_cast<int>(i % 3);
      v[2 * i] = clip(centres[y][0] + noise * rng.normal());
      v[2 * i + 1] = clip(centres[y][1] + noise * rng.normal());
      d.labels[static_cast<std::size_t>(i)] = y;
    }
  }
  d.inputs = Tensor({n, 2}, std::move(v));
  return out;
}

}  // namespace prb
