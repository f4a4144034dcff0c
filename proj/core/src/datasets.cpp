// Copyright 2026 The tocomm Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "tocomm/datasets.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>

#include "tocomm/errors.hpp"

namespace tocomm::data {

namespace {

constexpr std::uint64_t kFnvOffset = 1469598103934665603ULL;
constexpr std::uint64_t kFnvPrime = 1099511628211ULL;

void fnv_mix(std::uint64_t& h, const void* data, std::size_t n) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= kFnvPrime;
  }
}

template <typename T>
void fnv_value(std::uint64_t& h, const T& v) {
  fnv_mix(h, &v, sizeof(T));
}

void fnv_example(std::uint64_t& h, const Example& e) {
  fnv_value(h, static_cast<std::int64_t>(e.y));
  fnv_value(h, static_cast<std::int64_t>(e.d));
  fnv_mix(h, e.x.data(), e.x.size() * sizeof(double));
}

// 5x7 bitmaps, row-major, top row first.
constexpr std::array<std::array<const char*, 7>, 10> kGlyphs = {{
    {"01110", "10001", "10011", "10101", "11001", "10001", "01110"},
    {"00100", "01100", "00100", "00100", "00100", "00100", "01110"},
    {"01110", "10001", "00001", "00010", "00100", "01000", "11111"},
    {"11111", "00010", "00100", "00010", "00001", "10001", "01110"},
    {"00010", "00110", "01010", "10010", "11111", "00010", "00010"},
    {"11111", "10000", "11110", "00001", "00001", "10001", "01110"},
    {"00110", "01000", "10000", "11110", "10001", "10001", "01110"},
    {"11111", "00001", "00010", "00100", "01000", "01000", "01000"},
    {"01110", "10001", "10001", "01110", "10001", "10001", "01110"},
    {"01110", "10001", "10001", "01111", "00001", "00010", "01100"},
}};

double glyph_at(int digit, int col, int row) {
  if (col < 0 || row < 0 || col >= 5 || row >= 7) return 0.0;
  return kGlyphs[static_cast<std::size_t>(digit)][static_cast<std::size_t>(row)]
                [static_cast<std::size_t>(col)] == '1'
             ? 1.0
             : 0.0;
}

double glyph_bilinear(int digit, double u, double v) {
  const double fu = std::floor(u);
  const double fv = std::floor(v);
  const int c0 = static_cast<int>(fu);
  const int r0 = static_cast<int>(fv);
  const double au = u - fu;
  const double av = v - fv;
  return (1 - au) * (1 - av) * glyph_at(digit, c0, r0) + au * (1 - av) * glyph_at(digit, c0 + 1, r0) +
         (1 - au) * av * glyph_at(digit, c0, r0 + 1) + au * av * glyph_at(digit, c0 + 1, r0 + 1);
}

std::uint32_t read_be32(std::istream& in, const std::string& what) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) throw FormatError("truncated IDX header in " + what);
  return (std::uint32_t{b[0]} << 24) | (std::uint32_t{b[1]} << 16) | (std::uint32_t{b[2]} << 8) |
         std::uint32_t{b[3]};
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) {
    if (!cell.empty() && cell.back() == '\r') cell.pop_back();
    out.push_back(cell);
  }
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_number(const std::string& cell, std::size_t line_no) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(cell, &pos);
    if (pos != cell.size()) throw std::invalid_argument(cell);
    return v;
  } catch (const std::exception&) {
    throw FormatError("CSV line " + std::to_string(line_no) + ": not a number: '" + cell + "'");
  }
}

}  // namespace

Dataset::Dataset(TensorShape shape, int class_count, int env_count, std::vector<Example> examples)
    : shape_(shape), class_count_(class_count), env_count_(env_count), examples_(std::move(examples)) {
  if (examples_.empty()) throw InvalidArgument("dataset must not be empty");
  if (class_count_ < 1) throw InvalidArgument("class_count must be >= 1");
  if (env_count_ < 1) throw InvalidArgument("env_count must be >= 1");
  const auto n = static_cast<std::size_t>(shape_.size());
  for (std::size_t i = 0; i < examples_.size(); ++i) {
    const Example& e = examples_[i];
    if (e.x.size() != n) throw ShapeError("example " + std::to_string(i) + " has wrong input size");
    if (e.y < 0 || e.y >= class_count_) throw InvalidArgument("example " + std::to_string(i) + " label out of range");
    if (e.d < 0 || e.d >= env_count_) throw InvalidArgument("example " + std::to_string(i) + " environment out of range");
    for (double v : e.x) {
      if (!std::isfinite(v)) throw InvalidArgument("example " + std::to_string(i) + " has non-finite input");
    }
  }
}

Matrix Dataset::inputs(std::span<const std::size_t> indices) const {
  Matrix m(static_cast<Eigen::Index>(indices.size()), shape_.size());
  for (std::size_t r = 0; r < indices.size(); ++r) {
    const auto& x = examples_.at(indices[r]).x;
    m.row(static_cast<Eigen::Index>(r)) = Eigen::Map<const RowVector>(x.data(), static_cast<Eigen::Index>(x.size()));
  }
  return m;
}

std::vector<int> Dataset::labels(std::span<const std::size_t> indices) const {
  std::vector<int> out;
  out.reserve(indices.size());
  for (std::size_t i : indices) out.push_back(examples_.at(i).y);
  return out;
}

Matrix Dataset::all_inputs() const {
  std::vector<std::size_t> idx(size());
  std::iota(idx.begin(), idx.end(), 0);
  return inputs(idx);
}

std::vector<int> Dataset::all_labels() const {
  std::vector<int> out;
  out.reserve(size());
  for (const Example& e : examples_) out.push_back(e.y);
  return out;
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
  std::vector<Example> ex;
  ex.reserve(indices.size());
  for (std::size_t i : indices) ex.push_back(examples_.at(i));
  return Dataset(shape_, class_count_, env_count_, std::move(ex));
}

Dataset Dataset::environment(int env) const {
  std::vector<Example> ex;
  for (const Example& e : examples_) {
    if (e.d == env) ex.push_back(e);
  }
  if (ex.empty()) throw InvalidArgument("environment " + std::to_string(env) + " has no examples");
  return Dataset(shape_, class_count_, env_count_, std::move(ex));
}

std::uint64_t Dataset::content_hash() const {
  std::uint64_t h = kFnvOffset;
  fnv_value(h, shape_.channels);
  fnv_value(h, shape_.height);
  fnv_value(h, shape_.width);
  fnv_value(h, class_count_);
  fnv_value(h, env_count_);
  for (const Example& e : examples_) fnv_example(h, e);
  return h;
}

Dataset make_synthetic_digits(std::size_t n, std::uint64_t seed, const DigitOptions& opts) {
  if (n == 0) throw InvalidArgument("make_synthetic_digits: n must be positive");
  if (opts.size < 8) throw InvalidArgument("make_synthetic_digits: size must be >= 8");
  std::vector<int> classes;
  for (int c = 0; c < 10; ++c) {
    if (std::find(opts.exclude_classes.begin(), opts.exclude_classes.end(), c) == opts.exclude_classes.end()) {
      classes.push_back(c);
    }
  }
  if (classes.empty()) throw InvalidArgument("make_synthetic_digits: every class excluded");

  Rng rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, 1.0);
  const int s = opts.size;
  const double canvas = static_cast<double>(s);
  std::vector<Example> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const int digit = classes[i % classes.size()];
    const double gh = canvas * (0.62 + 0.2 * unit(rng));
    const double gw = gh * (5.0 / 7.0) * (0.85 + 0.3 * unit(rng));
    const double ox = (canvas - gw) * unit(rng);
    const double oy = (canvas - gh) * unit(rng);
    const double shear = -0.25 + 0.5 * unit(rng);
    const double ink = 0.6 + 0.4 * unit(rng);
    Example e;
    e.y = digit;
    e.source_class = digit;
    e.x.resize(static_cast<std::size_t>(s * s));
    for (int py = 0; py < s; ++py) {
      for (int px = 0; px < s; ++px) {
        const double cy = py + 0.5 - oy;
        const double cx = px + 0.5 - ox - shear * (cy - gh / 2.0);
        const double u = cx / gw * 5.0 - 0.5;
        const double v = cy / gh * 7.0 - 0.5;
        double val = ink * glyph_bilinear(digit, u, v) + opts.pixel_noise * noise(rng);
        e.x[static_cast<std::size_t>(py * s + px)] = std::clamp(val, 0.0, 1.0);
      }
    }
    out.push_back(std::move(e));
  }
  return Dataset({1, s, s}, 10, 1, std::move(out));
}

Dataset make_colored_mnist(const Dataset& base_digits, std::span<const double> env_correlations,
                           double label_flip, std::uint64_t seed) {
  if (base_digits.empty()) throw InvalidArgument("make_colored_mnist: empty base dataset");
  if (base_digits.shape().channels != 1) throw ShapeError("make_colored_mnist: base must be single-channel");
  if (env_correlations.empty()) throw InvalidArgument("make_colored_mnist: no environments");
  for (double c : env_correlations) {
    if (!(c >= 0.0 && c <= 1.0)) throw InvalidArgument("make_colored_mnist: correlation outside [0,1]");
  }
  if (!(label_flip >= 0.0 && label_flip <= 0.5)) {
    throw InvalidArgument("make_colored_mnist: label_flip outside [0,0.5]");
  }
  Rng rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const std::size_t n = base_digits.size();
  const std::size_t envs = env_correlations.size();
  std::vector<std::size_t> order = shuffled_indices(n, rng);
  const TensorShape in_shape = base_digits.shape();
  const std::size_t plane = static_cast<std::size_t>(in_shape.height * in_shape.width);

  std::vector<Example> out;
  out.reserve(n);
  for (std::size_t pos = 0; pos < n; ++pos) {
    const Example& src = base_digits[order[pos]];
    const int env = static_cast<int>(pos * envs / n);
    const int digit = src.source_class >= 0 ? src.source_class : src.y;
    int y = digit < 5 ? 1 : 0;
    if (unit(rng) < label_flip) y = 1 - y;
    const int color = unit(rng) < env_correlations[static_cast<std::size_t>(env)] ? y : 1 - y;
    Example e;
    e.y = y;
    e.d = env;
    e.source_class = digit;
    e.x.assign(2 * plane, 0.0);
    std::copy(src.x.begin(), src.x.end(), e.x.begin() + static_cast<std::ptrdiff_t>(color * plane));
    out.push_back(std::move(e));
  }
  return Dataset({2, in_shape.height, in_shape.width}, 2, static_cast<int>(envs), std::move(out));
}

GaussianPairs make_synthetic_gaussian(int dim, double rho, std::size_t n, std::uint64_t seed) {
  if (!(std::abs(rho) < 1.0)) throw InvalidArgument("make_synthetic_gaussian: |rho| must be < 1");
  if (n < 2) throw InvalidArgument("make_synthetic_gaussian: n must be >= 2");
  if (dim < 1) throw InvalidArgument("make_synthetic_gaussian: dim must be >= 1");
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double resid = std::sqrt(1.0 - rho * rho);
  GaussianPairs p{Matrix(static_cast<Eigen::Index>(n), dim), Matrix(static_cast<Eigen::Index>(n), dim)};
  for (Eigen::Index i = 0; i < p.u.rows(); ++i) {
    for (int j = 0; j < dim; ++j) {
      const double a = normal(rng);
      const double b = normal(rng);
      p.u(i, j) = a;
      p.v(i, j) = rho * a + resid * b;
    }
  }
  return p;
}

Dataset make_gaussian_blobs(std::size_t n, int dim, int classes, double spread, std::uint64_t seed) {
  if (n == 0 || dim < 1 || classes < 2) throw InvalidArgument("make_gaussian_blobs: bad size arguments");
  if (!(spread > 0.0)) throw InvalidArgument("make_gaussian_blobs: spread must be positive");
  Rng rng(seed);
  std::uniform_real_distribution<double> center(0.2, 0.8);
  std::normal_distribution<double> normal(0.0, spread);
  std::vector<std::vector<double>> centers(static_cast<std::size_t>(classes));
  for (auto& c : centers) {
    c.resize(static_cast<std::size_t>(dim));
    for (double& v : c) v = center(rng);
  }
  std::vector<Example> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Example e;
    e.y = static_cast<int>(i % static_cast<std::size_t>(classes));
    e.source_class = e.y;
    e.x.resize(static_cast<std::size_t>(dim));
    for (int j = 0; j < dim; ++j) {
      e.x[static_cast<std::size_t>(j)] =
          std::clamp(centers[static_cast<std::size_t>(e.y)][static_cast<std::size_t>(j)] + normal(rng), 0.0, 1.0);
    }
    out.push_back(std::move(e));
  }
  return Dataset({1, 1, dim}, classes, 1, std::move(out));
}

Matrix AnchorSet::inputs() const {
  if (examples.empty()) return Matrix();
  Matrix m(static_cast<Eigen::Index>(examples.size()), static_cast<Eigen::Index>(examples.front().x.size()));
  for (std::size_t r = 0; r < examples.size(); ++r) {
    const auto& x = examples[r].x;
    m.row(static_cast<Eigen::Index>(r)) = Eigen::Map<const RowVector>(x.data(), static_cast<Eigen::Index>(x.size()));
  }
  return m;
}

AnchorStrategy parse_anchor_strategy(const std::string& name) {
  if (name == "uniform") return AnchorStrategy::kUniform;
  if (name == "per-class") return AnchorStrategy::kPerClass;
  throw InvalidArgument("unknown anchor strategy '" + name + "'");
}

AnchorSet select_anchors(const Dataset& dataset, std::size_t k, AnchorStrategy strategy, std::uint64_t seed) {
  if (k < 2) throw InvalidArgument("select_anchors: k must be >= 2");
  if (k > dataset.size()) throw InvalidArgument("select_anchors: k exceeds dataset size");
  Rng rng(seed);
  std::vector<std::size_t> chosen;
  if (strategy == AnchorStrategy::kUniform) {
    std::vector<std::size_t> perm = shuffled_indices(dataset.size(), rng);
    chosen.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(k));
  } else {
    const auto classes = static_cast<std::size_t>(dataset.class_count());
    if (k < classes) throw InvalidArgument("select_anchors: per-class needs k >= class_count");
    std::vector<std::vector<std::size_t>> by_class(classes);
    for (std::size_t i = 0; i < dataset.size(); ++i) by_class[static_cast<std::size_t>(dataset[i].y)].push_back(i);
    // Which classes receive the ceil(k/C) share is itself seeded.
    std::vector<std::size_t> class_order = shuffled_indices(classes, rng);
    std::vector<std::size_t> quota(classes, k / classes);
    for (std::size_t r = 0; r < k % classes; ++r) ++quota[class_order[r]];
    for (std::size_t c = 0; c < classes; ++c) {
      auto& pool = by_class[c];
      if (pool.size() < quota[c]) {
        throw InvalidArgument("select_anchors: class " + std::to_string(c) + " has too few examples");
      }
      std::shuffle(pool.begin(), pool.end(), rng);
      chosen.insert(chosen.end(), pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(quota[c]));
    }
  }
  std::sort(chosen.begin(), chosen.end());
  AnchorSet a;
  a.indices = std::move(chosen);
  std::uint64_t h = kFnvOffset;
  for (std::size_t i : a.indices) {
    fnv_value(h, static_cast<std::uint64_t>(i));
    a.examples.push_back(dataset[i]);
    fnv_example(h, dataset[i]);
  }
  a.hash = h;
  return a;
}

Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels) {
  std::ifstream img(images, std::ios::binary);
  if (!img) throw FormatError("cannot open " + images.string());
  std::ifstream lab(labels, std::ios::binary);
  if (!lab) throw FormatError("cannot open " + labels.string());

  if (read_be32(img, images.string()) != 0x00000803U) throw FormatError("bad IDX image magic in " + images.string());
  const std::uint32_t n = read_be32(img, images.string());
  const std::uint32_t rows = read_be32(img, images.string());
  const std::uint32_t cols = read_be32(img, images.string());
  if (read_be32(lab, labels.string()) != 0x00000801U) throw FormatError("bad IDX label magic in " + labels.string());
  const std::uint32_t nl = read_be32(lab, labels.string());
  if (n != nl) {
    throw ConsistencyError("IDX image count " + std::to_string(n) + " != label count " + std::to_string(nl));
  }
  if (n == 0 || rows == 0 || cols == 0) throw FormatError("IDX file declares an empty tensor");

  const std::size_t plane = std::size_t{rows} * cols;
  std::vector<unsigned char> pixels(plane * n);
  if (!img.read(reinterpret_cast<char*>(pixels.data()), static_cast<std::streamsize>(pixels.size()))) {
    throw FormatError("truncated IDX image payload in " + images.string());
  }
  std::vector<unsigned char> ys(n);
  if (!lab.read(reinterpret_cast<char*>(ys.data()), static_cast<std::streamsize>(ys.size()))) {
    throw FormatError("truncated IDX label payload in " + labels.string());
  }
  int classes = 1;
  std::vector<Example> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    out[i].y = ys[i];
    out[i].source_class = ys[i];
    classes = std::max(classes, int{ys[i]} + 1);
    out[i].x.resize(plane);
    for (std::size_t p = 0; p < plane; ++p) out[i].x[p] = pixels[i * plane + p] / 255.0;
  }
  return Dataset({1, static_cast<int>(rows), static_cast<int>(cols)}, classes, 1, std::move(out));
}

Dataset load_csv(const std::filesystem::path& path, const std::string& label_column) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw FormatError("CSV has no header: " + path.string());
  const std::vector<std::string> header = split_csv_line(line);
  int label_idx = -1;
  int env_idx = -1;
  std::vector<int> feature_idx;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (header[c] == label_column) {
      label_idx = static_cast<int>(c);
    } else if (header[c] == "env") {
      env_idx = static_cast<int>(c);
    } else {
      feature_idx.push_back(static_cast<int>(c));
    }
  }
  if (label_idx < 0) throw FormatError("CSV has no label column '" + label_column + "'");
  if (feature_idx.empty()) throw FormatError("CSV has no feature columns");

  std::vector<Example> out;
  double max_value = 0.0;
  int classes = 1;
  int envs = 1;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const std::vector<std::string> cells = split_csv_line(line);
    if (cells.size() != header.size()) {
      throw FormatError("CSV line " + std::to_string(line_no) + " has " + std::to_string(cells.size()) +
                        " cells, header has " + std::to_string(header.size()));
    }
    Example e;
    const double yv = parse_number(cells[static_cast<std::size_t>(label_idx)], line_no);
    if (yv < 0 || yv != std::floor(yv)) throw FormatError("CSV line " + std::to_string(line_no) + ": bad label");
    e.y = static_cast<int>(yv);
    e.source_class = e.y;
    if (env_idx >= 0) {
      const double dv = parse_number(cells[static_cast<std::size_t>(env_idx)], line_no);
      if (dv < 0 || dv != std::floor(dv)) throw FormatError("CSV line " + std::to_string(line_no) + ": bad env");
      e.d = static_cast<int>(dv);
    }
    for (int c : feature_idx) {
      const double v = parse_number(cells[static_cast<std::size_t>(c)], line_no);
      max_value = std::max(max_value, v);
      e.x.push_back(v);
    }
    classes = std::max(classes, e.y + 1);
    envs = std::max(envs, e.d + 1);
    out.push_back(std::move(e));
  }
  if (out.empty()) throw FormatError("CSV has no data rows: " + path.string());
  // 8-bit pixel exports are rescaled; data already in [0,1] is kept as is.
  if (max_value > 1.0) {
    for (Example& e : out) {
      for (double& v : e.x) v /= 255.0;
    }
  }
  const int width = static_cast<int>(feature_idx.size());
  return Dataset({1, 1, width}, classes, envs, std::move(out));
}

void save_csv(const Dataset& dataset, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path.string());
  out << "y,env";
  for (int j = 0; j < dataset.shape().size(); ++j) out << ",x" << j;
  out << '\n' << std::setprecision(17);
  for (const Example& e : dataset.examples()) {
    out << e.y << ',' << e.d;
    for (double v : e.x) out << ',' << v;
    out << '\n';
  }
}

std::vector<std::size_t> shuffled_indices(std::size_t n, Rng& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::shuffle(idx.begin(), idx.end(), rng);
  return idx;
}

}  // namespace tocomm::data
