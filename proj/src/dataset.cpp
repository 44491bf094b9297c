#include "cstg/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "cstg/rng.hpp"

namespace cstg::data {

Dataset Dataset::take_rows(const std::vector<int>& idx) const {
  Dataset out;
  out.x = x.take_rows(idx);
  out.z = z.take_rows(idx);
  out.y.reserve(idx.size());
  for (int i : idx) out.y.push_back(y[i]);
  out.task = task;
  out.feature_names = feature_names;
  out.context_names = context_names;
  if (!context_id.empty()) {
    for (int i : idx) out.context_id.push_back(context_id[i]);
  }
  if (!eta.empty()) {
    for (int i : idx) out.eta.push_back(eta[i]);
  }
  if (!group.empty()) {
    for (int i : idx) out.group.push_back(group[i]);
  }
  return out;
}

void Dataset::validate() const {
  if (x.rows != z.rows || static_cast<std::size_t>(x.rows) != y.size()) {
    throw DataError("dataset rows misaligned across x, z, y");
  }
  for (double v : x.data) {
    if (!std::isfinite(v)) throw DataError("dataset: non-finite feature value");
  }
  for (double v : z.data) {
    if (!std::isfinite(v)) throw DataError("dataset: non-finite context value");
  }
  for (double v : y) {
    if (!std::isfinite(v)) throw DataError("dataset: non-finite target value");
    if (task == obj::LossKind::bce && v != 0.0 && v != 1.0) {
      throw DataError("dataset: bce target outside {0,1}");
    }
  }
}

namespace {

void one_hot_context(Dataset& ds, int levels, const std::string& prefix) {
  const int n = static_cast<int>(ds.context_id.size());
  ds.z = Matrix(n, levels);
  for (int i = 0; i < n; ++i) ds.z.at(i, ds.context_id[i]) = 1.0;
  ds.context_names.clear();
  for (int l = 0; l < levels; ++l) ds.context_names.push_back(prefix + std::to_string(l));
}

void default_feature_names(Dataset& ds) {
  ds.feature_names.clear();
  for (int j = 0; j < ds.x.cols; ++j) ds.feature_names.push_back("x_" + std::to_string(j));
}

}  // namespace

Dataset gen_xor1(int n, std::uint64_t seed) {
  if (n < 1) throw ConfigError("gen_xor1: n must be >= 1");
  Rng rng(seed);
  const int d = 20, levels = 3;
  Dataset ds;
  ds.task = obj::LossKind::bce;
  ds.x = Matrix(n, d);
  ds.context_id.resize(n);
  ds.y.resize(n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < d; ++j) ds.x.at(i, j) = rng.uniform() < 0.5 ? -1.0 : 1.0;
    const int z = static_cast<int>(rng.below(levels));
    ds.context_id[i] = z;
    // informative pair: (x1,x2) for z=0, (x2,x3) for z=1, (x3,x4) for z=2
    const double prod = ds.x.at(i, z) * ds.x.at(i, z + 1);
    ds.y[i] = prod > 0.0 ? 1.0 : 0.0;
  }
  one_hot_context(ds, levels, "z_");
  default_feature_names(ds);
  return ds;
}

Dataset gen_xor2(int n, std::uint64_t seed) {
  if (n < 1) throw ConfigError("gen_xor2: n must be >= 1");
  Rng rng(seed);
  const int d = 25, levels = 4;
  Dataset ds;
  ds.task = obj::LossKind::mse;
  ds.x = Matrix(n, d);
  ds.context_id.resize(n);
  ds.y.resize(n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < d; ++j) ds.x.at(i, j) = rng.normal();
    const int z = static_cast<int>(rng.below(levels));
    ds.context_id[i] = z;
    double lin = 0.0;
    switch (z) {
      case 0: lin = 0.5 * ds.x.at(i, 0) + ds.x.at(i, 1); break;
      case 1: lin = ds.x.at(i, 0) + 0.5 * ds.x.at(i, 1); break;
      case 2: lin = 0.5 * ds.x.at(i, 2) + ds.x.at(i, 3); break;
      case 3: lin = ds.x.at(i, 2) + 0.5 * ds.x.at(i, 3); break;
    }
    ds.y[i] = lin > 0.0 ? lin : 0.0;
  }
  one_hot_context(ds, levels, "z_");
  default_feature_names(ds);
  return ds;
}

namespace {

Dataset gen_linear_xor(int n, std::uint64_t seed, bool four_features_at_z1) {
  if (n < 1) throw ConfigError("gen_xor3/4: n must be >= 1");
  Rng rng(seed);
  const int d = 25, levels = 2;
  const double noise_sd = 0.5;  // eta ~ N(0, 0.25)
  Dataset ds;
  ds.task = obj::LossKind::mse;
  ds.x = Matrix(n, d);
  ds.context_id.resize(n);
  ds.y.resize(n);
  ds.eta.resize(n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < d; ++j) ds.x.at(i, j) = rng.normal();
    const int z = static_cast<int>(rng.below(levels));
    ds.context_id[i] = z;
    const double eta = noise_sd * rng.normal();
    ds.eta[i] = eta;
    double lin;
    if (z == 0) {
      lin = ds.x.at(i, 0) + ds.x.at(i, 1);
    } else if (four_features_at_z1) {
      lin = ds.x.at(i, 2) + ds.x.at(i, 3) + ds.x.at(i, 4) + ds.x.at(i, 5);
    } else {
      lin = ds.x.at(i, 2) + ds.x.at(i, 3);
    }
    ds.y[i] = lin + eta;
  }
  one_hot_context(ds, levels, "z_");
  default_feature_names(ds);
  return ds;
}

}  // namespace

Dataset gen_xor3(int n, std::uint64_t seed) { return gen_linear_xor(n, seed, false); }
Dataset gen_xor4(int n, std::uint64_t seed) { return gen_linear_xor(n, seed, true); }

// ---- IDX ------------------------------------------------------------------

namespace {

std::uint32_t read_be32(std::ifstream& in, const std::string& path, std::size_t offset) {
  unsigned char buf[4];
  in.read(reinterpret_cast<char*>(buf), 4);
  if (!in) {
    throw FormatError(path + ": truncated at byte " + std::to_string(offset));
  }
  return (std::uint32_t(buf[0]) << 24) | (std::uint32_t(buf[1]) << 16) |
         (std::uint32_t(buf[2]) << 8) | std::uint32_t(buf[3]);
}

std::ifstream open_binary(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  return in;
}

}  // namespace

IdxImages load_idx_images(const std::string& path) {
  std::ifstream in = open_binary(path);
  const std::uint32_t magic = read_be32(in, path, 0);
  if (magic != 0x00000803u) {
    std::ostringstream os;
    os << path << ": bad image magic 0x" << std::hex << magic << " at byte 0";
    throw FormatError(os.str());
  }
  IdxImages img;
  img.count = static_cast<int>(read_be32(in, path, 4));
  img.rows = static_cast<int>(read_be32(in, path, 8));
  img.cols = static_cast<int>(read_be32(in, path, 12));
  const std::size_t total = static_cast<std::size_t>(img.count) * img.rows * img.cols;
  std::vector<unsigned char> raw(total);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(total));
  if (static_cast<std::size_t>(in.gcount()) != total) {
    throw FormatError(path + ": truncated at byte " +
                      std::to_string(16 + static_cast<std::size_t>(in.gcount())));
  }
  img.pixels.resize(total);
  for (std::size_t i = 0; i < total; ++i) img.pixels[i] = raw[i] / 255.0;
  return img;
}

std::vector<int> load_idx_labels(const std::string& path) {
  std::ifstream in = open_binary(path);
  const std::uint32_t magic = read_be32(in, path, 0);
  if (magic != 0x00000801u) {
    std::ostringstream os;
    os << path << ": bad label magic 0x" << std::hex << magic << " at byte 0";
    throw FormatError(os.str());
  }
  const std::uint32_t count = read_be32(in, path, 4);
  std::vector<unsigned char> raw(count);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(count));
  if (static_cast<std::size_t>(in.gcount()) != count) {
    throw FormatError(path + ": truncated at byte " +
                      std::to_string(8 + static_cast<std::size_t>(in.gcount())));
  }
  std::vector<int> labels(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    if (raw[i] > 9) {
      throw FormatError(path + ": label " + std::to_string(int(raw[i])) + " outside 0-9 at byte " +
                        std::to_string(8 + i));
    }
    labels[i] = raw[i];
  }
  return labels;
}

std::pair<IdxImages, std::vector<int>> load_idx(const std::string& images_path,
                                                const std::string& labels_path) {
  IdxImages img = load_idx_images(images_path);
  std::vector<int> labels = load_idx_labels(labels_path);
  if (static_cast<std::size_t>(img.count) != labels.size()) {
    throw FormatError("image count " + std::to_string(img.count) + " != label count " +
                      std::to_string(labels.size()));
  }
  return {std::move(img), std::move(labels)};
}

// ---- Rotating MNIST ---------------------------------------------------------

namespace {

// cos/sin for k*45 degrees with exact values at the axis-aligned angles, so
// 0- and 180-degree rotations are bit-exact.
void rotation_components(int k, double* c, double* s) {
  static const double r = std::sqrt(0.5);
  static const double cos_table[8] = {1.0, r, 0.0, -r, -1.0, -r, 0.0, r};
  static const double sin_table[8] = {0.0, r, 1.0, r, 0.0, -r, -1.0, -r};
  *c = cos_table[k & 7];
  *s = sin_table[k & 7];
}

// Bilinear sample with zero padding outside the frame.
double sample_bilinear(const double* img, int rows, int cols, double r, double c) {
  const int r0 = static_cast<int>(std::floor(r));
  const int c0 = static_cast<int>(std::floor(c));
  const double fr = r - r0;
  const double fc = c - c0;
  double acc = 0.0;
  for (int dr = 0; dr <= 1; ++dr) {
    for (int dc = 0; dc <= 1; ++dc) {
      const int rr = r0 + dr, cc = c0 + dc;
      if (rr < 0 || rr >= rows || cc < 0 || cc >= cols) continue;
      const double w = (dr ? fr : 1.0 - fr) * (dc ? fc : 1.0 - fc);
      acc += w * img[rr * cols + cc];
    }
  }
  return acc;
}

void rotate_image(const double* src, double* dst, int rows, int cols, int k) {
  double c, s;
  rotation_components(k, &c, &s);
  const double cr = (rows - 1) / 2.0;
  const double cc = (cols - 1) / 2.0;
  for (int r = 0; r < rows; ++r) {
    for (int col = 0; col < cols; ++col) {
      // inverse rotation of the output coordinate
      const double dy = r - cr, dx = col - cc;
      const double sy = c * dy + s * dx + cr;
      const double sx = -s * dy + c * dx + cc;
      dst[r * cols + col] = sample_bilinear(src, rows, cols, sy, sx);
    }
  }
}

}  // namespace

Dataset make_rotating_mnist(const IdxImages& images, const std::vector<int>& labels,
                            std::uint64_t seed, std::array<int, 2> digits, int max_sources) {
  if (static_cast<std::size_t>(images.count) != labels.size()) {
    throw DataError("rotating mnist: image/label counts disagree");
  }
  std::vector<int> keep;
  for (int i = 0; i < images.count; ++i) {
    if (labels[i] == digits[0] || labels[i] == digits[1]) keep.push_back(i);
  }
  if (keep.empty()) throw DataError("rotating mnist: no images with the requested digits");
  Rng rng(seed);
  rng.shuffle(keep);
  if (max_sources > 0 && static_cast<int>(keep.size()) > max_sources) {
    keep.resize(max_sources);
  }

  const int rows = images.rows, cols = images.cols;
  const int d = rows * cols;
  const int n = static_cast<int>(keep.size()) * 8;
  Dataset ds;
  ds.task = obj::LossKind::bce;
  ds.x = Matrix(n, d);
  ds.z = Matrix(n, 8);
  ds.y.resize(n);
  ds.context_id.resize(n);
  ds.group.resize(n);
  std::vector<double> rotated(d);
  int row = 0;
  for (std::size_t s = 0; s < keep.size(); ++s) {
    const int src = keep[s];
    const double* img = &images.pixels[static_cast<std::size_t>(src) * d];
    const double label = labels[src] == digits[1] ? 1.0 : 0.0;
    for (int k = 0; k < 8; ++k) {
      rotate_image(img, rotated.data(), rows, cols, k);
      std::copy(rotated.begin(), rotated.end(), ds.x.data.begin() + static_cast<std::size_t>(row) * d);
      ds.z.at(row, k) = 1.0;
      ds.y[row] = label;
      ds.context_id[row] = k;
      ds.group[row] = static_cast<int>(s);
      ++row;
    }
  }
  for (int j = 0; j < d; ++j) ds.feature_names.push_back("px_" + std::to_string(j));
  for (int k = 0; k < 8; ++k) ds.context_names.push_back("rot_" + std::to_string(k * 45));
  return ds;
}

// ---- CSV --------------------------------------------------------------------

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      cells.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur.push_back(ch);
    }
  }
  cells.push_back(cur);
  return cells;
}

bool parse_double(const std::string& s, double* out) {
  if (s.empty()) return false;
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size()) return false;
  *out = v;
  return true;
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct RawCsv {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

RawCsv read_raw_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  RawCsv csv;
  std::string line;
  if (!std::getline(in, line)) throw FormatError(path + ": empty file, header required");
  csv.header = split_csv_line(line);
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto cells = split_csv_line(line);
    if (cells.size() != csv.header.size()) {
      throw FormatError(path + ": row " + std::to_string(lineno) + " has " +
                        std::to_string(cells.size()) + " cells, header has " +
                        std::to_string(csv.header.size()));
    }
    csv.rows.push_back(std::move(cells));
  }
  return csv;
}

int find_column(const RawCsv& csv, const std::string& name, const std::string& role) {
  for (std::size_t i = 0; i < csv.header.size(); ++i) {
    if (csv.header[i] == name) return static_cast<int>(i);
  }
  throw ConfigError("missing " + role + " column '" + name + "'");
}

}  // namespace

Dataset load_csv(const std::string& path, const CsvOptions& opts) {
  RawCsv csv = read_raw_csv(path);

  // Expand declared categorical columns into one-hot indicator columns.
  std::set<std::string> categorical(opts.categorical_columns.begin(),
                                    opts.categorical_columns.end());
  for (const auto& name : opts.categorical_columns) {
    find_column(csv, name, "categorical");
  }
  std::map<std::size_t, std::vector<std::string>> categories;  // column -> sorted levels
  for (std::size_t c = 0; c < csv.header.size(); ++c) {
    if (!categorical.count(csv.header[c])) continue;
    std::set<std::string> values;
    for (const auto& row : csv.rows) {
      if (row[c].empty()) {
        throw DataError(path + ": missing cell in categorical column '" + csv.header[c] + "'");
      }
      values.insert(row[c]);
    }
    categories[c].assign(values.begin(), values.end());
  }
  RawCsv expanded;
  for (std::size_t c = 0; c < csv.header.size(); ++c) {
    if (!categories.count(c)) {
      expanded.header.push_back(csv.header[c]);
    } else {
      for (const auto& v : categories[c]) expanded.header.push_back(csv.header[c] + "=" + v);
    }
  }
  expanded.rows.resize(csv.rows.size());
  for (std::size_t r = 0; r < csv.rows.size(); ++r) {
    expanded.rows[r].reserve(expanded.header.size());
    for (std::size_t c = 0; c < csv.header.size(); ++c) {
      if (!categories.count(c)) {
        expanded.rows[r].push_back(csv.rows[r][c]);
      } else {
        for (const auto& v : categories[c]) {
          expanded.rows[r].push_back(csv.rows[r][c] == v ? "1" : "0");
        }
      }
    }
  }

  // Context columns may name either an original column or, for categorical
  // contexts, every derived indicator shares the original's prefix.
  std::vector<int> context_cols;
  for (const auto& name : opts.context_columns) {
    bool found = false;
    for (std::size_t c = 0; c < expanded.header.size(); ++c) {
      if (expanded.header[c] == name ||
          (categorical.count(name) && expanded.header[c].rfind(name + "=", 0) == 0)) {
        context_cols.push_back(static_cast<int>(c));
        found = true;
      }
    }
    if (!found) throw ConfigError("missing context column '" + name + "'");
  }
  int target_col = -1;
  for (std::size_t c = 0; c < expanded.header.size(); ++c) {
    if (expanded.header[c] == opts.target_column) target_col = static_cast<int>(c);
  }
  if (target_col < 0) throw ConfigError("missing target column '" + opts.target_column + "'");

  std::set<int> context_set(context_cols.begin(), context_cols.end());
  if (context_set.count(target_col)) {
    throw ConfigError("target column '" + opts.target_column + "' also declared as context");
  }
  std::vector<int> feature_cols;
  for (std::size_t c = 0; c < expanded.header.size(); ++c) {
    if (static_cast<int>(c) != target_col && !context_set.count(static_cast<int>(c))) {
      feature_cols.push_back(static_cast<int>(c));
    }
  }
  if (feature_cols.empty()) throw ConfigError("no feature columns remain");

  Dataset ds;
  ds.task = opts.task;
  const int n = static_cast<int>(expanded.rows.size());
  ds.x = Matrix(n, static_cast<int>(feature_cols.size()));
  ds.z = Matrix(n, static_cast<int>(context_cols.size()));
  ds.y.resize(n);
  for (int col : feature_cols) ds.feature_names.push_back(expanded.header[col]);
  for (int col : context_cols) ds.context_names.push_back(expanded.header[col]);
  for (int r = 0; r < n; ++r) {
    auto cell = [&](int col) {
      double v;
      if (!parse_double(expanded.rows[r][col], &v)) {
        throw DataError(path + ": unparsable cell at row " + std::to_string(r + 2) +
                        ", column '" + expanded.header[col] + "'");
      }
      return v;
    };
    for (std::size_t j = 0; j < feature_cols.size(); ++j) ds.x.at(r, static_cast<int>(j)) = cell(feature_cols[j]);
    for (std::size_t j = 0; j < context_cols.size(); ++j) ds.z.at(r, static_cast<int>(j)) = cell(context_cols[j]);
    ds.y[r] = cell(target_col);
  }
  ds.validate();
  return ds;
}

void write_cache(const Dataset& ds, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  for (int j = 0; j < ds.x.cols; ++j) out << "x_" << j << ',';
  for (int j = 0; j < ds.z.cols; ++j) out << "z_" << j << ',';
  out << 'y';
  if (!ds.eta.empty()) out << ",eta";
  if (!ds.group.empty()) out << ",group";
  out << '\n';
  for (int i = 0; i < ds.n(); ++i) {
    for (int j = 0; j < ds.x.cols; ++j) out << format_double(ds.x.at(i, j)) << ',';
    for (int j = 0; j < ds.z.cols; ++j) out << format_double(ds.z.at(i, j)) << ',';
    out << format_double(ds.y[i]);
    if (!ds.eta.empty()) out << ',' << format_double(ds.eta[i]);
    if (!ds.group.empty()) out << ',' << ds.group[i];
    out << '\n';
  }
  if (!out) throw IoError("failed writing " + path);
}

Dataset load_cache(const std::string& path, obj::LossKind task) {
  RawCsv csv = read_raw_csv(path);
  std::vector<int> x_cols, z_cols;
  int y_col = -1, eta_col = -1, group_col = -1;
  for (std::size_t c = 0; c < csv.header.size(); ++c) {
    const std::string& h = csv.header[c];
    if (h.rfind("x_", 0) == 0) {
      x_cols.push_back(static_cast<int>(c));
    } else if (h.rfind("z_", 0) == 0) {
      z_cols.push_back(static_cast<int>(c));
    } else if (h == "y") {
      y_col = static_cast<int>(c);
    } else if (h == "eta") {
      eta_col = static_cast<int>(c);
    } else if (h == "group") {
      group_col = static_cast<int>(c);
    } else {
      throw FormatError(path + ": unexpected cache column '" + h + "'");
    }
  }
  if (x_cols.empty() || y_col < 0) throw FormatError(path + ": cache needs x_* columns and y");
  Dataset ds;
  ds.task = task;
  const int n = static_cast<int>(csv.rows.size());
  ds.x = Matrix(n, static_cast<int>(x_cols.size()));
  ds.z = Matrix(n, static_cast<int>(z_cols.size()));
  ds.y.resize(n);
  if (eta_col >= 0) ds.eta.resize(n);
  if (group_col >= 0) ds.group.resize(n);
  for (int r = 0; r < n; ++r) {
    auto cell = [&](int col) {
      double v;
      if (!parse_double(csv.rows[r][col], &v)) {
        throw DataError(path + ": unparsable cell at row " + std::to_string(r + 2) +
                        ", column '" + csv.header[col] + "'");
      }
      return v;
    };
    for (std::size_t j = 0; j < x_cols.size(); ++j) ds.x.at(r, static_cast<int>(j)) = cell(x_cols[j]);
    for (std::size_t j = 0; j < z_cols.size(); ++j) ds.z.at(r, static_cast<int>(j)) = cell(z_cols[j]);
    ds.y[r] = cell(y_col);
    if (eta_col >= 0) ds.eta[r] = cell(eta_col);
    if (group_col >= 0) ds.group[r] = static_cast<int>(cell(group_col));
  }
  for (std::size_t j = 0; j < x_cols.size(); ++j) ds.feature_names.push_back(csv.header[x_cols[j]]);
  for (std::size_t j = 0; j < z_cols.size(); ++j) ds.context_names.push_back(csv.header[z_cols[j]]);
  ds.validate();
  return ds;
}

// ---- Splits -----------------------------------------------------------------

namespace {

// Units of splitting: single rows, or whole groups when defined. Each unit
// carries a label for stratification (bce only).
struct SplitUnits {
  std::vector<std::vector<int>> rows;  // rows per unit
  std::vector<int> label;              // 0/1 for bce, 0 otherwise
};

SplitUnits make_units(const Dataset& ds) {
  SplitUnits u;
  if (ds.group.empty()) {
    u.rows.resize(ds.n());
    u.label.resize(ds.n());
    for (int i = 0; i < ds.n(); ++i) {
      u.rows[i] = {i};
      u.label[i] = ds.task == obj::LossKind::bce ? static_cast<int>(ds.y[i]) : 0;
    }
    return u;
  }
  std::map<int, std::vector<int>> by_group;
  for (int i = 0; i < ds.n(); ++i) by_group[ds.group[i]].push_back(i);
  for (auto& [gid, rows] : by_group) {
    u.label.push_back(ds.task == obj::LossKind::bce ? static_cast<int>(ds.y[rows.front()]) : 0);
    u.rows.push_back(std::move(rows));
  }
  return u;
}

// Shuffled unit indices per stratum.
std::vector<std::vector<int>> strata_of(const SplitUnits& units, std::uint64_t seed) {
  std::map<int, std::vector<int>> by_label;
  for (std::size_t i = 0; i < units.rows.size(); ++i) {
    by_label[units.label[i]].push_back(static_cast<int>(i));
  }
  std::vector<std::vector<int>> strata;
  Rng rng(seed);
  for (auto& [label, idx] : by_label) {
    rng.shuffle(idx);
    strata.push_back(std::move(idx));
  }
  return strata;
}

}  // namespace

std::vector<std::vector<int>> kfold_split(const Dataset& ds, int folds, std::uint64_t seed) {
  if (folds < 2) throw ConfigError("kfold_split: folds must be >= 2");
  SplitUnits units = make_units(ds);
  if (folds > static_cast<int>(units.rows.size())) {
    throw ConfigError("fold count " + std::to_string(folds) + " exceeds available units " +
                      std::to_string(units.rows.size()));
  }
  std::vector<std::vector<int>> out(folds);
  int next = 0;
  for (const auto& stratum : strata_of(units, seed)) {
    for (int unit : stratum) {
      for (int row : units.rows[unit]) out[next % folds].push_back(row);
      ++next;
    }
  }
  for (auto& fold : out) std::sort(fold.begin(), fold.end());
  return out;
}

TrainValTest fraction_split(const Dataset& ds, std::array<double, 3> fractions,
                            std::uint64_t seed) {
  double total = fractions[0] + fractions[1] + fractions[2];
  if (std::abs(total - 1.0) > 1e-9) {
    throw ConfigError("split fractions must sum to 1, got " + std::to_string(total));
  }
  for (double f : fractions) {
    if (f < 0.0) throw ConfigError("split fractions must be nonnegative");
  }
  SplitUnits units = make_units(ds);

  TrainValTest out;
  std::vector<std::vector<int>*> parts = {&out.train, &out.val, &out.test};
  for (const auto& stratum : strata_of(units, seed)) {
    const int sn = static_cast<int>(stratum.size());
    // largest-remainder allocation of this stratum across parts
    std::array<int, 3> count{};
    std::array<double, 3> rem{};
    int assigned = 0;
    for (int p = 0; p < 3; ++p) {
      const double want = fractions[p] * sn;
      count[p] = static_cast<int>(std::floor(want));
      rem[p] = want - count[p];
      assigned += count[p];
    }
    while (assigned < sn) {
      int best = 0;
      for (int p = 1; p < 3; ++p) {
        if (rem[p] > rem[best]) best = p;
      }
      ++count[best];
      rem[best] = -1.0;
      ++assigned;
    }
    int pos = 0;
    for (int p = 0; p < 3; ++p) {
      for (int i = 0; i < count[p]; ++i, ++pos) {
        for (int row : units.rows[stratum[pos]]) parts[p]->push_back(row);
      }
    }
  }
  std::sort(out.train.begin(), out.train.end());
  std::sort(out.val.begin(), out.val.end());
  std::sort(out.test.begin(), out.test.end());
  return out;
}

}  // namespace cstg::data
