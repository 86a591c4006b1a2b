#include "tmnr/dataset.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>

#include <openssl/evp.h>

#include "json.hpp"

namespace tmnr {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

static_assert(std::endian::native == std::endian::little, "binary view files assume a little-endian host");

std::string read_file(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw MissingFileError("cannot open " + file.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

std::string hex_digest(const std::string& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  EVP_Digest(bytes.data(), bytes.size(), digest, &length, EVP_sha256(), nullptr);
  std::ostringstream out;
  for (unsigned int i = 0; i < length; ++i) out << std::hex << std::setw(2) << std::setfill('0') << int{digest[i]};
  return out.str();
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> lines;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) lines.push_back(line);
  }
  return lines;
}

Matrix parse_binary_view(const std::string& bytes, const fs::path& file, Index rows, Index cols) {
  const std::size_t expected = static_cast<std::size_t>(rows * cols) * sizeof(double);
  if (bytes.size() != expected) {
    throw ShapeError(file.string() + ": expected " + std::to_string(expected) + " bytes (" + std::to_string(rows) +
                     " x " + std::to_string(cols) + " float64), found " + std::to_string(bytes.size()) +
                     "; mismatch at byte offset " + std::to_string(std::min(bytes.size(), expected)));
  }
  using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  RowMajor m(rows, cols);
  std::memcpy(m.data(), bytes.data(), expected);
  return m;
}

Matrix parse_csv_view(const std::string& text, const fs::path& file, Index rows, Index cols) {
  const auto lines = lines_of(text);
  if (static_cast<Index>(lines.size()) != rows) {
    throw ShapeError(file.string() + ": expected " + std::to_string(rows) + " rows, found " +
                     std::to_string(lines.size()) + " (first mismatch at line " +
                     std::to_string(std::min<std::size_t>(lines.size(), static_cast<std::size_t>(rows)) + 1) + ")");
  }
  Matrix m(rows, cols);
  for (Index r = 0; r < rows; ++r) {
    std::istringstream line(lines[r]);
    std::string cell;
    Index c = 0;
    while (std::getline(line, cell, ',')) {
      if (c >= cols) break;
      try {
        m(r, c) = std::stod(cell);
      } catch (const std::exception&) {
        throw DataError(file.string() + ": line " + std::to_string(r + 1) + ", column " + std::to_string(c + 1) +
                        ": not a number '" + cell + "'");
      }
      ++c;
    }
    if (c != cols || line.rdbuf()->in_avail() > 0) {
      throw ShapeError(file.string() + ": line " + std::to_string(r + 1) + " has the wrong number of columns (expected " +
                       std::to_string(cols) + ")");
    }
  }
  return m;
}

}  // namespace

std::vector<Index> MultiViewDataset::dims() const {
  std::vector<Index> out;
  for (const auto& v : views) out.push_back(v.cols());
  return out;
}

void MultiViewDataset::validate() const {
  if (classes < 1) throw DataError(name + ": class count must be positive");
  for (std::size_t v = 0; v < views.size(); ++v) {
    if (views[v].rows() != size()) {
      throw ShapeError(name + ": view " + std::to_string(v) + " has " + std::to_string(views[v].rows()) +
                       " rows but there are " + std::to_string(size()) + " labels");
    }
  }
  for (Index i = 0; i < size(); ++i) {
    if (labels(i) < 0 || labels(i) >= classes) {
      throw LabelRangeError(name + ": label " + std::to_string(labels(i)) + " at row " + std::to_string(i) +
                            " outside [0, " + std::to_string(classes) + ")");
    }
  }
}

TrainingSet MultiViewDataset::training_set() const {
  TrainingSet out;
  out.views = views;
  out.targets = Matrix::Zero(size(), classes);
  for (Index i = 0; i < size(); ++i) out.targets(i, labels(i)) = 1.0;
  return out;
}

MultiViewDataset MultiViewDataset::subset(std::span<const Index> indices) const {
  MultiViewDataset out;
  out.name = name;
  out.classes = classes;
  const Index n = static_cast<Index>(indices.size());
  out.labels.resize(n);
  for (const auto& view : views) out.views.emplace_back(n, view.cols());
  for (Index r = 0; r < n; ++r) {
    out.labels(r) = labels(indices[r]);
    for (std::size_t v = 0; v < views.size(); ++v) out.views[v].row(r) = views[v].row(indices[r]);
  }
  return out;
}

std::vector<Vector> MultiViewDataset::features(Index n) const {
  std::vector<Vector> out;
  for (const auto& view : views) out.push_back(view.row(n).transpose());
  return out;
}

std::string file_sha256(const fs::path& file) { return hex_digest(read_file(file)); }

MultiViewDataset load_dataset(const fs::path& dir, std::map<std::string, std::string>* checksums) {
  const fs::path meta_path = dir / "meta.json";
  json meta;
  try {
    meta = json::parse(read_file(meta_path));
  } catch (const json::exception& e) {
    throw DataError(meta_path.string() + ": " + e.what());
  }

  MultiViewDataset data;
  std::vector<std::string> files;
  std::vector<Index> dims;
  std::string format;
  std::string labels_file;
  json recorded;
  try {
    data.name = meta.value("name", dir.filename().string());
    data.classes = meta.at("C").get<Index>();
    const Index views = meta.at("V").get<Index>();
    dims = meta.at("dims").get<std::vector<Index>>();
    files = meta.at("files").get<std::vector<std::string>>();
    format = meta.value("format", std::string("f64le"));
    labels_file = meta.value("labels", std::string("labels.csv"));
    recorded = meta.value("checksums", json::object());
    if (static_cast<Index>(dims.size()) != views || static_cast<Index>(files.size()) != views) {
      throw ShapeError(meta_path.string() + ": V=" + std::to_string(views) + " but dims/files list " +
                       std::to_string(dims.size()) + "/" + std::to_string(files.size()) + " entries");
    }
  } catch (const json::exception& e) {
    throw DataError(meta_path.string() + ": " + e.what());
  }
  if (format != "f64le" && format != "csv") throw DataError(meta_path.string() + ": unknown format '" + format + "'");

  const auto record = [&](const std::string& name, const std::string& bytes) {
    const std::string digest = hex_digest(bytes);
    if (recorded.contains(name) && recorded[name].get<std::string>() != digest) {
      throw ChecksumError((dir / name).string() + ": checksum mismatch");
    }
    if (checksums != nullptr) (*checksums)[name] = digest;
  };

  const std::string label_text = read_file(dir / labels_file);
  record(labels_file, label_text);
  const auto label_lines = lines_of(label_text);
  data.labels.resize(static_cast<Index>(label_lines.size()));
  for (std::size_t i = 0; i < label_lines.size(); ++i) {
    try {
      std::size_t used = 0;
      data.labels(static_cast<Index>(i)) = std::stoll(label_lines[i], &used);
    } catch (const std::exception&) {
      throw DataError((dir / labels_file).string() + ": line " + std::to_string(i + 1) + ": not an integer");
    }
    if (data.labels(static_cast<Index>(i)) < 0 || data.labels(static_cast<Index>(i)) >= data.classes) {
      throw LabelRangeError((dir / labels_file).string() + ": line " + std::to_string(i + 1) + ": label " +
                            label_lines[i] + " outside [0, " + std::to_string(data.classes) + ")");
    }
  }

  const Index rows = data.size();
  for (std::size_t v = 0; v < files.size(); ++v) {
    const fs::path file = dir / files[v];
    const std::string bytes = read_file(file);
    record(files[v], bytes);
    data.views.push_back(format == "csv" ? parse_csv_view(bytes, file, rows, dims[v])
                                         : parse_binary_view(bytes, file, rows, dims[v]));
  }
  data.validate();
  return data;
}

void save_dataset(const MultiViewDataset& data, const fs::path& dir, ViewFormat format) {
  data.validate();
  fs::create_directories(dir);
  json meta;
  meta["name"] = data.name;
  meta["C"] = data.classes;
  meta["V"] = data.view_count();
  meta["dims"] = data.dims();
  meta["format"] = format == ViewFormat::csv ? "csv" : "f64le";
  meta["labels"] = "labels.csv";
  json checksums = json::object();
  std::vector<std::string> files;
  for (std::size_t v = 0; v < data.views.size(); ++v) {
    const std::string name = "view" + std::to_string(v) + (format == ViewFormat::csv ? ".csv" : ".bin");
    files.push_back(name);
    std::string bytes;
    if (format == ViewFormat::csv) {
      std::ostringstream out;
      out << std::setprecision(17);
      for (Index r = 0; r < data.views[v].rows(); ++r) {
        for (Index c = 0; c < data.views[v].cols(); ++c) out << (c ? "," : "") << data.views[v](r, c);
        out << '\n';
      }
      bytes = out.str();
    } else {
      const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rows = data.views[v];
      bytes.assign(reinterpret_cast<const char*>(rows.data()), static_cast<std::size_t>(rows.size()) * sizeof(double));
    }
    std::ofstream(dir / name, std::ios::binary) << bytes;
    checksums[name] = hex_digest(bytes);
  }
  std::ostringstream labels;
  for (Index i = 0; i < data.size(); ++i) labels << data.labels(i) << '\n';
  std::ofstream(dir / "labels.csv", std::ios::binary) << labels.str();
  checksums["labels.csv"] = hex_digest(labels.str());
  meta["files"] = files;
  meta["checksums"] = checksums;
  std::ofstream(dir / "meta.json") << meta.dump(2) << '\n';
}

SplitIndices split_indices(Index n, double test_fraction, std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) throw ConfigError("test fraction must lie in (0, 1)");
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  Rng rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  const auto test_count = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(n)));
  SplitIndices out;
  out.test.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(test_count));
  out.train.assign(order.begin() + static_cast<std::ptrdiff_t>(test_count), order.end());
  return out;
}

std::pair<MultiViewDataset, MultiViewDataset> split(const MultiViewDataset& data, double test_fraction,
                                                    std::uint64_t seed) {
  const auto idx = split_indices(data.size(), test_fraction, seed);
  return {data.subset(idx.train), data.subset(idx.test)};
}

}  // namespace tmnr
