#include "lindyn/datasets.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace lindyn {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parse_double(const std::string& field, const std::string& path, std::size_t line, std::size_t col) {
  const std::string f = trim(field);
  double v = 0;
  const char* first = f.data();
  const char* last = f.data() + f.size();
  if (!f.empty() && *first == '+') ++first;
  const auto res = std::from_chars(first, last, v);
  if (f.empty() || res.ec != std::errc() || res.ptr != last) {
    throw ParseError(path + ":" + std::to_string(line) + ": column " + std::to_string(col) +
                     ": not a number: '" + f + "'");
  }
  return v;
}

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

std::vector<long> labels_from_matrix(const Matrix<double>& m, const std::string& path) {
  if (m.cols() != 1) {
    throw ParseError(path + ": one-hot encoding needs a single label column, got " + std::to_string(m.cols()));
  }
  std::vector<long> labels(m.rows());
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    const double v = m(i, 0);
    if (v != std::floor(v) || v < 0) {
      throw ParseError(path + ": row " + std::to_string(i + 1) + ": label is not a nonnegative integer");
    }
    labels[i] = static_cast<long>(v);
  }
  return labels;
}

}  // namespace

Matrix<double> read_csv_matrix(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    std::vector<double> row;
    std::stringstream ss(t);
    std::string field;
    std::size_t col = 0;
    while (std::getline(ss, field, ',')) row.push_back(parse_double(field, path, lineno, ++col));
    if (t.back() == ',') throw ParseError(path + ":" + std::to_string(lineno) + ": trailing comma");
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw ParseError(path + ":" + std::to_string(lineno) + ": ragged row with " + std::to_string(row.size()) +
                       " fields, expected " + std::to_string(rows.front().size()));
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ParseError(path + ": no data rows");
  Matrix<double> m(rows.size(), rows.front().size());
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j) m(i, j) = rows[i][j];
  return m;
}

void write_csv_matrix(const std::string& path, const Matrix<double>& m, const std::vector<std::string>& comments) {
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw Error("cannot write " + path);
  for (const auto& c : comments) std::fprintf(f, "# %s\n", c.c_str());
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) std::fprintf(f, j ? ",%.17g" : "%.17g", m(i, j));
    std::fputc('\n', f);
  }
  std::fclose(f);
}

IdxArray read_idx(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open " + path);
  unsigned char magic[4];
  if (!in.read(reinterpret_cast<char*>(magic), 4)) throw ParseError(path + ": truncated header (magic)");
  if (magic[0] != 0 || magic[1] != 0) throw ParseError(path + ": bad magic, first two bytes must be zero");
  if (magic[2] != 0x08) {
    throw ParseError(path + ": unsupported element type 0x" + std::to_string(magic[2]) + ", only unsigned bytes");
  }
  const int ndim = magic[3];
  if (ndim < 1) throw ParseError(path + ": header declares zero dimensions");
  IdxArray out;
  std::size_t total = 1;
  for (int k = 0; k < ndim; ++k) {
    unsigned char b[4];
    if (!in.read(reinterpret_cast<char*>(b), 4)) {
      throw ParseError(path + ": truncated header at dimension " + std::to_string(k + 1));
    }
    const std::uint32_t v = (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) | (std::uint32_t(b[2]) << 8) |
                            std::uint32_t(b[3]);
    if (v == 0 || v > 0x7fffffffu) throw ParseError(path + ": invalid size for dimension " + std::to_string(k + 1));
    out.dims.push_back(static_cast<std::int32_t>(v));
    total *= v;
  }
  out.data.resize(total);
  if (!in.read(reinterpret_cast<char*>(out.data.data()), static_cast<std::streamsize>(total))) {
    throw ParseError(path + ": payload truncated, expected " + std::to_string(total) + " bytes after header, got " +
                     std::to_string(in.gcount()));
  }
  if (in.peek() != std::char_traits<char>::eof()) throw ParseError(path + ": trailing bytes after payload");
  return out;
}

namespace {

Matrix<double> idx_matrix(const IdxArray& idx, bool scale) {
  if (idx.dims.empty()) throw ShapeError("IDX array has no dimensions");
  const Eigen::Index rows = idx.dims[0];
  Eigen::Index cols = 1;
  for (std::size_t k = 1; k < idx.dims.size(); ++k) cols *= idx.dims[k];
  Matrix<double> m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) {
      const double b = idx.data[i * cols + j];
      m(i, j) = scale ? b / 255.0 : b;
    }
  return m;
}

}  // namespace

Matrix<double> idx_to_matrix(const IdxArray& idx) { return idx_matrix(idx, true); }

Matrix<double> one_hot(const std::vector<long>& labels, int classes) {
  if (classes < 1) throw DomainError("one-hot encoding needs at least one class");
  Matrix<double> y = Matrix<double>::Zero(static_cast<Eigen::Index>(labels.size()), classes);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= classes) {
      throw ParseError("label " + std::to_string(labels[i]) + " at row " + std::to_string(i + 1) +
                       " is outside [0, " + std::to_string(classes) + ")");
    }
    y(static_cast<Eigen::Index>(i), labels[i]) = 1.0;
  }
  return y;
}

FileFormat format_from_path(const std::string& path) {
  if (ends_with(path, ".csv")) return FileFormat::Csv;
  if (ends_with(path, ".idx") || ends_with(path, "-ubyte") || ends_with(path, ".ubyte")) return FileFormat::Idx;
  throw DomainError("cannot infer file format from '" + path + "'; use .csv, .idx or *-ubyte");
}

DataMatrixPair<double> ingest_dataset(const std::string& features_path, FileFormat format,
                                      const std::optional<std::string>& labels_path, TargetEncoding encoding) {
  DataMatrixPair<double> data;
  data.x = format == FileFormat::Csv ? read_csv_matrix(features_path) : idx_to_matrix(read_idx(features_path));
  if (!labels_path) {
    data.y = data.x;
    data.validate();
    return data;
  }
  const FileFormat lf = format_from_path(*labels_path);
  if (encoding.kind == TargetEncoding::Kind::OneHot) {
    std::vector<long> labels;
    if (lf == FileFormat::Idx) {
      const auto idx = read_idx(*labels_path);
      if (idx.dims.size() != 1) throw ParseError(*labels_path + ": label file must be one-dimensional");
      labels.assign(idx.data.begin(), idx.data.end());
    } else {
      labels = labels_from_matrix(read_csv_matrix(*labels_path), *labels_path);
    }
    try {
      data.y = one_hot(labels, encoding.classes);
    } catch (const ParseError& e) {
      throw ParseError(*labels_path + ": " + e.what());
    }
  } else if (lf == FileFormat::Idx) {
    data.y = idx_matrix(read_idx(*labels_path), false);
  } else {
    data.y = read_csv_matrix(*labels_path);
  }
  if (data.y.rows() != data.x.rows()) {
    throw ShapeError("features have " + std::to_string(data.x.rows()) + " rows but targets have " +
                     std::to_string(data.y.rows()));
  }
  data.validate();
  return data;
}

}  // namespace lindyn
