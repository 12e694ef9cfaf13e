#include "adagc/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <sstream>

namespace adagc {

MultiLabelDataset MultiLabelDataset::subset(std::span<const std::size_t> idx) const {
  MultiLabelDataset out;
  out.features = features.gather_rows(idx);
  out.y_true = y_true.gather_rows(idx);
  if (has_extents()) out.extents = extents.gather_rows(idx);
  if (has_observed()) out.y_observed = y_observed.gather_rows(idx);
  return out;
}

void validate(const MultiLabelDataset& ds) {
  if (ds.y_true.rows() != ds.features.rows())
    throw_dimension_mismatch("dataset label rows vs feature rows", ds.features.rows(),
                             ds.y_true.rows());
  require(ds.features.all_finite(), ErrorKind::invalid_data, "dataset features must be finite");
  require(is_binary(ds.y_true), ErrorKind::invalid_data, "true labels must be binary");
  for (std::size_t i = 0; i < ds.y_true.rows(); ++i) {
    bool any = false;
    for (double v : ds.y_true.row(i)) any = any || v == 1.0;
    if (!any)
      throw Error(ErrorKind::invalid_data,
                  "row " + std::to_string(i) + " has no positive true label");
  }
  if (ds.has_extents()) validate_extents(ds.y_true, ds.extents);
  if (ds.has_observed()) {
    require_same_shape(ds.y_true, ds.y_observed, "observed vs true labels");
    require(is_single_positive(ds.y_observed), ErrorKind::invalid_data,
            "observed labels must have exactly one positive per row");
    for (std::size_t k = 0; k < ds.y_true.size(); ++k)
      if (ds.y_observed.values()[k] > ds.y_true.values()[k])
        throw Error(ErrorKind::invalid_data, "observed positive is not a true positive (row " +
                                                 std::to_string(k / ds.y_true.cols()) + ")");
  }
}

void validate(const SyntheticSpec& s) {
  require(s.n >= 4, ErrorKind::invalid_argument, "synthetic n must be >= 4");
  require(s.num_classes >= 1, ErrorKind::invalid_argument, "synthetic C must be >= 1");
  require(s.feature_dim >= 1, ErrorKind::invalid_argument, "synthetic feature dim must be >= 1");
  require(s.separation > 0.0, ErrorKind::invalid_argument, "separation must be > 0");
  require(s.noise >= 0.0, ErrorKind::invalid_argument, "noise must be >= 0");
  require(s.dirichlet_concentration > 0.0, ErrorKind::invalid_argument,
          "Dirichlet concentration must be > 0");
  require(s.mean_cardinality >= 1.0 && s.mean_cardinality <= static_cast<double>(s.num_classes),
          ErrorKind::invalid_argument, "mean cardinality must lie in [1, C]");
}

std::vector<double> class_frequency_weights(std::size_t num_classes, double skew) {
  std::vector<double> w(num_classes);
  for (std::size_t c = 0; c < num_classes; ++c)
    w[c] = std::pow(static_cast<double>(c + 1), -skew);
  return w;
}

LabelMatrix sample_label_matrix(std::size_t n, std::size_t C, double mean_cardinality,
                                std::span<const double> class_weights, SeededRng& rng) {
  require(C >= 1 && class_weights.size() == C, ErrorKind::invalid_argument,
          "class weights must have one entry per class");
  require(mean_cardinality >= 1.0 && mean_cardinality <= static_cast<double>(C),
          ErrorKind::invalid_argument, "mean cardinality must lie in [1, C]");
  const double q = C == 1 ? 0.0 : (mean_cardinality - 1.0) / static_cast<double>(C - 1);
  LabelMatrix y(n, C);
  std::vector<double> w;
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t k = 1;
    for (std::size_t j = 1; j < C; ++j) k += rng.uniform() < q;
    w.assign(class_weights.begin(), class_weights.end());
    for (std::size_t picked = 0; picked < k; ++picked) {
      const double total = std::accumulate(w.begin(), w.end(), 0.0);
      double u = rng.uniform() * total;
      std::size_t c = 0;
      for (; c + 1 < C; ++c) {
        if (w[c] > 0.0 && u < w[c]) break;
        u -= w[c];
      }
      while (w[c] == 0.0) --c;  // rounding can run past the last live class
      y(i, c) = 1.0;
      w[c] = 0.0;
    }
  }
  return y;
}

DatasetSplits generate_synthetic(const SyntheticSpec& spec) {
  validate(spec);
  SeededRng rng(spec.seed);
  const std::size_t C = spec.num_classes;
  const std::size_t d = spec.feature_dim;

  // Gaussian directions, orthogonalized against earlier prototypes while
  // C <= d' so that class evidence does not leak between directions.
  DenseMatrix prototypes(C, d);
  for (std::size_t c = 0; c < C; ++c) {
    auto row = prototypes.row(c);
    for (double& v : row) v = rng.normal();
    if (C <= d) {
      for (std::size_t k = 0; k < c; ++k) {
        auto prev = prototypes.row(k);
        double dot = 0.0;
        for (std::size_t j = 0; j < d; ++j) dot += row[j] * prev[j];
        dot /= spec.separation * spec.separation;
        for (std::size_t j = 0; j < d; ++j) row[j] -= dot * prev[j];
      }
    }
    double norm = 0.0;
    for (double v : row) norm += v * v;
    norm = std::sqrt(norm);
    for (double& v : row) v *= spec.separation / norm;
  }

  const auto weights = class_frequency_weights(C, spec.class_skew);
  MultiLabelDataset all;
  all.y_true = sample_label_matrix(spec.n, C, spec.mean_cardinality, weights, rng);
  all.extents = ExtentMatrix(spec.n, C);
  all.features = DenseMatrix(spec.n, d);
  for (std::size_t i = 0; i < spec.n; ++i) {
    double total = 0.0;
    for (std::size_t c = 0; c < C; ++c) {
      if (all.y_true(i, c) != 1.0) continue;
      // Gamma draws are floored so every true class keeps a positive extent.
      const double g = std::max(rng.gamma(spec.dirichlet_concentration), 1e-12);
      all.extents(i, c) = g;
      total += g;
    }
    for (std::size_t c = 0; c < C; ++c) all.extents(i, c) /= total;
    auto x = all.features.row(i);
    for (std::size_t c = 0; c < C; ++c) {
      const double e = all.extents(i, c);
      if (e == 0.0) continue;
      auto proto = prototypes.row(c);
      for (std::size_t j = 0; j < d; ++j) x[j] += e * proto[j];
    }
    for (double& v : x) v += spec.noise * rng.normal();
  }

  std::vector<std::size_t> order(spec.n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  rng.shuffle(order);
  const std::size_t n_train = spec.n / 2;
  const std::size_t n_val = spec.n / 4;
  const std::span<const std::size_t> o(order);
  DatasetSplits s;
  s.train = all.subset(o.subspan(0, n_train));
  s.val = all.subset(o.subspan(n_train, n_val));
  s.test = all.subset(o.subspan(n_train + n_val));
  return s;
}

// --- CSV ------------------------------------------------------------------

void write_matrix_csv(std::ostream& os, const DenseMatrix& m, bool integral) {
  os << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (std::size_t r = 0; r < m.rows(); ++r) {
    auto row = m.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c) os << ',';
      if (integral)
        os << static_cast<long long>(row[c]);
      else
        os << row[c];
    }
    os << '\n';
  }
}

void write_matrix_csv(const std::filesystem::path& path, const DenseMatrix& m, bool integral) {
  std::ofstream os(path);
  if (!os) throw Error(ErrorKind::io, "cannot open '" + path.string() + "' for writing");
  write_matrix_csv(os, m, integral);
  if (!os) throw Error(ErrorKind::io, "failed writing '" + path.string() + "'");
}

DenseMatrix read_matrix_csv(std::istream& is, const std::string& source) {
  std::vector<double> data;
  std::size_t cols = 0, rows = 0, line_no = 0;
  std::string line;
  while (std::getline(is, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::size_t col = 0, start = 0;
    while (true) {
      const std::size_t end = line.find(',', start);
      const std::string field = line.substr(start, end == std::string::npos ? end : end - start);
      ++col;
      char* stop = nullptr;
      const double v = std::strtod(field.c_str(), &stop);
      if (field.empty() || stop == field.c_str() || *stop != '\0' || !std::isfinite(v))
        throw Error(ErrorKind::invalid_data, source + ": line " + std::to_string(line_no) +
                                                 ", column " + std::to_string(col) +
                                                 ": not a finite number '" + field + "'");
      data.push_back(v);
      if (end == std::string::npos) break;
      start = end + 1;
    }
    if (rows == 0) cols = col;
    if (col != cols)
      throw Error(ErrorKind::invalid_data, source + ": line " + std::to_string(line_no) +
                                               " has " + std::to_string(col) +
                                               " columns, expected " + std::to_string(cols));
    ++rows;
  }
  return DenseMatrix(rows, cols, std::move(data));
}

DenseMatrix read_matrix_csv(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw Error(ErrorKind::io, "cannot open '" + path.string() + "'");
  return read_matrix_csv(is, path.string());
}

namespace {

void check_label_rows(const LabelMatrix& y, const std::string& source) {
  for (std::size_t r = 0; r < y.rows(); ++r) {
    bool any = false;
    for (std::size_t c = 0; c < y.cols(); ++c) {
      const double v = y(r, c);
      if (v != 0.0 && v != 1.0)
        throw Error(ErrorKind::invalid_data, source + ": line " + std::to_string(r + 1) +
                                                 ", column " + std::to_string(c + 1) +
                                                 ": label must be 0 or 1");
      any = any || v == 1.0;
    }
    if (!any)
      throw Error(ErrorKind::invalid_data,
                  source + ": line " + std::to_string(r + 1) + ": row has no positive label");
  }
}

}  // namespace

MultiLabelDataset ingest_csv(const std::filesystem::path& features,
                             const std::filesystem::path& labels,
                             const std::optional<std::filesystem::path>& extents) {
  MultiLabelDataset ds;
  ds.features = read_matrix_csv(features);
  ds.y_true = read_matrix_csv(labels);
  if (ds.y_true.rows() != ds.features.rows())
    throw Error(ErrorKind::invalid_data, "row-count mismatch: " + features.string() + " has " +
                                             std::to_string(ds.features.rows()) + " rows, " +
                                             labels.string() + " has " +
                                             std::to_string(ds.y_true.rows()));
  check_label_rows(ds.y_true, labels.string());
  if (extents) {
    ds.extents = read_matrix_csv(*extents);
    if (!ds.extents.same_shape(ds.y_true))
      throw Error(ErrorKind::invalid_data, extents->string() + ": shape differs from labels");
    for (std::size_t r = 0; r < ds.extents.rows(); ++r) {
      for (std::size_t c = 0; c < ds.extents.cols(); ++c) {
        const double e = ds.extents(r, c);
        const auto where = extents->string() + ": line " + std::to_string(r + 1) + ", column " +
                           std::to_string(c + 1);
        if (e < 0.0) throw Error(ErrorKind::invalid_data, where + ": negative extent");
        if (e > 0.0 && ds.y_true(r, c) == 0.0)
          throw Error(ErrorKind::invalid_data, where + ": extent is nonzero where label is 0");
        if (e == 0.0 && ds.y_true(r, c) == 1.0)
          throw Error(ErrorKind::invalid_data, where + ": extent is zero where label is 1");
      }
    }
  }
  validate(ds);
  return ds;
}

void export_dataset(const std::filesystem::path& dir, const std::string& prefix,
                    const MultiLabelDataset& ds) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::io, "cannot create directory '" + dir.string() + "'");
  write_matrix_csv(dir / (prefix + "_features.csv"), ds.features);
  write_matrix_csv(dir / (prefix + "_labels.csv"), ds.y_true, true);
  if (ds.has_extents()) write_matrix_csv(dir / (prefix + "_extents.csv"), ds.extents);
  if (ds.has_observed()) write_matrix_csv(dir / (prefix + "_observed.csv"), ds.y_observed, true);
}

MultiLabelDataset load_dataset(const std::filesystem::path& dir, const std::string& prefix) {
  const auto ext = dir / (prefix + "_extents.csv");
  MultiLabelDataset ds = ingest_csv(dir / (prefix + "_features.csv"),
                                    dir / (prefix + "_labels.csv"),
                                    std::filesystem::exists(ext) ? std::optional(ext) : std::nullopt);
  const auto obs = dir / (prefix + "_observed.csv");
  if (std::filesystem::exists(obs)) {
    ds.y_observed = read_matrix_csv(obs);
    check_label_rows(ds.y_observed, obs.string());
    validate(ds);
  }
  return ds;
}

}  // namespace adagc
