#include "feattrans/affinity.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

namespace feattrans {

namespace {

void check_square(const AffinityMatrix& m) {
  const auto n = Eigen::Index(m.names.size());
  if (m.values.rows() != n || m.values.cols() != n) {
    throw Error(ErrorCode::DimMismatch, "affinity matrix is not " + std::to_string(n) + "x" + std::to_string(n));
  }
}

// Min-max scales every row of `values` in place.
std::vector<std::size_t> scale_rows(Matrix& values, const NormalizeOptions& options) {
  std::vector<std::size_t> degenerate;
  const Eigen::Index n = values.rows();
  for (Eigen::Index i = 0; i < n; ++i) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (Eigen::Index j = 0; j < values.cols(); ++j) {
      if (!options.include_diagonal && i == j) continue;
      lo = std::min(lo, values(i, j));
      hi = std::max(hi, values(i, j));
    }
    if (!(hi > lo)) {
      values.row(i).setZero();
      degenerate.push_back(std::size_t(i));
      continue;
    }
    values.row(i) = (values.row(i).array() - lo) / (hi - lo);
    if (!options.include_diagonal && i < values.cols()) values(i, i) = 0.0;
  }
  return degenerate;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

}  // namespace

double dam_entry(const TranslatorModel& model, const PairedSet& paired) {
  if (model.kind != ModelKind::Hae) throw Error(ErrorCode::UnsupportedForBaseline, "dam_entry needs an HAE model");
  const ErrorTerms terms = error_terms(model, paired);
  return terms.translation - terms.reconstruction;
}

AffinityMatrix assemble_dam(const std::map<NamePair, double>& entries, const std::vector<std::string>& names) {
  const auto n = Eigen::Index(names.size());
  AffinityMatrix m{names, Matrix(n, n), AffinityKind::DirectedM};
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      auto it = entries.find({names[std::size_t(i)], names[std::size_t(j)]});
      if (it == entries.end()) {
        throw Error(ErrorCode::MissingPair, names[std::size_t(i)] + " -> " + names[std::size_t(j)]);
      }
      m.values(i, j) = it->second;
    }
  }
  return m;
}

AffinityMatrix build_dam(const std::map<NamePair, TranslatorModel>& models,
                         const std::map<NamePair, PairedSet>& pairs,
                         const std::vector<std::string>& names, std::size_t jobs) {
  std::vector<NamePair> order;
  for (const auto& s : names) {
    for (const auto& t : names) {
      if (!models.contains({s, t}) || !pairs.contains({s, t})) throw Error(ErrorCode::MissingPair, s + " -> " + t);
      order.emplace_back(s, t);
    }
  }
  std::vector<double> values(order.size());
  parallel_for(order.size(), jobs, [&](std::size_t k) {
    values[k] = dam_entry(models.at(order[k]), pairs.at(order[k]));
  });
  std::map<NamePair, double> entries;
  for (std::size_t k = 0; k < order.size(); ++k) entries.emplace(order[k], values[k]);
  return assemble_dam(entries, names);
}

Normalized normalize_rows(const AffinityMatrix& m, const NormalizeOptions& options) {
  check_square(m);
  Normalized out{m, {}};
  out.matrix.kind = AffinityKind::RowNormR;
  out.degenerate = scale_rows(out.matrix.values, options);
  return out;
}

Normalized normalize_cols(const AffinityMatrix& m, const NormalizeOptions& options) {
  check_square(m);
  Normalized out{m, {}};
  out.matrix.kind = AffinityKind::ColNormC;
  Matrix t = m.values.transpose();
  out.degenerate = scale_rows(t, options);
  out.matrix.values = t.transpose();
  return out;
}

AffinityMatrix uam(const AffinityMatrix& r, const AffinityMatrix& c) {
  check_square(r);
  check_square(c);
  if (r.names != c.names) throw Error(ErrorCode::NameMismatch, "R and C cover different names");
  AffinityMatrix u{r.names, {}, AffinityKind::UndirectedU};
  const Matrix s = r.values + c.values;
  // Adding s to its own transpose keeps the result exactly symmetric.
  u.values = 0.25 * (s + s.transpose());
  return u;
}

AffinityMatrix average_affinity(const std::vector<AffinityMatrix>& matrices) {
  if (matrices.empty()) throw Error(ErrorCode::EmptyInput, "nothing to average");
  AffinityMatrix out = matrices.front();
  check_square(out);
  for (std::size_t k = 1; k < matrices.size(); ++k) {
    const auto& m = matrices[k];
    if (m.names != out.names) throw Error(ErrorCode::NameMismatch, "matrix " + std::to_string(k));
    if (m.kind != out.kind) throw Error(ErrorCode::NameMismatch, "matrix " + std::to_string(k) + " has a different kind");
    check_square(m);
    out.values += m.values;
  }
  out.values /= double(matrices.size());
  return out;
}

bool is_symmetric(const AffinityMatrix& m, double tolerance) {
  if (m.values.rows() != m.values.cols()) return false;
  return ((m.values - m.values.transpose()).cwiseAbs().array() <= tolerance).all();
}

void write_affinity_csv(const AffinityMatrix& m, const std::filesystem::path& path) {
  check_square(m);
  for (const auto& name : m.names) {
    if (name.find_first_of(",\"\n\r") != std::string::npos) {
      throw Error(ErrorCode::InvalidArgument, "feature name not CSV-safe: " + name);
    }
  }
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out << std::setprecision(17);
  for (const auto& name : m.names) out << ',' << name;
  out << '\n';
  for (Eigen::Index i = 0; i < m.values.rows(); ++i) {
    out << m.names[std::size_t(i)];
    for (Eigen::Index j = 0; j < m.values.cols(); ++j) out << ',' << m.values(i, j);
    out << '\n';
  }
  if (!out) throw Error(ErrorCode::Io, "write failed: " + path.string());
}

AffinityMatrix read_affinity_csv(const std::filesystem::path& path, AffinityKind kind) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::Parse, path.string() + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  auto header = split_csv(line);
  if (header.size() < 2 || !header.front().empty()) {
    throw Error(ErrorCode::Parse, path.string() + ": header must start with an empty cell");
  }
  AffinityMatrix m;
  m.kind = kind;
  m.names.assign(header.begin() + 1, header.end());
  const auto n = Eigen::Index(m.names.size());
  m.values.resize(n, n);
  Eigen::Index row = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = split_csv(line);
    if (row >= n || Eigen::Index(cells.size()) != n + 1) {
      throw Error(ErrorCode::Parse, path.string() + ": row " + std::to_string(row + 1) + " has wrong shape");
    }
    if (cells[0] != m.names[std::size_t(row)]) {
      throw Error(ErrorCode::Parse, path.string() + ": row label " + cells[0] + " does not match header");
    }
    for (Eigen::Index j = 0; j < n; ++j) {
      const std::string& cell = cells[std::size_t(j + 1)];
      std::size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(cell, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used != cell.size() || cell.empty()) {
        throw Error(ErrorCode::Parse, path.string() + ": bad number '" + cell + "'");
      }
      m.values(row, j) = v;
    }
    ++row;
  }
  if (row != n) throw Error(ErrorCode::Parse, path.string() + ": expected " + std::to_string(n) + " rows");
  return m;
}

}  // namespace feattrans
