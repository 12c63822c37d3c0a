#include "feattrans/feature_io.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

namespace feattrans {

namespace {

std::uint32_t decode_u32(const std::array<unsigned char, 4>& b) {
  return std::uint32_t(b[0]) | (std::uint32_t(b[1]) << 8) | (std::uint32_t(b[2]) << 16) |
         (std::uint32_t(b[3]) << 24);
}

void encode_u32(std::uint32_t v, std::array<unsigned char, 4>& b) {
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
}

std::string strip_cr(std::string line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return line;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, sep)) out.push_back(item);
  return out;
}

}  // namespace

void validate(const FeatureSet& fs) {
  if (fs.vectors.rows() != static_cast<Eigen::Index>(fs.ids.size())) {
    throw Error(ErrorCode::CountMismatch, fs.name + ": " + std::to_string(fs.ids.size()) +
                                              " ids for " + std::to_string(fs.vectors.rows()) +
                                              " vectors");
  }
  if (fs.vectors.cols() < 1) throw Error(ErrorCode::InvalidArgument, fs.name + ": dim must be >= 1");
  std::unordered_set<std::string> seen;
  for (const auto& id : fs.ids) {
    if (!seen.insert(id).second) throw Error(ErrorCode::DuplicateId, id);
  }
  for (Eigen::Index i = 0; i < fs.vectors.rows(); ++i) {
    if (!fs.vectors.row(i).allFinite()) {
      throw Error(ErrorCode::NonFinite, fs.name + ": row " + std::to_string(i + 1));
    }
    if (fs.normalized && std::abs(fs.vectors.row(i).norm() - 1.0) > 1e-6) {
      throw Error(ErrorCode::InvalidArgument, fs.name + ": row " + std::to_string(i + 1) +
                                                  " is flagged normalized but is not unit norm");
    }
  }
}

Matrix read_vector_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());

  std::vector<float> values;
  std::uint32_t dim = 0;
  std::size_t records = 0;
  std::array<unsigned char, 4> header{};
  while (in.read(reinterpret_cast<char*>(header.data()), 4)) {
    ++records;
    const std::uint32_t d = decode_u32(header);
    if (d == 0) throw Error(ErrorCode::InconsistentDim, "record " + std::to_string(records) + " has dim 0");
    if (records == 1) {
      dim = d;
    } else if (d != dim) {
      throw Error(ErrorCode::InconsistentDim, "record " + std::to_string(records) + " has dim " +
                                                  std::to_string(d) + ", expected " + std::to_string(dim));
    }
    std::vector<std::array<unsigned char, 4>> raw(d);
    if (!in.read(reinterpret_cast<char*>(raw.data()), std::streamsize(4) * d)) {
      throw Error(ErrorCode::Truncated, "record " + std::to_string(records) + " in " + path.string());
    }
    for (const auto& bytes : raw) {
      const float f = std::bit_cast<float>(decode_u32(bytes));
      if (!std::isfinite(f)) {
        throw Error(ErrorCode::NonFinite, "record " + std::to_string(records) + " in " + path.string());
      }
      values.push_back(f);
    }
  }
  if (in.gcount() != 0) throw Error(ErrorCode::Truncated, "partial record header in " + path.string());

  Matrix out(static_cast<Eigen::Index>(records), static_cast<Eigen::Index>(dim));
  for (std::size_t r = 0; r < records; ++r) {
    for (std::uint32_t c = 0; c < dim; ++c) out(Eigen::Index(r), Eigen::Index(c)) = values[r * dim + c];
  }
  return out;
}

void write_vector_file(const Matrix& rows, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  std::array<unsigned char, 4> buf{};
  for (Eigen::Index r = 0; r < rows.rows(); ++r) {
    encode_u32(static_cast<std::uint32_t>(rows.cols()), buf);
    out.write(reinterpret_cast<const char*>(buf.data()), 4);
    for (Eigen::Index c = 0; c < rows.cols(); ++c) {
      encode_u32(std::bit_cast<std::uint32_t>(static_cast<float>(rows(r, c))), buf);
      out.write(reinterpret_cast<const char*>(buf.data()), 4);
    }
  }
  if (!out) throw Error(ErrorCode::Io, "write failed: " + path.string());
}

std::vector<std::string> read_ids_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  std::vector<std::string> ids;
  std::string line;
  while (std::getline(in, line)) {
    line = strip_cr(line);
    if (line.empty()) {
      throw Error(ErrorCode::Parse, path.string() + ": blank line " + std::to_string(ids.size() + 1));
    }
    ids.push_back(line);
  }
  return ids;
}

void write_ids_file(std::span<const std::string> ids, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  for (const auto& id : ids) out << id << '\n';
  if (!out) throw Error(ErrorCode::Io, "write failed: " + path.string());
}

FeatureSet load_feature_set(const std::filesystem::path& vec_path,
                            const std::filesystem::path& ids_path, const std::string& name) {
  FeatureSet fs;
  fs.name = name;
  fs.vectors = read_vector_file(vec_path);
  fs.ids = read_ids_file(ids_path);
  if (fs.vectors.rows() == 0) throw Error(ErrorCode::EmptyInput, vec_path.string() + " has no records");
  validate(fs);
  return fs;
}

void save_feature_set(const FeatureSet& fs, const std::filesystem::path& vec_path,
                      const std::filesystem::path& ids_path) {
  validate(fs);
  write_vector_file(fs.vectors, vec_path);
  write_ids_file(fs.ids, ids_path);
}

FeatureSet l2_normalize(const FeatureSet& fs) {
  FeatureSet out = fs;
  for (Eigen::Index i = 0; i < out.vectors.rows(); ++i) {
    const double n = out.vectors.row(i).norm();
    if (n == 0.0) throw Error(ErrorCode::ZeroVector, fs.ids[std::size_t(i)]);
    out.vectors.row(i) /= n;
  }
  out.normalized = true;
  return out;
}

FeatureSet subset(const FeatureSet& fs, std::span<const std::string> ids) {
  std::unordered_map<std::string, Eigen::Index> row_of;
  for (std::size_t i = 0; i < fs.ids.size(); ++i) row_of.emplace(fs.ids[i], Eigen::Index(i));
  FeatureSet out;
  out.name = fs.name;
  out.normalized = fs.normalized;
  out.ids.assign(ids.begin(), ids.end());
  out.vectors.resize(Eigen::Index(ids.size()), fs.vectors.cols());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    auto it = row_of.find(ids[i]);
    if (it == row_of.end()) throw Error(ErrorCode::InvalidArgument, fs.name + " has no id " + ids[i]);
    out.vectors.row(Eigen::Index(i)) = fs.vectors.row(it->second);
  }
  return out;
}

PairedSet align_pairs(const FeatureSet& src, const FeatureSet& tgt) {
  std::vector<std::string> a = src.ids, b = tgt.ids;
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  std::vector<std::string> common;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(common));
  if (common.empty()) throw Error(ErrorCode::NoCommonIds, src.name + " / " + tgt.name);

  PairedSet out;
  out.source = subset(src, common);
  out.target = subset(tgt, common);
  out.dropped = (a.size() - common.size()) + (b.size() - common.size());
  return out;
}

GroundTruth load_ground_truth(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  GroundTruth gt;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = strip_cr(line);
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos || tab == 0) {
      throw Error(ErrorCode::Parse, path.string() + ":" + std::to_string(lineno) + ": expected query<TAB>ids");
    }
    auto& rel = gt.relevant[line.substr(0, tab)];
    for (auto& id : split(line.substr(tab + 1), ',')) {
      if (!id.empty()) rel.insert(id);
    }
    if (rel.empty()) {
      throw Error(ErrorCode::Parse, path.string() + ":" + std::to_string(lineno) + ": no relevant ids");
    }
  }
  return gt;
}

void save_ground_truth(const GroundTruth& gt, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  for (const auto& [query, rel] : gt.relevant) {
    out << query << '\t';
    bool first = true;
    for (const auto& id : rel) {
      out << (first ? "" : ",") << id;
      first = false;
    }
    out << '\n';
  }
  if (!out) throw Error(ErrorCode::Io, "write failed: " + path.string());
}

GroundTruth restrict_ground_truth(const GroundTruth& gt, std::span<const std::string> query_ids,
                                  std::span<const std::string> ref_ids) {
  const std::unordered_set<std::string> queries(query_ids.begin(), query_ids.end());
  const std::unordered_set<std::string> refs(ref_ids.begin(), ref_ids.end());
  GroundTruth out;
  for (const auto& [query, rel] : gt.relevant) {
    if (!queries.contains(query)) continue;
    std::set<std::string> kept;
    for (const auto& id : rel) {
      if (id != query && refs.contains(id)) kept.insert(id);
    }
    if (!kept.empty()) out.relevant.emplace(query, std::move(kept));
  }
  return out;
}

}  // namespace feattrans
