#pragma once

#include "feattrans/feature_io.hpp"
#include "feattrans/translator.hpp"

#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace feattrans {

enum class AffinityKind : std::uint8_t { DirectedM, RowNormR, ColNormC, UndirectedU };

/// Square matrix over feature-type names; rows are sources, columns targets.
struct AffinityMatrix {
  std::vector<std::string> names;
  Matrix values;
  AffinityKind kind = AffinityKind::DirectedM;

  std::size_t size() const { return names.size(); }
};

struct NormalizeOptions {
  // Include M[i][i] in each row/column min and max. When false the diagonal is skipped and
  // written as 0.
  bool include_diagonal = true;
};

struct Normalized {
  AffinityMatrix matrix;
  std::vector<std::size_t> degenerate;  // constant rows (or columns), written as all zeros
};

using NamePair = std::pair<std::string, std::string>;

/// Mean translation distance minus mean reconstruction distance on `paired`.
double dam_entry(const TranslatorModel& model, const PairedSet& paired);

/// M[i][j] = dam_entry(models[(names[i], names[j])], pairs[(names[i], names[j])]).
AffinityMatrix build_dam(const std::map<NamePair, TranslatorModel>& models,
                         const std::map<NamePair, PairedSet>& pairs,
                         const std::vector<std::string>& names, std::size_t jobs = 1);

/// Assembles M from already computed entries; every ordered pair must be present.
AffinityMatrix assemble_dam(const std::map<NamePair, double>& entries, const std::vector<std::string>& names);

Normalized normalize_rows(const AffinityMatrix& m, const NormalizeOptions& options = {});
Normalized normalize_cols(const AffinityMatrix& m, const NormalizeOptions& options = {});

/// U = (R + R^T + C + C^T) / 4
AffinityMatrix uam(const AffinityMatrix& r, const AffinityMatrix& c);

AffinityMatrix average_affinity(const std::vector<AffinityMatrix>& matrices);

bool is_symmetric(const AffinityMatrix& m, double tolerance = 1e-12);

void write_affinity_csv(const AffinityMatrix& m, const std::filesystem::path& path);
AffinityMatrix read_affinity_csv(const std::filesystem::path& path, AffinityKind kind);

}  // namespace feattrans
