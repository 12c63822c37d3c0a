#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>

namespace feattrans {

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

// Batches are stored one sample per row.
using Matrix = MatrixX<double>;
using Vector = VectorX<double>;

enum class ErrorCode {
  InvalidArgument,
  Io,
  Parse,
  DimMismatch,
  InconsistentDim,
  CountMismatch,
  DuplicateId,
  NonFinite,
  ZeroVector,
  NoCommonIds,
  EmptyInput,
  BadMagic,
  VersionMismatch,
  Truncated,
  UnsupportedForBaseline,
  UnknownQueryId,
  UnknownRelevantId,
  UnreachableRelevant,
  MissingPair,
  NameMismatch,
  NotUndirected,
  NumericFailure,
};

const char* to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& detail)
      : std::runtime_error(std::string(to_string(code)) + ": " + detail), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

// Seeds for independent sub-streams (SplitMix64 finalizer over seed and stream index).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

// Runs fn(0..count-1) over at most `jobs` threads. The first exception thrown by any task
// is rethrown after all threads have joined.
void parallel_for(std::size_t count, std::size_t jobs, const std::function<void(std::size_t)>& fn);

}  // namespace feattrans
