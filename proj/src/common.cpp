#include "feattrans/common.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace feattrans {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::Io: return "Io";
    case ErrorCode::Parse: return "Parse";
    case ErrorCode::DimMismatch: return "DimMismatch";
    case ErrorCode::InconsistentDim: return "InconsistentDim";
    case ErrorCode::CountMismatch: return "CountMismatch";
    case ErrorCode::DuplicateId: return "DuplicateId";
    case ErrorCode::NonFinite: return "NonFinite";
    case ErrorCode::ZeroVector: return "ZeroVector";
    case ErrorCode::NoCommonIds: return "NoCommonIds";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::VersionMismatch: return "VersionMismatch";
    case ErrorCode::Truncated: return "Truncated";
    case ErrorCode::UnsupportedForBaseline: return "UnsupportedForBaseline";
    case ErrorCode::UnknownQueryId: return "UnknownQueryId";
    case ErrorCode::UnknownRelevantId: return "UnknownRelevantId";
    case ErrorCode::UnreachableRelevant: return "UnreachableRelevant";
    case ErrorCode::MissingPair: return "MissingPair";
    case ErrorCode::NameMismatch: return "NameMismatch";
    case ErrorCode::NotUndirected: return "NotUndirected";
    case ErrorCode::NumericFailure: return "NumericFailure";
  }
  return "Unknown";
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

void parallel_for(std::size_t count, std::size_t jobs, const std::function<void(std::size_t)>& fn) {
  jobs = std::clamp<std::size_t>(jobs, 1, std::max<std::size_t>(count, 1));
  if (jobs == 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < count; i = next++) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = count;
      }
    }
  };
  std::vector<std::thread> threads;
  threads.reserve(jobs);
  for (std::size_t t = 0; t < jobs; ++t) threads.emplace_back(worker);
  for (auto& t : threads) t.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace feattrans
