#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "localembed/eval.hpp"
#include "localembed/linalg.hpp"
#include "localembed/pipeline.hpp"

namespace localembed {

/// Point-major feature (n x d) and label (n x L) matrices.
struct Dataset {
  SparseMatrix features;
  SparseMatrix labels;

  std::size_t num_points() const { return features.rows(); }
  std::size_t feature_dim() const { return features.cols(); }
  std::size_t label_count() const { return labels.cols(); }

  Dataset subset(std::span<const Index> rows) const;
};

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& source, std::size_t line, const std::string& what);
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

struct ParseOptions {
  /// Feature indices in the file start at 1.
  bool one_indexed = false;
};

/// Reads the extreme-classification repository text format:
///
///   n d L
///   l1,l2,... f:v f:v ...      (one line per point; the label field may be empty)
///
/// Indices are zero-based unless `one_indexed` is set (features only).
Dataset parse_xmc(const std::filesystem::path& path, const ParseOptions& options = {});
Dataset parse_xmc(std::istream& in, const ParseOptions& options = {}, const std::string& source = "<stream>");

/// Writes zero-based indices with shortest round-trip value formatting.
void write_xmc(const Dataset& data, std::ostream& out);
void write_xmc(const Dataset& data, const std::filesystem::path& path);

struct SplitIndices {
  std::vector<Index> train;
  std::vector<Index> test;
};

/// Seeded uniform split with `train_size` training points.
SplitIndices random_split(std::size_t n, std::size_t train_size, std::uint64_t seed);

/// Whitespace-separated columns of one-based row ids (the repository's
/// trSplit/tstSplit files); returns zero-based ids per column.
std::vector<std::vector<Index>> read_index_columns(const std::filesystem::path& path, std::size_t n);

/// "k,precision" header then one row per k with six decimals.
void write_report_csv(const EvalReport& report, std::ostream& out);
std::string report_csv(const EvalReport& report);

class ModelFormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr std::uint32_t kModelVersion = 1;

void save_model(const Ensemble& ensemble, std::ostream& out);
void save_model(const Ensemble& ensemble, const std::filesystem::path& path);
Ensemble load_model(std::istream& in);
Ensemble load_model(const std::filesystem::path& path);

/// Serialized size of the model as saved, and the size it would take with
/// every regressor stored densely.
std::size_t model_size_bytes(const Ensemble& ensemble);
std::size_t dense_model_size_bytes(const Ensemble& ensemble);

}  // namespace localembed
