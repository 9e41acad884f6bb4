#pragma once

#include <optional>
#include <string>
#include <vector>

#include "svgp/common.hpp"
#include "svgp/likelihoods/likelihood.hpp"
#include "svgp/math/random.hpp"

namespace svgp::data {

enum class Task { Regression, Binary, Multiclass };

Task task_from_string(const std::string& s);
std::string task_to_string(Task t);

/// Column selection and labeling rules for the loaders.
struct Schema {
  Task task = Task::Regression;
  // csv: label/target columns by header name (classification uses
  // label_col; regression uses target_cols, defaulting to the last column)
  std::string label_col;
  std::vector<std::string> target_cols;
  Index num_classes = 2;
  Index dim = 0;  // sparse format: densified width (required)
  bool features_only = false;  // prediction inputs without labels
};

/// Per-dimension affine transform recorded by normalization so test data
/// reuses the training statistics.
struct Transform {
  Vector feature_means, feature_scales;
  Vector target_means, target_scales;  // identity unless targets standardized
  bool has_features = false;
  bool has_targets = false;

  Matrix apply_features(const Matrix& x) const;
  Matrix apply_targets(const Matrix& y) const;
};

struct Dataset {
  Matrix x;            // N x D
  Matrix y_real;       // N x P (regression tasks)
  IntVector y_label;   // N (classification tasks)
  Task task = Task::Regression;
  Index num_classes = 2;
  std::string name;
  Transform transform;              // identity when unnormalized
  std::vector<std::string> notes;   // label remappings, warnings

  Index n() const { return x.rows(); }
  Index d() const { return x.cols(); }
  Index p() const { return task == Task::Regression ? y_real.cols() : 1; }
  lik::Observation observation(Index i) const;
};

enum class Format { Csv, Idx, Sparse };
Format format_from_string(const std::string& s);

/// Delimited text with a header row; labels/targets per the schema.
Dataset load_csv(const std::string& path, const Schema& schema);

/// IDX image + label pair (big-endian magics 0x803 / 0x801); pixels are
/// scaled to [0, 1]. The labels path may be empty for features_only.
Dataset load_idx(const std::string& images_path, const std::string& labels_path,
                 const Schema& schema);

/// One point per line: `label idx:val ...` with 1-based indices densified
/// to schema.dim columns.
Dataset load_sparse(const std::string& path, const Schema& schema);

enum class NormalizeMode { None, StandardizeInputs, StandardizeBoth };
NormalizeMode normalize_mode_from_string(const std::string& s);
std::string normalize_mode_to_string(NormalizeMode m);

/// Standardizes in place using the dataset's own statistics and records
/// the transform. Target standardization applies to regression only.
void normalize(Dataset& d, NormalizeMode mode);

/// Applies an existing transform (training statistics) to another dataset.
void apply_transform(Dataset& d, const Transform& t);

/// Seeded permutation split, class-stratified for classification.
std::pair<Dataset, Dataset> split(const Dataset& d, double test_fraction,
                                  math::RandomStream stream);

/// Binary cache with bit-exact round-trips.
void save_cache(const Dataset& d, const std::string& path);
Dataset load_cache(const std::string& path);

/// Seeded shuffled mini-batch pass; every epoch visits each index once.
class BatchIterator {
 public:
  BatchIterator(Index n, Index batch_size, math::RandomStream stream);

  void start_epoch(long epoch);
  /// Returns indices of the next mini-batch, empty once the epoch is done.
  std::vector<Index> next();
  Index batches_per_epoch() const;

 private:
  Index n_;
  Index batch_size_;
  math::RandomStream stream_;
  std::vector<Index> order_;
  Index cursor_ = 0;
};

}  // namespace svgp::data
