#pragma once

// Distribution metrics (FID, PRD) on desk-scale embeddings, oracle-based
// domain-transfer scores, and report files.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "metalgan/checkpoint.hpp"
#include "metalgan/dataset.hpp"

namespace metalgan::eval {

inline const std::string kRandomConvEmbedder = "random_conv";
inline const std::string kDiscriminatorEmbedder = "disc_tap";
inline const std::string kRawPixelEmbedder = "raw_pixels";

/// Row-major (n x d) feature matrix.
struct EmbeddingSet {
  std::size_t n = 0;
  std::size_t d = 0;
  std::vector<double> values;
  std::string embedder;
  std::string source;
  std::vector<std::size_t> zero_variance_columns;

  double at(std::size_t i, std::size_t j) const { return values[i * d + j]; }
};

/// Known ids: random_conv (fixed-seed random conv projector, d = 64),
/// disc_tap (pooled last trunk block of a trained discriminator; requires the
/// checkpoint) and raw_pixels (4x4 area-downsampled RGB, d = 48).
EmbeddingSet embed(const ImageBatch& images, const std::string& embedder, const std::string& source = "",
                   const Checkpoint* checkpoint = nullptr);

/// Fréchet distance between Gaussian fits (unbiased covariance). A singular
/// covariance is regularized with 1e-6 I and a warning is appended.
double fid(const EmbeddingSet& a, const EmbeddingSet& b, std::vector<std::string>* warnings = nullptr);

struct PrdCurve {
  std::vector<double> lambdas;
  std::vector<double> precision;  // alpha
  std::vector<double> recall;     // beta
};

/// Slopes tan(theta) over an angular grid in (0, pi/2). The middle entry is 1
/// and entry n-1-i is the reciprocal of entry i.
std::vector<double> prd_lambda_grid(std::size_t size);

/// alpha(l) = sum min(l p_i, q_i), beta(l) = sum min(p_i, q_i / l), where p is
/// the reference histogram and q the evaluated one.
PrdCurve prd_from_histograms(const std::vector<double>& p, const std::vector<double>& q,
                             const std::vector<double>& lambdas);

struct PrdResult {
  PrdCurve curve;
  std::vector<double> p, q;
  std::vector<std::string> warnings;
};

/// Pools both sets, runs seeded k-means++/Lloyd, and compares the per-set
/// cluster histograms. Empty clusters are dropped with a warning.
PrdResult prd(const EmbeddingSet& reference, const EmbeddingSet& evaluated, std::size_t k_clusters = 20,
              std::size_t grid_size = 1001, std::uint64_t seed = 0);

/// Trapezoidal area under precision as a function of recall, in [0, 1].
double prd_auc(const PrdCurve& curve);

struct TransferScores {
  double success_rate = 0;
  double identity_l1 = 0;
  double preservation_rate = 0;
  std::size_t n = 0;
};

/// Oracle scores of outputs aligned 1:1 with inputs.
TransferScores domain_transfer_report(const ImageBatch& outputs, const ImageBatch& inputs, const DomainSpec& domain);

struct MetricRow {
  std::string phase;
  std::string domain;
  double fid = 0;
  double prd_auc = 0;
  double success_rate = 0;
  double identity_l1 = 0;
  double preservation_rate = 0;
  std::size_t n_samples = 0;
  std::string embedder;
  std::uint64_t seed = 0;

  bool operator==(const MetricRow&) const = default;
};

std::string format_metrics_csv(const std::vector<MetricRow>& rows);
std::vector<MetricRow> parse_metrics_csv(const std::string& text);

/// Per-domain material for plots.
struct DomainArtifacts {
  std::string domain;
  PrdCurve curve;
  ImageBatch inputs;
  ImageBatch outputs;
};

/// Writes metrics.csv, fid_bar.png, and prd_<domain>.png plus
/// contact_<domain>.png for each artifact entry. Returns the written paths.
std::vector<std::filesystem::path> emit_report(const std::vector<MetricRow>& rows,
                                               const std::vector<DomainArtifacts>& artifacts,
                                               const std::filesystem::path& out_dir);

}  // namespace metalgan::eval
