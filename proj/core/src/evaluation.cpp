#include "metalgan/evaluation.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>

#include "metalgan/networks.hpp"
#include "metalgan/plot.hpp"
#include "metalgan/synthetic.hpp"

namespace metalgan::eval {
namespace {

constexpr std::uint64_t kProjectorSeed = 0x6d6574616c67616eULL;
constexpr int kEmbedChunk = 100;
constexpr double kSingularTolerance = 1e-12;
constexpr double kRegularizer = 1e-6;
constexpr double kNegativeEigenTolerance = 1e-6;

// Fixed random convolutional projector: three stride-2 3x3 convs with leaky
// ReLU, then global average pooling to 64 features.
class RandomProjector {
 public:
  RandomProjector() {
    Rng rng(kProjectorSeed);
    const int widths[] = {3, 16, 32, 64};
    for (int l = 0; l < 3; ++l) {
      Tensor<float> w({widths[l + 1], widths[l], 3, 3});
      const double std = std::sqrt(2.0 / (widths[l] * 9));
      for (std::size_t i = 0; i < w.size(); ++i) w[i] = static_cast<float>(rng.normal() * std);
      weights_.push_back(std::move(w));
    }
  }

  Tensor<float> features(const Tensor<float>& batch) const {
    auto h = ag::constant(batch);
    for (const auto& w : weights_)
      h = ag::leaky_relu(ag::conv2d(h, ag::constant(w), ag::Var<float>(), 2, 1), 0.2f);
    return ag::global_avg_pool(h).value();
  }

 private:
  std::vector<Tensor<float>> weights_;
};

Tensor<float> raw_pixel_features(const Tensor<float>& batch) {
  const int n = batch.dim(0), c = batch.dim(1), s = batch.dim(2);
  if (s % 4 != 0 || batch.dim(3) != s) throw ConfigError("raw_pixels embedder needs square images with size divisible by 4");
  const int cell = s / 4;
  Tensor<float> out({n, c * 16});
  for (int i = 0; i < n; ++i)
    for (int ch = 0; ch < c; ++ch)
      for (int by = 0; by < 4; ++by)
        for (int bx = 0; bx < 4; ++bx) {
          double acc = 0;
          for (int y = 0; y < cell; ++y)
            for (int x = 0; x < cell; ++x)
              acc += batch[((static_cast<std::size_t>(i) * c + ch) * s + by * cell + y) * s + bx * cell + x];
          out[static_cast<std::size_t>(i) * c * 16 + ch * 16 + by * 4 + bx] = static_cast<float>(acc / (cell * cell));
        }
  return out;
}

Tensor<float> chunk_of(const ImageBatch& images, int start, int count) {
  Shape s = images.shape();
  s[0] = count;
  Tensor<float> out(s);
  std::memcpy(out.data(), images.data() + static_cast<std::size_t>(start) * (images.size() / images.dim(0)),
              out.size() * sizeof(float));
  return out;
}

Eigen::MatrixXd as_matrix(const EmbeddingSet& e) {
  Eigen::MatrixXd m(e.n, e.d);
  for (std::size_t i = 0; i < e.n; ++i)
    for (std::size_t j = 0; j < e.d; ++j) m(i, j) = e.at(i, j);
  return m;
}

void gaussian_fit(const EmbeddingSet& e, Eigen::VectorXd& mu, Eigen::MatrixXd& cov) {
  const Eigen::MatrixXd x = as_matrix(e);
  mu = x.colwise().mean().transpose();
  const Eigen::MatrixXd centered = x.rowwise() - mu.transpose();
  cov = centered.transpose() * centered / static_cast<double>(e.n - 1);
}

bool is_singular(const Eigen::MatrixXd& cov) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov, Eigen::EigenvaluesOnly);
  const auto& ev = es.eigenvalues();
  return ev.minCoeff() <= kSingularTolerance * std::max(1.0, ev.maxCoeff());
}

Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (m + m.transpose()));
  const Eigen::VectorXd roots = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * roots.asDiagonal() * es.eigenvectors().transpose();
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

double parse_double(const std::string& s, std::size_t line) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || *end != '\0') throw ParseError("metrics.csv line " + std::to_string(line) + ": bad number '" + s + "'");
  return v;
}

const char* kMetricsHeader = "phase,domain,fid,prd_auc,success_rate,identity_l1,preservation_rate,n_samples,embedder,seed";

bool is_hair(const std::string& attribute) {
  return attribute == "black_hair" || attribute == "blond_hair" || attribute == "gray_hair";
}

}  // namespace

EmbeddingSet embed(const ImageBatch& images, const std::string& embedder, const std::string& source,
                   const Checkpoint* checkpoint) {
  if (images.rank() != 4 || images.dim(0) == 0) throw ConfigError("embed expects a non-empty (n, c, h, w) batch");
  std::function<Tensor<float>(const Tensor<float>&)> fn;
  if (embedder == kRandomConvEmbedder) {
    static const RandomProjector projector;
    fn = [&](const Tensor<float>& b) { return projector.features(b); };
  } else if (embedder == kRawPixelEmbedder) {
    fn = raw_pixel_features;
  } else if (embedder == kDiscriminatorEmbedder) {
    if (!checkpoint) throw ConfigError("disc_tap embedder requires a checkpoint");
    fn = [checkpoint](const Tensor<float>& b) {
      const Discriminator d(checkpoint->discriminator);
      const BoundParams<float> params(checkpoint->discriminator_params, false);
      return ag::global_avg_pool(d.forward(params, ag::constant(b)).features.back()).value();
    };
  } else {
    throw ConfigError("unknown embedder '" + embedder + "' (known: " + kRandomConvEmbedder + ", " +
                      kDiscriminatorEmbedder + ", " + kRawPixelEmbedder + ")");
  }

  EmbeddingSet out;
  out.embedder = embedder;
  out.source = source;
  out.n = static_cast<std::size_t>(images.dim(0));
  for (int start = 0; start < images.dim(0); start += kEmbedChunk) {
    const int count = std::min(kEmbedChunk, images.dim(0) - start);
    const Tensor<float> f = fn(chunk_of(images, start, count));
    out.d = static_cast<std::size_t>(f.dim(1));
    for (std::size_t i = 0; i < f.size(); ++i) out.values.push_back(f[i]);
  }
  for (double v : out.values)
    if (!std::isfinite(v)) throw TrainingError("embedder '" + embedder + "' produced a non-finite feature");
  for (std::size_t j = 0; j < out.d; ++j) {
    double mean = 0, var = 0;
    for (std::size_t i = 0; i < out.n; ++i) mean += out.at(i, j);
    mean /= static_cast<double>(out.n);
    for (std::size_t i = 0; i < out.n; ++i) var += (out.at(i, j) - mean) * (out.at(i, j) - mean);
    if (var <= 1e-12 * (1.0 + mean * mean) * static_cast<double>(out.n)) out.zero_variance_columns.push_back(j);
  }
  return out;
}

double fid(const EmbeddingSet& a, const EmbeddingSet& b, std::vector<std::string>* warnings) {
  if (a.embedder != b.embedder)
    throw ConfigError("fid: embedder mismatch ('" + a.embedder + "' vs '" + b.embedder + "')");
  if (a.d != b.d || a.d == 0) throw ConfigError("fid: feature dimensions differ or are zero");
  for (const auto* e : {&a, &b})
    if (e->n < e->d + 1)
      throw ConfigError("fid: " + (e->source.empty() ? std::string("embedding set") : "'" + e->source + "'") +
                        " has " + std::to_string(e->n) + " samples, needs at least " + std::to_string(e->d + 1));
  Eigen::VectorXd mu_a, mu_b;
  Eigen::MatrixXd cov_a, cov_b;
  gaussian_fit(a, mu_a, cov_a);
  gaussian_fit(b, mu_b, cov_b);
  if (is_singular(cov_a) || is_singular(cov_b)) {
    const Eigen::MatrixXd reg = kRegularizer * Eigen::MatrixXd::Identity(a.d, a.d);
    cov_a += reg;
    cov_b += reg;
    if (warnings) warnings->push_back("fid: singular covariance regularized with 1e-6 I");
  }
  const Eigen::MatrixXd root_a = psd_sqrt(cov_a);
  const Eigen::MatrixXd m = root_a * cov_b * root_a;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (m + m.transpose()), Eigen::EigenvaluesOnly);
  double trace_sqrt = 0;
  for (double ev : es.eigenvalues()) {
    if (ev < -kNegativeEigenTolerance)
      throw TrainingError("fid: covariance product has eigenvalue " + format_double(ev));
    trace_sqrt += std::sqrt(std::max(ev, 0.0));
  }
  const double value = (mu_a - mu_b).squaredNorm() + cov_a.trace() + cov_b.trace() - 2.0 * trace_sqrt;
  return std::max(value, 0.0);
}

std::vector<double> prd_lambda_grid(std::size_t size) {
  if (size < 3 || size % 2 == 0) throw ConfigError("PRD grid size must be odd and >= 3");
  constexpr double kEps = 1e-10;
  const std::size_t mid = size / 2;
  std::vector<double> grid(size);
  for (std::size_t i = 0; i < mid; ++i) {
    const double theta = kEps + (std::numbers::pi / 2 - 2 * kEps) * static_cast<double>(i) / (size - 1);
    grid[i] = std::tan(theta);
    grid[size - 1 - i] = 1.0 / grid[i];
  }
  grid[mid] = 1.0;
  return grid;
}

PrdCurve prd_from_histograms(const std::vector<double>& p, const std::vector<double>& q,
                             const std::vector<double>& lambdas) {
  if (p.size() != q.size() || p.empty()) throw ConfigError("PRD histograms must be non-empty and equally sized");
  PrdCurve c;
  c.lambdas = lambdas;
  for (double l : lambdas) {
    double alpha = 0, beta = 0;
    for (std::size_t i = 0; i < p.size(); ++i) {
      alpha += std::min(l * p[i], q[i]);
      beta += std::min(p[i], q[i] / l);
    }
    c.precision.push_back(std::clamp(alpha, 0.0, 1.0));
    c.recall.push_back(std::clamp(beta, 0.0, 1.0));
  }
  return c;
}

PrdResult prd(const EmbeddingSet& reference, const EmbeddingSet& evaluated, std::size_t k_clusters,
              std::size_t grid_size, std::uint64_t seed) {
  if (reference.embedder != evaluated.embedder) throw ConfigError("prd: embedder mismatch");
  if (reference.d != evaluated.d) throw ConfigError("prd: feature dimensions differ");
  const std::size_t n = reference.n + evaluated.n, d = reference.d;
  if (k_clusters == 0 || n < k_clusters)
    throw ConfigError("prd: " + std::to_string(n) + " pooled samples for " + std::to_string(k_clusters) + " clusters");
  if (reference.n == 0 || evaluated.n == 0) throw ConfigError("prd: empty embedding set");

  Eigen::MatrixXd x(n, d);
  x.topRows(reference.n) = as_matrix(reference);
  x.bottomRows(evaluated.n) = as_matrix(evaluated);

  // k-means++ seeding.
  Rng rng(seed);
  Eigen::MatrixXd centers(k_clusters, d);
  centers.row(0) = x.row(rng.uniform_index(n));
  Eigen::VectorXd dist2 = (x.rowwise() - centers.row(0)).rowwise().squaredNorm();
  for (std::size_t c = 1; c < k_clusters; ++c) {
    const double total = dist2.sum();
    std::size_t pick = rng.uniform_index(n);
    if (total > 0) {
      double r = rng.uniform01() * total;
      for (std::size_t i = 0; i < n; ++i) {
        r -= dist2[i];
        if (r < 0) {
          pick = i;
          break;
        }
      }
    }
    centers.row(c) = x.row(pick);
    dist2 = dist2.cwiseMin((x.rowwise() - centers.row(c)).rowwise().squaredNorm());
  }

  // Lloyd iterations.
  std::vector<std::size_t> assign(n, k_clusters);
  for (int iter = 0; iter < 300; ++iter) {
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < k_clusters; ++c) {
        const double dd = (x.row(i) - centers.row(c)).squaredNorm();
        if (dd < best_d) {
          best_d = dd;
          best = c;
        }
      }
      if (assign[i] != best) {
        assign[i] = best;
        changed = true;
      }
    }
    if (!changed) break;
    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(k_clusters, d);
    std::vector<std::size_t> counts(k_clusters, 0);
    for (std::size_t i = 0; i < n; ++i) {
      sums.row(assign[i]) += x.row(i);
      ++counts[assign[i]];
    }
    for (std::size_t c = 0; c < k_clusters; ++c)
      if (counts[c] > 0) centers.row(c) = sums.row(c) / static_cast<double>(counts[c]);
  }

  std::vector<double> ca(k_clusters, 0), cb(k_clusters, 0);
  for (std::size_t i = 0; i < n; ++i) (i < reference.n ? ca : cb)[assign[i]] += 1;
  PrdResult out;
  std::size_t dropped = 0;
  for (std::size_t c = 0; c < k_clusters; ++c) {
    if (ca[c] + cb[c] == 0) {
      ++dropped;
      continue;
    }
    out.p.push_back(ca[c] / static_cast<double>(reference.n));
    out.q.push_back(cb[c] / static_cast<double>(evaluated.n));
  }
  if (dropped) out.warnings.push_back("prd: dropped " + std::to_string(dropped) + " empty clusters");
  out.curve = prd_from_histograms(out.p, out.q, prd_lambda_grid(grid_size));
  return out;
}

double prd_auc(const PrdCurve& curve) {
  std::vector<std::pair<double, double>> pts;
  for (std::size_t i = 0; i < curve.recall.size(); ++i) pts.emplace_back(curve.recall[i], curve.precision[i]);
  std::sort(pts.begin(), pts.end());
  double area = 0;
  for (std::size_t i = 1; i < pts.size(); ++i)
    area += (pts[i].first - pts[i - 1].first) * 0.5 * (pts[i].second + pts[i - 1].second);
  return std::clamp(area, 0.0, 1.0);
}

TransferScores domain_transfer_report(const ImageBatch& outputs, const ImageBatch& inputs, const DomainSpec& domain) {
  if (outputs.shape() != inputs.shape())
    throw ConfigError("domain_transfer_report: outputs " + shape_string(outputs.shape()) + " do not align with inputs " +
                      shape_string(inputs.shape()));
  if (inputs.rank() != 4 || inputs.dim(0) == 0) throw ConfigError("domain_transfer_report: empty batch");
  const auto& names = synthetic::kAttributeNames;
  const auto target = std::find(names.begin(), names.end(), domain.attribute);
  if (target == names.end()) throw ConfigError("domain_transfer_report: unknown attribute '" + domain.attribute + "'");
  const std::size_t t = static_cast<std::size_t>(target - names.begin());
  const int size = inputs.dim(2);
  const auto mask = synthetic::attribute_region_mask(domain.attribute, size);
  const std::size_t plane = static_cast<std::size_t>(size) * size;

  TransferScores s;
  s.n = static_cast<std::size_t>(inputs.dim(0));
  std::size_t success = 0, preserved = 0;
  double identity = 0;
  for (std::size_t i = 0; i < s.n; ++i) {
    const auto in = batch_item(inputs, i);
    const auto out = batch_item(outputs, i);
    const auto a_in = synthetic::attribute_oracle(in);
    const auto a_out = synthetic::attribute_oracle(out);
    if (a_out[t] == domain.required_sign) ++success;
    bool same = true;
    for (std::size_t k = 0; k < names.size(); ++k) {
      if (k == t || (is_hair(domain.attribute) && is_hair(names[k]))) continue;
      same = same && a_in[k] == a_out[k];
    }
    if (same) ++preserved;
    double acc = 0;
    std::size_t count = 0;
    for (int c = 0; c < in.dim(0); ++c)
      for (std::size_t p = 0; p < plane; ++p) {
        if (mask[p]) continue;
        acc += std::abs(static_cast<double>(in[c * plane + p]) - out[c * plane + p]);
        ++count;
      }
    identity += count ? acc / static_cast<double>(count) : 0.0;
  }
  s.success_rate = static_cast<double>(success) / static_cast<double>(s.n);
  s.preservation_rate = static_cast<double>(preserved) / static_cast<double>(s.n);
  s.identity_l1 = identity / static_cast<double>(s.n);
  return s;
}

std::string format_metrics_csv(const std::vector<MetricRow>& rows) {
  std::string out = std::string(kMetricsHeader) + "\n";
  for (const auto& r : rows) {
    out += r.phase + "," + r.domain + "," + format_double(r.fid) + "," + format_double(r.prd_auc) + "," +
           format_double(r.success_rate) + "," + format_double(r.identity_l1) + "," +
           format_double(r.preservation_rate) + "," + std::to_string(r.n_samples) + "," + r.embedder + "," +
           std::to_string(r.seed) + "\n";
  }
  return out;
}

std::vector<MetricRow> parse_metrics_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || split_csv(line) != split_csv(kMetricsHeader))
    throw ParseError("metrics.csv: unexpected header");
  std::vector<MetricRow> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto f = split_csv(line);
    if (f.size() != 10) throw ParseError("metrics.csv line " + std::to_string(line_no) + ": expected 10 fields");
    MetricRow r;
    r.phase = f[0];
    r.domain = f[1];
    r.fid = parse_double(f[2], line_no);
    r.prd_auc = parse_double(f[3], line_no);
    r.success_rate = parse_double(f[4], line_no);
    r.identity_l1 = parse_double(f[5], line_no);
    r.preservation_rate = parse_double(f[6], line_no);
    r.n_samples = static_cast<std::size_t>(parse_double(f[7], line_no));
    r.embedder = f[8];
    r.seed = std::stoull(f[9]);
    rows.push_back(std::move(r));
  }
  return rows;
}

std::vector<std::filesystem::path> emit_report(const std::vector<MetricRow>& rows,
                                               const std::vector<DomainArtifacts>& artifacts,
                                               const std::filesystem::path& out_dir) {
  if (rows.empty()) throw ConfigError("emit_report: no metric rows");
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create '" + out_dir.string() + "': " + ec.message());
  std::vector<std::filesystem::path> written;

  const auto csv_path = out_dir / "metrics.csv";
  {
    std::ofstream out(csv_path, std::ios::binary | std::ios::trunc);
    out << format_metrics_csv(rows);
    if (!out) throw IoError("cannot write '" + csv_path.string() + "'");
  }
  written.push_back(csv_path);

  auto save = [&](const plot::Canvas& cv, const std::filesystem::path& p) {
    cv.save(p.string());
    written.push_back(p);
  };

  std::vector<plot::Bar> bars;
  const bool mixed_phases =
      std::any_of(rows.begin(), rows.end(), [&](const MetricRow& r) { return r.phase != rows.front().phase; });
  for (const auto& r : rows) bars.push_back({mixed_phases ? r.phase + ":" + r.domain : r.domain, r.fid});
  save(plot::bar_chart("fid (" + rows.front().embedder + ")", bars), out_dir / "fid_bar.png");

  for (const auto& a : artifacts) {
    save(plot::curve_plot("prd " + a.domain, a.curve.recall, a.curve.precision), out_dir / ("prd_" + a.domain + ".png"));
    if (a.inputs.rank() != 4 || a.outputs.shape() != a.inputs.shape()) continue;
    constexpr int kCols = 8, kScale = 2, kPad = 2;
    const int shown = std::min(a.inputs.dim(0), 16);
    const int s = a.inputs.dim(2) * kScale;
    const int rows_n = (shown + kCols - 1) / kCols;
    plot::Canvas cv(kCols * (s + kPad) + kPad, rows_n * 2 * (s + kPad) + kPad, plot::kGray);
    for (int i = 0; i < shown; ++i) {
      const int x = kPad + (i % kCols) * (s + kPad);
      const int y = kPad + (i / kCols) * 2 * (s + kPad);
      cv.image(x, y, batch_item(a.inputs, i), kScale);
      cv.image(x, y + s + kPad, batch_item(a.outputs, i), kScale);
    }
    save(cv, out_dir / ("contact_" + a.domain + ".png"));
  }
  return written;
}

}  // namespace metalgan::eval
