#include "recprompt/reducer.hpp"

#include <fmt/format.h>

#include <Eigen/Dense>
#include <cmath>
#include <nlohmann/json.hpp>
#include <string>

#include "recprompt/error.hpp"

namespace recprompt {
namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

constexpr std::size_t kCovarianceMaxDim = 4096;

void orient(Eigen::Ref<Eigen::VectorXd> v) {
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < v.size(); ++i) {
    if (std::abs(v[i]) > std::abs(v[best])) best = i;
  }
  if (v[best] < 0) v = -v;
}

}  // namespace

PcaModel fit_pca(std::span<const double> data, std::size_t n, std::size_t input_dim,
                 std::size_t d, PcaSolver solver) {
  if (data.size() != n * input_dim) throw_data_error("PCA input shape mismatch");
  if (n < 2) throw_config_error(fmt::format("PCA needs at least 2 rows, got {}", n));
  if (d < 1 || d > std::min(n - 1, input_dim)) {
    throw_config_error(fmt::format("PCA dimension {} out of range [1, {}]", d,
                                   std::min(n - 1, input_dim)));
  }
  for (const double x : data) {
    if (!std::isfinite(x)) throw_data_error("PCA input contains a non-finite value");
  }

  const Eigen::Map<const RowMatrix> x(data.data(), static_cast<Eigen::Index>(n),
                                      static_cast<Eigen::Index>(input_dim));
  const Eigen::RowVectorXd mean = x.colwise().mean();
  const Eigen::MatrixXd centered = x.rowwise() - mean;
  const double denom = static_cast<double>(n - 1);

  if (solver == PcaSolver::kAuto) {
    solver = input_dim <= kCovarianceMaxDim ? PcaSolver::kCovariance : PcaSolver::kSvd;
  }

  const auto D = static_cast<Eigen::Index>(input_dim);
  const auto k = static_cast<Eigen::Index>(d);
  Eigen::MatrixXd basis(D, k);
  Eigen::VectorXd variance(k);

  if (solver == PcaSolver::kCovariance) {
    const Eigen::MatrixXd cov = (centered.adjoint() * centered) / denom;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
    if (eig.info() != Eigen::Success) throw_data_error("covariance eigendecomposition failed");
    // Eigenvalues come back ascending.
    for (Eigen::Index j = 0; j < k; ++j) {
      basis.col(j) = eig.eigenvectors().col(D - 1 - j);
      variance[j] = eig.eigenvalues()[D - 1 - j];
    }
  } else {
    Eigen::BDCSVD<Eigen::MatrixXd> svd(centered, Eigen::ComputeThinV);
    for (Eigen::Index j = 0; j < k; ++j) {
      basis.col(j) = svd.matrixV().col(j);
      const double s = svd.singularValues()[j];
      variance[j] = s * s / denom;
    }
  }

  PcaModel model;
  model.input_dim = input_dim;
  model.output_dim = d;
  model.mean.assign(mean.data(), mean.data() + D);
  model.components.resize(d * input_dim);
  model.explained_variance.resize(d);
  model.total_variance = centered.squaredNorm() / denom;
  for (Eigen::Index j = 0; j < k; ++j) {
    Eigen::VectorXd v = basis.col(j);
    orient(v);
    for (Eigen::Index i = 0; i < D; ++i) {
      model.components[static_cast<std::size_t>(j * D + i)] = v[i];
    }
    model.explained_variance[static_cast<std::size_t>(j)] = std::max(0.0, variance[j]);
  }
  // Clamping can only break ordering among values that were already ~0.
  for (std::size_t j = 1; j < d; ++j) {
    model.explained_variance[j] =
        std::min(model.explained_variance[j], model.explained_variance[j - 1]);
  }
  return model;
}

PcaModel fit_pca(const VectorTable& embeddings, std::size_t d, PcaSolver solver) {
  embeddings.validate();
  std::vector<double> data(embeddings.values.begin(), embeddings.values.end());
  return fit_pca(data, embeddings.rows(), embeddings.dim, d, solver);
}

std::vector<double> project(const PcaModel& model, std::span<const double> u) {
  if (u.size() != model.input_dim) {
    throw_data_error(fmt::format("cannot project a {}-dim vector with a {}-dim PCA model",
                                 u.size(), model.input_dim));
  }
  std::vector<double> centered(u.size());
  for (std::size_t i = 0; i < u.size(); ++i) centered[i] = u[i] - model.mean[i];
  std::vector<double> v(model.output_dim, 0.0);
  for (std::size_t k = 0; k < model.output_dim; ++k) {
    const auto c = model.component(k);
    double acc = 0.0;
    for (std::size_t i = 0; i < centered.size(); ++i) acc += c[i] * centered[i];
    v[k] = acc;
  }
  return v;
}

std::vector<double> project(const PcaModel& model, std::span<const float> u) {
  const std::vector<double> wide(u.begin(), u.end());
  return project(model, wide);
}

std::vector<double> reconstruct(const PcaModel& model, std::span<const double> v) {
  if (v.size() != model.output_dim) throw_data_error("reconstruct: dimension mismatch");
  std::vector<double> u = model.mean;
  for (std::size_t k = 0; k < model.output_dim; ++k) {
    const auto c = model.component(k);
    for (std::size_t i = 0; i < u.size(); ++i) u[i] += v[k] * c[i];
  }
  return u;
}

VectorTable project_all(const PcaModel& model, const VectorTable& embeddings) {
  if (embeddings.dim != model.input_dim) {
    throw_data_error(fmt::format("embeddings have {} dims, PCA model expects {}",
                                 embeddings.dim, model.input_dim));
  }
  VectorTable out;
  out.ids = embeddings.ids;
  out.dim = model.output_dim;
  out.source = fmt::format("pca:{}", model.output_dim);
  out.values.reserve(embeddings.rows() * model.output_dim);
  for (std::size_t r = 0; r < embeddings.rows(); ++r) {
    const auto v = project(model, embeddings.row(r));
    for (const double x : v) out.values.push_back(static_cast<float>(x));
  }
  return out;
}

void save_pca_model(const PcaModel& model, const std::filesystem::path& dir) {
  const auto D = model.input_dim;
  const auto d = model.output_dim;
  std::vector<std::string> ids;
  std::vector<double> values;
  values.reserve((d + 2) * D);
  ids.emplace_back("mean");
  values.insert(values.end(), model.mean.begin(), model.mean.end());
  for (std::size_t k = 0; k < d; ++k) {
    ids.push_back(fmt::format("component_{}", k));
    const auto c = model.component(k);
    values.insert(values.end(), c.begin(), c.end());
  }
  ids.emplace_back("explained_variance");
  for (std::size_t i = 0; i < D; ++i) {
    values.push_back(i < d ? model.explained_variance[i] : 0.0);
  }

  nlohmann::ordered_json extra;
  extra["kind"] = "pca";
  extra["input_dim"] = D;
  extra["output_dim"] = d;
  extra["total_variance"] = model.total_variance;
  const auto row_bytes = D * sizeof(double);
  extra["sections"] = {
      {"mean", {{"row", 0}, {"rows", 1}, {"offset", 0}}},
      {"components", {{"row", 1}, {"rows", d}, {"offset", row_bytes}}},
      {"explained_variance",
       {{"row", d + 1}, {"rows", 1}, {"length", d}, {"offset", (d + 1) * row_bytes}}},
  };
  write_f64_rows(dir, ids, D, values, extra.dump());
}

PcaModel load_pca_model(const std::filesystem::path& dir) {
  const auto rows = read_f64_rows(dir);
  PcaModel model;
  try {
    const auto m = nlohmann::json::parse(rows.manifest_json);
    if (m.value("kind", std::string()) != "pca") {
      throw_data_error(fmt::format("{} is not a PCA model", dir.string()));
    }
    model.input_dim = m.at("input_dim").get<std::size_t>();
    model.output_dim = m.at("output_dim").get<std::size_t>();
    model.total_variance = m.at("total_variance").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw_data_error(fmt::format("{}: {}", dir.string(), e.what()));
  }
  const auto D = model.input_dim;
  const auto d = model.output_dim;
  if (rows.dim != D || rows.ids.size() != d + 2) {
    throw_data_error(fmt::format("{}: PCA model layout does not match its manifest",
                                 dir.string()));
  }
  const auto* p = rows.values.data();
  model.mean.assign(p, p + D);
  model.components.assign(p + D, p + (d + 1) * D);
  model.explained_variance.assign(p + (d + 1) * D, p + (d + 1) * D + d);
  return model;
}

}  // namespace recprompt
