#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

#include "recprompt/vectors.hpp"

namespace recprompt {

// Fitted principal component projection from D to d dimensions.
struct PcaModel {
  std::size_t input_dim = 0;   // D
  std::size_t output_dim = 0;  // d
  std::vector<double> mean;                // D
  std::vector<double> components;          // d x D, row-major, orthonormal rows
  std::vector<double> explained_variance;  // d, non-increasing
  double total_variance = 0.0;             // trace of the sample covariance

  std::span<const double> component(std::size_t k) const {
    return std::span<const double>(components).subspan(k * input_dim, input_dim);
  }
};

enum class PcaSolver {
  kAuto,        // covariance route when D <= 4096, thin SVD otherwise
  kCovariance,  // eigendecomposition of the D x D sample covariance
  kSvd,         // thin SVD of the centered n x D matrix
};

// Rows of `data` are observations (n x D, row-major). Requires n >= 2 and
// 1 <= d <= min(n - 1, D). Each component is signed so that its
// largest-magnitude entry (first on ties) is positive. Variances use the
// n - 1 denominator.
PcaModel fit_pca(std::span<const double> data, std::size_t n, std::size_t input_dim,
                 std::size_t d, PcaSolver solver = PcaSolver::kAuto);
PcaModel fit_pca(const VectorTable& embeddings, std::size_t d,
                 PcaSolver solver = PcaSolver::kAuto);

// v = components * (u - mean)
std::vector<double> project(const PcaModel& model, std::span<const double> u);
std::vector<double> project(const PcaModel& model, std::span<const float> u);

// mean + components^T * v
std::vector<double> reconstruct(const PcaModel& model, std::span<const double> v);

// Projects every row; the result's source is "pca:<d>".
VectorTable project_all(const PcaModel& model, const VectorTable& embeddings);

// Persisted with the vector-file layout in f64le: a mean row, d component
// rows, and an explained-variance row zero-padded to D.
void save_pca_model(const PcaModel& model, const std::filesystem::path& dir);
PcaModel load_pca_model(const std::filesystem::path& dir);

}  // namespace recprompt
