#pragma once

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <vector>

#include "c2flow/common.hpp"
#include "c2flow/forest.hpp"

namespace c2flow {

/// Column standardization: (x - mean) / scale, scale = sample sd or 1 for constant columns.
struct Standardizer {
  Eigen::VectorXd means;
  Eigen::VectorXd scales;

  static Standardizer fit(const Eigen::MatrixXd& X, bool sample_sd = true) {
    Standardizer s;
    const auto n = static_cast<double>(X.rows());
    s.means = X.colwise().mean().transpose();
    s.scales.resize(X.cols());
    for (Eigen::Index j = 0; j < X.cols(); ++j) {
      const double ss = (X.col(j).array() - s.means(j)).square().sum();
      const double denom = sample_sd ? std::max(n - 1.0, 1.0) : n;
      const double sd = std::sqrt(ss / denom);
      s.scales(j) = sd > 1e-12 * (1.0 + std::abs(s.means(j))) ? sd : 1.0;
    }
    return s;
  }

  Eigen::MatrixXd apply(const Eigen::MatrixXd& X) const {
    return (X.rowwise() - means.transpose()).array().rowwise() / scales.transpose().array();
  }

  nlohmann::json to_json() const {
    return {{"means", std::vector<double>(means.data(), means.data() + means.size())},
            {"scales", std::vector<double>(scales.data(), scales.data() + scales.size())}};
  }
  static Standardizer from_json(const nlohmann::json& j) {
    auto m = j.at("means").get<std::vector<double>>();
    auto s = j.at("scales").get<std::vector<double>>();
    if (m.size() != s.size()) throw FormatError("standardizer means/scales length mismatch");
    Standardizer out;
    out.means = Eigen::Map<Eigen::VectorXd>(m.data(), static_cast<Eigen::Index>(m.size()));
    out.scales = Eigen::Map<Eigen::VectorXd>(s.data(), static_cast<Eigen::Index>(s.size()));
    return out;
  }
  bool operator==(const Standardizer& o) const { return means == o.means && scales == o.scales; }
};

struct PcaTransform {
  Standardizer standardizer;
  Eigen::MatrixXd rotation;      // d x d, columns = eigenvectors, decreasing eigenvalue
  Eigen::VectorXd eigenvalues;   // all d, decreasing
  int k = 0;                     // retained components

  /// Scores on the first k components.
  Eigen::MatrixXd transform(const Eigen::MatrixXd& X) const {
    return standardizer.apply(X) * rotation.leftCols(k);
  }

  /// Maps component scores back to the raw feature scale.
  Eigen::MatrixXd inverse_transform(const Eigen::MatrixXd& scores) const {
    Eigen::MatrixXd z = scores * rotation.leftCols(scores.cols()).transpose();
    return (z.array().rowwise() * standardizer.scales.transpose().array()).rowwise() +
           standardizer.means.transpose().array();
  }

  nlohmann::json to_json() const {
    nlohmann::json rot = nlohmann::json::array();
    for (Eigen::Index c = 0; c < rotation.cols(); ++c)
      rot.push_back(std::vector<double>(rotation.col(c).data(), rotation.col(c).data() + rotation.rows()));
    return {{"standardizer", standardizer.to_json()},
            {"rotation", rot},
            {"eigenvalues", std::vector<double>(eigenvalues.data(), eigenvalues.data() + eigenvalues.size())},
            {"k", k}};
  }

  static PcaTransform from_json(const nlohmann::json& j) {
    PcaTransform p;
    p.standardizer = Standardizer::from_json(j.at("standardizer"));
    const auto d = p.standardizer.means.size();
    const auto& rot = j.at("rotation");
    p.rotation.resize(d, static_cast<Eigen::Index>(rot.size()));
    for (std::size_t c = 0; c < rot.size(); ++c) {
      auto col = rot[c].get<std::vector<double>>();
      if (static_cast<Eigen::Index>(col.size()) != d) throw FormatError("pca rotation has wrong shape");
      p.rotation.col(static_cast<Eigen::Index>(c)) =
          Eigen::Map<Eigen::VectorXd>(col.data(), d);
    }
    auto ev = j.at("eigenvalues").get<std::vector<double>>();
    p.eigenvalues = Eigen::Map<Eigen::VectorXd>(ev.data(), static_cast<Eigen::Index>(ev.size()));
    p.k = j.at("k").get<int>();
    if (p.k < 1 || p.k > p.rotation.cols()) throw FormatError("pca component count out of range");
    return p;
  }
};

/// PCA on the correlation matrix. k is the smallest count whose eigenvalues
/// reach `variance_retained` of the total.
inline PcaTransform fit_pca(const Eigen::MatrixXd& X, double variance_retained) {
  if (X.rows() < 2) throw InvalidArgument("fit_pca: need at least two rows");
  if (!X.allFinite()) throw InvalidArgument("fit_pca: non-finite input");
  PcaTransform p;
  p.standardizer = Standardizer::fit(X);
  const Eigen::MatrixXd Z = p.standardizer.apply(X);
  const Eigen::MatrixXd cov = (Z.transpose() * Z) / static_cast<double>(X.rows() - 1);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
  if (es.info() != Eigen::Success) throw Error("fit_pca: eigen decomposition failed");
  const auto d = cov.rows();
  // Eigen returns ascending order; flip to descending.
  p.eigenvalues = es.eigenvalues().reverse().cwiseMax(0.0);
  p.rotation = es.eigenvectors().rowwise().reverse();
  // Sign convention: largest-magnitude loading of each component is positive.
  for (Eigen::Index c = 0; c < d; ++c) {
    Eigen::Index arg;
    p.rotation.col(c).cwiseAbs().maxCoeff(&arg);
    if (p.rotation(arg, c) < 0) p.rotation.col(c) *= -1.0;
  }

  const double total = p.eigenvalues.sum();
  p.k = static_cast<int>(d);
  if (total > 0) {
    double acc = 0;
    for (Eigen::Index c = 0; c < d; ++c) {
      acc += p.eigenvalues(c);
      if (acc >= variance_retained * total - 1e-12 * total) {
        p.k = static_cast<int>(c + 1);
        break;
      }
    }
  } else {
    p.k = 1;
  }
  return p;
}

/// Random forest grown on PCA scores.
struct PcaForest {
  PcaTransform pca;
  RandomForest forest;

  Eigen::VectorXd predict(const Eigen::MatrixXd& X) const { return forest.predict(pca.transform(X)); }

  nlohmann::json to_json() const { return {{"pca", pca.to_json()}, {"forest", forest.to_json()}}; }
  static PcaForest from_json(const nlohmann::json& j) {
    return {PcaTransform::from_json(j.at("pca")), RandomForest::from_json(j.at("forest"))};
  }
};

}  // namespace c2flow
