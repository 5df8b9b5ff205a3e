#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "orbitlift/error.hpp"
#include "orbitlift/graph.hpp"
#include "orbitlift/linalg.hpp"
#include "orbitlift/rng.hpp"

namespace orbitlift::tasks {

/// Sample covariance sum (x - mean_x)(y - mean_y) / (m - 1) over the given rows.
inline Matrix sample_covariance(const Matrix& samples, const std::vector<std::size_t>& rows) {
  const auto k = samples.cols();
  const auto m = rows.size();
  if (m < 2) throw Error("covariance needs at least two subjects");
  std::vector<double> mean(k, 0.0);
  for (auto r : rows) {
    for (std::size_t a = 0; a < k; ++a) mean[a] += samples(r, a) / static_cast<double>(m);
  }
  Matrix c(k, k);
  for (std::size_t a = 0; a < k; ++a) {
    for (std::size_t b = a; b < k; ++b) {
      double s = 0;
      for (auto r : rows) s += (samples(r, a) - mean[a]) * (samples(r, b) - mean[b]);
      c(a, b) = c(b, a) = s / static_cast<double>(m - 1);
    }
  }
  return c;
}

/// Subjects x attributes drawn from a clustered factor model: every attribute
/// loads on its cluster's factor and weakly on a shared factor, plus noise.
inline Matrix synthetic_covariance_samples(std::size_t subjects, std::size_t attributes, std::size_t clusters,
                                           std::uint64_t seed) {
  if (clusters == 0) throw Error("need at least one cluster");
  Rng rng(derive_key(seed, "covariance-samples"));
  std::vector<std::size_t> cluster(attributes);
  std::vector<double> loading(attributes), shared(attributes), noise(attributes);
  for (std::size_t a = 0; a < attributes; ++a) {
    cluster[a] = rng.below(clusters);
    loading[a] = (rng.bernoulli(0.5) ? 1.0 : -1.0) * rng.uniform(0.5, 1.5);
    shared[a] = rng.uniform(-0.3, 0.3);
    noise[a] = rng.uniform(0.3, 0.8);
  }
  Matrix x(subjects, attributes);
  std::vector<double> z(clusters);
  for (std::size_t s = 0; s < subjects; ++s) {
    for (auto& v : z) v = rng.normal();
    const double common = rng.normal();
    for (std::size_t a = 0; a < attributes; ++a) {
      x(s, a) = loading[a] * z[cluster[a]] + shared[a] * common + noise[a] * rng.normal();
    }
  }
  return x;
}

struct CovarianceOptions {
  std::size_t observed_subjects = 40;
  double split_fraction = 0.75;
  std::size_t bins = 32;
};

struct CovarianceQuery {
  NodePair pair;
  double target = 0;    // entry of the full-subject covariance
  double observed = 0;  // raw entry of the subset covariance
};

struct CovarianceTask {
  Matrix samples;
  std::vector<std::size_t> observed_rows;
  std::vector<std::size_t> attributes;  // kept original attribute indices; node k is attributes[k]
  std::vector<std::string> warnings;
  Matrix observed_cov, target_cov;      // over kept attributes
  std::vector<std::size_t> train_attributes, test_attributes;  // node ids
  std::vector<CovarianceQuery> probes, queries;
  ObservedGraph graph;
};

/// The subset covariance becomes the observed graph: entries quantised into
/// `bins` equal-width codes over its range, each code cast to its bin centre.
/// Pairs (i < j) inside the training attributes are probes; every other pair
/// is a query. Targets are full-sample covariances.
inline CovarianceTask build_covariance_task(const Matrix& samples, const CovarianceOptions& o, std::uint64_t seed) {
  const auto m = samples.rows();
  if (o.observed_subjects >= m) throw Error("observed subject count must be below the total");
  if (o.bins < 2 || o.bins > 256) throw Error("bins must be in [2, 256]");
  if (!(o.split_fraction > 0 && o.split_fraction < 1)) throw Error("split fraction must lie in (0, 1)");
  Rng rng(derive_key(seed, "covariance-task"));
  CovarianceTask t;
  t.samples = samples;
  t.observed_rows.resize(m);
  std::iota(t.observed_rows.begin(), t.observed_rows.end(), std::size_t{0});
  rng.shuffle(t.observed_rows);
  t.observed_rows.resize(o.observed_subjects);
  std::sort(t.observed_rows.begin(), t.observed_rows.end());
  std::vector<std::size_t> all(m);
  std::iota(all.begin(), all.end(), std::size_t{0});

  const auto subset_cov = sample_covariance(samples, t.observed_rows);
  for (std::size_t a = 0; a < samples.cols(); ++a) {
    if (subset_cov(a, a) > 1e-12) {
      t.attributes.push_back(a);
    } else {
      t.warnings.push_back("attribute " + std::to_string(a) + " has zero variance in the observed subjects; dropped");
    }
  }
  const auto k = t.attributes.size();
  const auto full_cov = sample_covariance(samples, all);
  t.observed_cov = Matrix(k, k);
  t.target_cov = Matrix(k, k);
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      t.observed_cov(i, j) = subset_cov(t.attributes[i], t.attributes[j]);
      t.target_cov(i, j) = full_cov(t.attributes[i], t.attributes[j]);
    }
  }

  double lo = 0, hi = 0;
  for (auto v : t.observed_cov.data()) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  const double width = hi > lo ? (hi - lo) / static_cast<double>(o.bins) : 1.0;
  std::vector<double> centres(o.bins);
  for (std::size_t b = 0; b < o.bins; ++b) centres[b] = lo + (static_cast<double>(b) + 0.5) * width;
  auto code = [&](double v) {
    const auto b = static_cast<std::size_t>(std::floor((v - lo) / width));
    return static_cast<EdgeValue>(std::min(b, o.bins - 1));
  };
  t.graph = ObservedGraph(k, false, Alphabet(o.bins, centres));
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = i; j < k; ++j) t.graph.set(i, j, code(t.observed_cov(i, j)));
  }

  std::vector<std::size_t> order(k);
  std::iota(order.begin(), order.end(), std::size_t{0});
  rng.shuffle(order);
  const auto n_train = static_cast<std::size_t>(std::llround(o.split_fraction * static_cast<double>(k)));
  t.train_attributes.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  t.test_attributes.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
  std::sort(t.train_attributes.begin(), t.train_attributes.end());
  std::sort(t.test_attributes.begin(), t.test_attributes.end());
  std::vector<bool> is_train(k, false);
  for (auto a : t.train_attributes) is_train[a] = true;
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = i + 1; j < k; ++j) {
      CovarianceQuery q{{i, j}, t.target_cov(i, j), t.observed_cov(i, j)};
      (is_train[i] && is_train[j] ? t.probes : t.queries).push_back(q);
    }
  }
  return t;
}

}  // namespace orbitlift::tasks
