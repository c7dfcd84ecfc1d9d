#pragma once

#include <random>
#include <vector>

#include "sqpf/slices.hpp"

namespace sqpf {

// One N-way-K-shot task. Entries point into an immutable sample store; an
// Episode is cheap to copy and safe to share across workers.
struct Episode {
  std::vector<const SliceSample*> support;  // class-major, n_way * k_shot entries
  const SliceSample* query = nullptr;
  std::string class_label;  // the query's class
  int n_way = 1;
  int k_shot = 1;

  // The K support shots of the query's class.
  std::vector<const SliceSample*> query_class_support() const;
};

// Samples an episode from the pool: n_way distinct classes, k_shot supports
// per class, one query of a uniformly chosen episode class. The query's case
// never appears in the support set. Throws naming the deficient class when a
// class lacks the samples or the distinct cases to satisfy that.
Episode sample_episode(const std::vector<const SliceSample*>& pool, int n_way, int k_shot,
                       std::mt19937_64& rng);

// 1-way episode with the support drawn from one pool and the query from
// another (e.g. support from training-fold cases, query from the held-out
// fold). Both pools must hold a single class. Case-disjointness between
// support and query is still enforced.
Episode sample_support_query(const std::vector<const SliceSample*>& support_pool,
                             const std::vector<const SliceSample*>& query_pool, int k_shot,
                             std::mt19937_64& rng);

// Pool helpers.
std::vector<const SliceSample*> filter_by_class(const std::vector<const SliceSample*>& pool,
                                                const std::string& class_label);

}  // namespace sqpf
